"""Figure rendering for the CLI report paths (headless Agg backend).

Every figure goes straight to a file next to the run's structured outputs;
nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_class_histogram(histogram: dict[str, int], path,
                         title: str = "Relation class counts") -> None:
    labels = list(histogram)
    counts = [histogram[label] for label in labels]
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    bars = ax.bar(range(len(labels)), counts, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("relations")
    ax.set_title(title)
    ax.bar_label(bars, padding=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_length_histogram(lengths: list[int], path,
                          title: str = "Token lengths") -> None:
    arr = np.asarray(lengths)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    if arr.size:
        ax.hist(arr, bins=min(40, max(5, arr.size // 4)), color="#4878a8",
                edgecolor="white")
        p95 = float(np.percentile(arr, 95))
        ax.axvline(p95, color="#c44e52", linestyle="--",
                   label=f"95th percentile = {p95:.0f}")
        ax.legend()
    ax.set_xlabel("tokens")
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_loss_curve(epoch_losses: list[float], path,
                    title: str = "Training loss") -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(range(1, len(epoch_losses) + 1), epoch_losses, color="#4878a8")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean cross-entropy")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_grid_results(records: list[dict], path,
                      title: str = "Grid search trials") -> None:
    """Scatter of validation macro-F1 per trial, colored by filter count."""
    fig, ax = plt.subplots(figsize=(8.0, 4.0))
    if records:
        filters = sorted({r["n_filters"] for r in records})
        cmap = plt.get_cmap("viridis", max(len(filters), 1))
        for i, nf in enumerate(filters):
            xs = [r["trial"] for r in records if r["n_filters"] == nf]
            ys = [r["macro_f1"] for r in records if r["n_filters"] == nf]
            ax.scatter(xs, ys, s=24, color=cmap(i), label=f"{nf} filters")
        best = max(records, key=lambda r: r["macro_f1"])
        ax.annotate(f"best {best['macro_f1']:.3f}",
                    xy=(best["trial"], best["macro_f1"]),
                    xytext=(5, 8), textcoords="offset points")
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xlabel("trial index")
    ax.set_ylabel("validation macro-F1")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_confusion_matrix(confusion: np.ndarray, labels: tuple[str, ...], path,
                          title: str = "Confusion matrix") -> None:
    conf = np.asarray(confusion)
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    image = ax.imshow(conf, cmap="Blues")
    ax.set_xticks(range(len(labels)))
    ax.set_yticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticklabels(labels, fontsize=8)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    ax.set_title(title)
    threshold = conf.max() / 2 if conf.size and conf.max() > 0 else 0.5
    for i in range(conf.shape[0]):
        for j in range(conf.shape[1]):
            ax.text(j, i, str(int(conf[i, j])), ha="center", va="center",
                    fontsize=8,
                    color="white" if conf[i, j] > threshold else "black")
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
