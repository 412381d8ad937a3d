"""Shared test utilities: finite differences, tiny model setups, synthetic data.

Everything here runs in float64 so gradient checks have headroom; production
code defaults to float32.
"""

from __future__ import annotations

import numpy as np

from scirel.corpus import LABELS
from scirel.diffcore import Tensor
from scirel.embeddings import EmbeddingTable, Vocabulary
from scirel.pcnn import ModelConfig, ModelParams, init_params
from scirel.preprocess import FORWARD, REVERSE, RelationInstance, relative_positions

F64 = np.float64


def rel_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(numeric))


def central_difference(f, arr: np.ndarray, flat_index: int, eps: float = 1e-5
                       ) -> float:
    """(f(x+eps) - f(x-eps)) / 2eps at one entry of arr, restoring arr."""
    flat = arr.reshape(-1)
    original = flat[flat_index]
    flat[flat_index] = original + eps
    plus = f()
    flat[flat_index] = original - eps
    minus = f()
    flat[flat_index] = original
    return (plus - minus) / (2.0 * eps)


def max_grad_error(f, named_tensors: list[tuple[str, Tensor]],
                   eps: float = 1e-5, sample: int | None = None,
                   rng: np.random.Generator | None = None) -> float:
    """Worst relative error between stored grads and central differences.

    f() must recompute the scalar AND leave each tensor's .grad populated
    with the analytic gradient.  With sample set, only that many entries per
    tensor are checked (chosen by rng).
    """
    f()  # populate grads
    grads = {name: t.grad.copy() for name, t in named_tensors}
    worst = 0.0
    for name, tensor in named_tensors:
        size = tensor.data.size
        if sample is None or size <= sample:
            indices = range(size)
        else:
            indices = (rng or np.random.default_rng(0)).choice(
                size, size=sample, replace=False)
        for i in indices:
            numeric = central_difference(f, tensor.data, int(i), eps)
            analytic = grads[name].reshape(-1)[int(i)]
            worst = max(worst, rel_error(analytic, numeric))
    return worst


def tiny_model_config(**overrides) -> ModelConfig:
    """Small config for gradient checks: d_in 8, rep_dim 20, window 4."""
    base = dict(filter_widths=(3, 4, 5), n_filters=2, pos_dim=2, dir_dim=2,
                n_classes=6, keep_prob=1.0, max_seq_len=7, position_window=4,
                nonlinearity="tanh", fine_tune_words=True, init_scale=0.1)
    base.update(overrides)
    return ModelConfig(**base)


def tiny_word_table(n_words: int = 10, dim: int = 4, seed: int = 7,
                    dtype=F64) -> tuple[Vocabulary, EmbeddingTable]:
    """Vocabulary of n_words tokens (plus PAD/UNK) with a random float table."""
    vocab = Vocabulary.from_words([f"w{i}" for i in range(n_words - 2)])
    assert len(vocab) == n_words
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-0.5, 0.5, size=(n_words, dim)).astype(dtype)
    matrix[vocab.pad_id] = 0.0
    return vocab, EmbeddingTable(Tensor(matrix), trainable=True)


def tiny_setup(seed: int = 0, n_words: int = 10, dim: int = 4, **cfg_overrides
               ) -> tuple[Vocabulary, EmbeddingTable, ModelConfig, ModelParams]:
    vocab, table = tiny_word_table(n_words=n_words, dim=dim, seed=seed + 100)
    cfg = tiny_model_config(**cfg_overrides)
    params = init_params(cfg, table, vocab.pad_id, seed=seed)
    return vocab, table, cfg, params


def random_instance(rng: np.random.Generator, cfg: ModelConfig,
                    vocab: Vocabulary, label: int | None = 0,
                    min_len: int = 4) -> RelationInstance:
    seq = cfg.max_seq_len
    real_length = int(rng.integers(min_len, seq + 1))
    p1 = int(rng.integers(0, real_length))
    p2 = int(rng.integers(0, real_length - 1))
    if p2 >= p1:
        p2 += 1
    ids = np.full(seq, vocab.pad_id, dtype=np.int32)
    ids[:real_length] = rng.integers(2, len(vocab), size=real_length)
    return RelationInstance(
        token_ids=ids, p1=p1, p2=p2,
        rel_pos1=relative_positions(seq, p1, cfg.position_window),
        rel_pos2=relative_positions(seq, p2, cfg.position_window),
        direction=int(rng.integers(0, 2)),
        real_length=real_length,
        label=label if label is None else int(label),
        doc_id="synthetic", arg1_id="s.1", arg2_id="s.2")


def random_batch(rng, cfg, vocab, size: int) -> list[RelationInstance]:
    return [random_instance(rng, cfg, vocab, label=int(rng.integers(0, 6)))
            for _ in range(size)]


# --- synthetic corpus files ------------------------------------------------------

_WORD_POOL = ("parser grammar corpus model embedding network feature token "
              "relation entity system method score metric task label data "
              "analysis result graph").split()


def make_corpus_text(n_docs: int, seed: int = 0, doc_prefix: str = "A"
                     ) -> tuple[str, str]:
    """Synthetic annotated abstracts plus a relations file covering all labels.

    Each document carries four single-word abstract entities and two
    relations between them; labels and REVERSE flags cycle deterministically.
    """
    rng = np.random.default_rng(seed)
    doc_blocks = []
    rel_lines = []
    k = 0
    for d in range(n_docs):
        doc_id = f"{doc_prefix}{d:02d}"
        words = [
            _WORD_POOL[int(rng.integers(0, len(_WORD_POOL)))] for _ in range(12)]
        title = f"Notes on {words[0]} {words[1]}"
        ents = [f"{doc_id}.{i}" for i in range(1, 5)]
        abstract = (
            f'We use <entity id="{ents[0]}">{words[2]}</entity> with the '
            f'<entity id="{ents[1]}">{words[3]}</entity> approach. '
            f'The <entity id="{ents[2]}">{words[4]}</entity> improves every '
            f'<entity id="{ents[3]}">{words[5]}</entity> by 12 points.')
        doc_blocks.append(f'<text id="{doc_id}">\n<title>{title}</title>\n'
                          f'<abstract>{abstract}</abstract>\n</text>')
        for a, b in ((0, 1), (2, 3)):
            label = LABELS[k % len(LABELS)]
            flag = ",REVERSE" if k % 3 == 0 else ""
            rel_lines.append(f"{label}({ents[a]},{ents[b]}{flag})")
            k += 1
    return "\n".join(doc_blocks) + "\n", "\n".join(rel_lines) + "\n"


def write_corpus_files(tmp_path, n_docs: int, seed: int = 0,
                       doc_prefix: str = "A", stem: str = "train"):
    text, rels = make_corpus_text(n_docs, seed=seed, doc_prefix=doc_prefix)
    text_path = tmp_path / f"{stem}_text.txt"
    rel_path = tmp_path / f"{stem}_relations.txt"
    text_path.write_text(text, encoding="utf-8")
    rel_path.write_text(rels, encoding="utf-8")
    return text_path, rel_path


def write_embedding_file(tmp_path, dim: int = 8, seed: int = 3,
                         header: bool = False, extra_words=()):
    """Vector file covering the synthetic corpus vocabulary."""
    rng = np.random.default_rng(seed)
    words = list(_WORD_POOL) + ["we", "use", "with", "the", "approach",
                                "improves", "every", "by", "points", "notes",
                                "on", "<num>", *extra_words]
    lines = []
    if header:
        lines.append(f"{len(words)} {dim}")
    for w in words:
        vec = rng.uniform(-0.5, 0.5, size=dim)
        lines.append(w + " " + " ".join(f"{v:.6f}" for v in vec))
    path = tmp_path / "vectors.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
