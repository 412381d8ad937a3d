"""Official-style scoring: per-class P/R/F1, macro-F1, confusion matrix.

Zero-division convention: precision, recall and F1 all fall back to 0 when
their denominator is 0.  Macro-F1 averages over ALL six classes by default
(absent classes contribute 0); pass macro_over="present" to average only
over classes with gold support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import LABELS, RelationRecord
from .errors import DataError
from .pcnn import ModelConfig, ModelParams, predict
from .preprocess import REVERSE, RelationInstance

# Label assigned to relations whose instances could not be encoded (entity
# span lost in cleaning, heads too far apart, ...) so prediction files always
# cover every gold pair.  The most frequent class is the best blind guess.
FALLBACK_LABEL = LABELS[0]

# Macro-F1 reference points for the two subtasks, keyed by (task, data).
REFERENCE_MACRO_F1 = {
    ("1.1", "1.1"): 35.3,
    ("1.1", "1.1+1.2"): 48.1,
    ("1.2", "1.2"): 64.4,
    ("1.2", "1.1+1.2"): 74.7,
}


@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ScoreReport:
    labels: tuple[str, ...]
    per_class: dict[str, ClassScore]
    macro_f1: float
    micro_accuracy: float
    confusion: np.ndarray  # [k, k], rows = gold, columns = predicted
    n: int

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "per_class": {
                label: {"precision": cs.precision, "recall": cs.recall,
                        "f1": cs.f1, "support": cs.support}
                for label, cs in self.per_class.items()},
            "macro_f1": self.macro_f1,
            "micro_accuracy": self.micro_accuracy,
            "confusion": self.confusion.tolist(),
            "n": self.n,
        }


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def score(gold: list[str], pred: list[str], labels: tuple[str, ...] = LABELS,
          macro_over: str = "all") -> ScoreReport:
    """Score predicted labels against gold labels over a fixed label set."""
    if len(gold) != len(pred):
        raise DataError(
            f"gold has {len(gold)} labels but predictions have {len(pred)}")
    if macro_over not in ("all", "present"):
        raise DataError(f"macro_over must be 'all' or 'present', got {macro_over!r}")
    index = {label: i for i, label in enumerate(labels)}
    k = len(labels)
    confusion = np.zeros((k, k), dtype=np.int64)
    for g, p in zip(gold, pred):
        if g not in index:
            raise DataError(f"unknown gold label {g!r}; expected one of {labels}")
        if p not in index:
            raise DataError(f"unknown predicted label {p!r}; expected one of {labels}")
        confusion[index[g], index[p]] += 1

    per_class: dict[str, ClassScore] = {}
    for i, label in enumerate(labels):
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum()) - tp
        fn = int(confusion[i, :].sum()) - tp
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2.0 * precision * recall, precision + recall)
        per_class[label] = ClassScore(precision, recall, f1,
                                      support=int(confusion[i, :].sum()))

    if macro_over == "all":
        averaged = list(labels)
    else:
        averaged = [label for label in labels if per_class[label].support > 0]
    macro_f1 = (sum(per_class[label].f1 for label in averaged) / len(averaged)
                if averaged else 0.0)
    n = len(gold)
    micro = _safe_div(float(np.trace(confusion)), n)
    return ScoreReport(labels=tuple(labels), per_class=per_class,
                       macro_f1=macro_f1, micro_accuracy=micro,
                       confusion=confusion, n=n)


# --- prediction files ----------------------------------------------------------

def prediction_records(instances: list[RelationInstance], params: ModelParams,
                       cfg: ModelConfig, labels: tuple[str, ...] = LABELS
                       ) -> list[RelationRecord]:
    """One relation record per instance, labeled by the model."""
    records = []
    for inst in instances:
        cls, _ = predict(inst, params, cfg)
        records.append(RelationRecord(label=labels[cls], arg1_id=inst.arg1_id,
                                      arg2_id=inst.arg2_id,
                                      reverse=inst.direction == REVERSE))
    return records


def write_prediction_file(records: list[RelationRecord], path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(record.render() + "\n")
    except OSError as exc:
        raise DataError(f"cannot write predictions to {path}: {exc}") from exc


def emit_predictions(instances: list[RelationInstance], params: ModelParams,
                     cfg: ModelConfig, path) -> list[RelationRecord]:
    """Write `LABEL(arg1,arg2[,REVERSE])` lines that parse_relations round-trips."""
    records = prediction_records(instances, params, cfg)
    write_prediction_file(records, path)
    return records


# --- report rendering -----------------------------------------------------------

def format_score_report(report: ScoreReport) -> str:
    header = (f"{'class':<12} {'precision':>9} {'recall':>9} {'f1':>9} "
              f"{'support':>8}")
    lines = [header, "-" * len(header)]
    for label in report.labels:
        cs = report.per_class[label]
        lines.append(f"{label:<12} {cs.precision:>9.4f} {cs.recall:>9.4f} "
                     f"{cs.f1:>9.4f} {cs.support:>8}")
    lines.append("-" * len(header))
    lines.append(f"macro-F1        {report.macro_f1:.4f}")
    lines.append(f"micro accuracy  {report.micro_accuracy:.4f}")
    lines.append(f"instances       {report.n}")
    return "\n".join(lines)


def report_table(rows: list[dict]) -> str:
    """Result table (task, data, epochs, batch, filters, macro-F1, reference).

    Each row needs task, data and macro_f1 (in percent or [0,1]; values <= 1
    are treated as rates and scaled); epochs/batch/filters are optional.
    """
    header = (f"{'task':<6} {'data':<10} {'epochs':>6} {'batch':>5} "
              f"{'filters':>7} {'macro-F1':>8} {'reference':>9}")
    lines = [header, "-" * len(header)]
    for row in rows:
        f1 = row["macro_f1"]
        f1 = f1 * 100.0 if f1 <= 1.0 else f1
        ref = REFERENCE_MACRO_F1.get((row["task"], row["data"]))
        lines.append(
            f"{row['task']:<6} {row['data']:<10} "
            f"{str(row.get('epochs', '-')):>6} {str(row.get('batch', '-')):>5} "
            f"{str(row.get('filters', '-')):>7} {f1:>8.1f} "
            f"{ref if ref is not None else '-':>9}")
    return "\n".join(lines)
