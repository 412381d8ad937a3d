"""Training loop, inter-task corpus augmentation, and the hyperparameter grid.

The grid is the full Cartesian product over epochs {100,200,400}, sequence
length {100,200}, batch size {32,64}, filter count {32,64,128} and learning
rate {0.001, 0.0005} — 72 trials.  Each trial derives its own seed as
``base_seed XOR trial_index`` so any trial run in isolation reproduces its
in-grid result, and trials can run in parallel worker processes.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace, asdict

import numpy as np

from .corpus import Corpus, Document, EntitySpan, RelationRecord, LABELS
from .diffcore import AdamState, adam_step
from .embeddings import EmbeddingTable
from .errors import ConfigError, DataError
from .pcnn import ModelConfig, ModelParams, init_params, loss_and_grads, predict
from .preprocess import RelationInstance


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.001
    max_seq_len: int = 200
    n_filters: int = 64
    seed: int = 0
    augment: bool = False

    def validate(self) -> list[str]:
        problems = []
        for name in ("epochs", "batch_size", "max_seq_len", "n_filters"):
            if getattr(self, name) < 0 or (name != "epochs" and getattr(self, name) == 0):
                problems.append(f"{name} must be positive, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            problems.append(f"learning_rate must be positive, got {self.learning_rate}")
        return problems


@dataclass
class TrainLog:
    epoch_losses: list[float]

    @property
    def final_loss(self) -> float | None:
        return self.epoch_losses[-1] if self.epoch_losses else None


@dataclass
class TrialResult:
    config: TrainConfig
    trial_index: int
    macro_f1: float
    log: TrainLog
    checkpoint: str | None = None

    def record(self) -> dict:
        """Flat dict for the line-delimited trial log."""
        rec = asdict(self.config)
        rec["trial"] = self.trial_index
        rec["macro_f1"] = self.macro_f1
        rec["final_loss"] = self.log.final_loss
        rec["checkpoint"] = self.checkpoint
        return rec


# --- inter-task augmentation -------------------------------------------------

def _namespace_entity(entity_id: str, tag: str) -> str:
    return f"{tag}:{entity_id}"


def _namespace_document(doc: Document, tag: str) -> Document:
    entities = tuple(
        EntitySpan(entity_id=_namespace_entity(e.entity_id, tag),
                   start_char=e.start_char, end_char=e.end_char,
                   in_title=e.in_title, surface=e.surface)
        for e in doc.entities)
    return Document(doc_id=f"{tag}:{doc.doc_id}", title=doc.title,
                    abstract=doc.abstract, entities=entities)


def _namespace_corpus(corpus: Corpus) -> Corpus:
    tag = corpus.source_tag
    documents = [_namespace_document(d, tag) for d in corpus.documents]
    relations = [
        RelationRecord(label=r.label,
                       arg1_id=_namespace_entity(r.arg1_id, tag),
                       arg2_id=_namespace_entity(r.arg2_id, tag),
                       reverse=r.reverse, line_no=r.line_no)
        for r in corpus.relations]
    return Corpus(documents=documents, relations=relations, source_tag=tag)


def augment(primary: Corpus, other: Corpus) -> Corpus:
    """Merge two corpora into one tagged ``merged``.

    Document and entity ids on both sides are prefixed with their corpus
    source tags so ids from sibling tasks cannot collide; text, offsets and
    labels are untouched.
    """
    left = _namespace_corpus(primary)
    right = _namespace_corpus(other)
    documents = left.documents + right.documents
    seen: set[str] = set()
    for doc in documents:
        if doc.doc_id in seen:
            raise DataError(
                f"document id {doc.doc_id!r} collides after namespacing; "
                f"give the corpora distinct source tags")
        seen.add(doc.doc_id)
    return Corpus(documents=documents,
                  relations=left.relations + right.relations,
                  source_tag="merged")


# --- single training run -----------------------------------------------------

def derive_model_config(base: ModelConfig, tc: TrainConfig) -> ModelConfig:
    """TrainConfig owns the grid dimensions; fold them into the model config."""
    return replace(base, n_filters=tc.n_filters, max_seq_len=tc.max_seq_len)


def train(instances: list[RelationInstance], tc: TrainConfig, mcfg: ModelConfig,
          word_table: EmbeddingTable, pad_id: int,
          params: ModelParams | None = None) -> tuple[ModelParams, TrainLog]:
    """Seeded epochs of shuffled minibatch Adam; deterministic given tc.seed."""
    if not instances:
        raise ConfigError("training set is empty")
    problems = tc.validate() + mcfg.validate()
    if problems:
        raise ConfigError("; ".join(problems))
    if mcfg.n_filters != tc.n_filters or mcfg.max_seq_len != tc.max_seq_len:
        raise ConfigError(
            f"model config (n_filters={mcfg.n_filters}, max_seq_len="
            f"{mcfg.max_seq_len}) disagrees with train config "
            f"(n_filters={tc.n_filters}, max_seq_len={tc.max_seq_len})")

    rng = np.random.default_rng(tc.seed)
    init_seed = int(rng.integers(2 ** 31))
    dropout_rng = np.random.default_rng(int(rng.integers(2 ** 31)))
    if params is None:
        params = init_params(mcfg, word_table, pad_id, seed=init_seed)
    optimizer = AdamState(lr=tc.learning_rate)

    n = len(instances)
    epoch_losses: list[float] = []
    for _ in range(tc.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, tc.batch_size):
            batch = [instances[i] for i in order[start:start + tc.batch_size]]
            loss = loss_and_grads(batch, params, mcfg, rng=dropout_rng)
            adam_step(params.named_parameters(), optimizer)
            total += loss * len(batch)
        epoch_losses.append(total / n)
    return params, TrainLog(epoch_losses)


def validation_macro_f1(instances: list[RelationInstance], params: ModelParams,
                        mcfg: ModelConfig,
                        extra_gold: tuple[str, ...] = ()) -> float:
    """Macro-F1 of argmax predictions against the instances' own labels.

    extra_gold carries the gold labels of relations that could not be encoded
    (skipped instances); they are scored against the fallback label so the
    metric covers the full validation set, matching file-level evaluation.
    """
    from .scoring import FALLBACK_LABEL, score

    gold = [LABELS[inst.label] for inst in instances]
    pred = [LABELS[predict(inst, params, mcfg)[0]] for inst in instances]
    gold.extend(extra_gold)
    pred.extend([FALLBACK_LABEL] * len(extra_gold))
    return score(gold, pred).macro_f1


# --- grid search ---------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    epochs: tuple[int, ...] = (100, 200, 400)
    max_seq_lens: tuple[int, ...] = (100, 200)
    batch_sizes: tuple[int, ...] = (32, 64)
    n_filters: tuple[int, ...] = (32, 64, 128)
    learning_rates: tuple[float, ...] = (0.001, 0.0005)

    @property
    def size(self) -> int:
        return (len(self.epochs) * len(self.max_seq_lens) * len(self.batch_sizes)
                * len(self.n_filters) * len(self.learning_rates))

    def validate(self) -> list[str]:
        problems = []
        for name in ("epochs", "max_seq_lens", "batch_sizes", "n_filters",
                     "learning_rates"):
            if not getattr(self, name):
                problems.append(f"grid dimension {name} is empty")
        return problems

    def enumerate(self, base_seed: int, augment: bool = False) -> list[TrainConfig]:
        """All trial configs in a fixed order, seeded base_seed XOR index."""
        if self.validate():
            raise ConfigError("; ".join(self.validate()))
        configs = []
        product = itertools.product(self.epochs, self.max_seq_lens,
                                    self.batch_sizes, self.n_filters,
                                    self.learning_rates)
        for index, (ep, seq, bs, nf, lr) in enumerate(product):
            configs.append(TrainConfig(
                epochs=ep, batch_size=bs, learning_rate=lr, max_seq_len=seq,
                n_filters=nf, seed=base_seed ^ index, augment=augment))
        return configs


@dataclass(frozen=True)
class TrialData:
    """Instances prepared for one sequence length."""
    train_set: tuple[RelationInstance, ...]
    val_set: tuple[RelationInstance, ...]
    # gold labels of validation relations that could not be encoded
    val_extra_gold: tuple[str, ...] = ()


# One TrialData per grid sequence length: {max_seq_len: TrialData}.
Datasets = dict

def run_trial(datasets: Datasets, tc: TrainConfig, trial_index: int,
              mcfg_base: ModelConfig, word_table: EmbeddingTable,
              pad_id: int) -> TrialResult:
    if tc.max_seq_len not in datasets:
        raise ConfigError(
            f"no instances prepared for max_seq_len {tc.max_seq_len}; "
            f"have {sorted(datasets)}")
    data = datasets[tc.max_seq_len]
    mcfg = derive_model_config(mcfg_base, tc)
    params, log = train(list(data.train_set), tc, mcfg, word_table, pad_id)
    f1 = validation_macro_f1(list(data.val_set), params, mcfg,
                             extra_gold=data.val_extra_gold)
    return TrialResult(config=tc, trial_index=trial_index, macro_f1=f1, log=log)


def select_best(trials: list[TrialResult]) -> TrialResult:
    """Highest validation macro-F1; ties go to fewer epochs, then fewer filters."""
    if not trials:
        raise ConfigError("no trials to select from")
    return max(trials, key=lambda t: (t.macro_f1, -t.config.epochs,
                                      -t.config.n_filters))


_WORKER: dict = {}


def _grid_worker_init(datasets, mcfg_base, word_table, pad_id):
    _WORKER["args"] = (datasets, mcfg_base, word_table, pad_id)


def _grid_worker_run(job: tuple[TrainConfig, int]) -> TrialResult:
    datasets, mcfg_base, word_table, pad_id = _WORKER["args"]
    tc, index = job
    return run_trial(datasets, tc, index, mcfg_base, word_table, pad_id)


def grid_search(datasets: Datasets, grid: GridSpec, mcfg_base: ModelConfig,
                word_table: EmbeddingTable, pad_id: int, seed: int,
                augment: bool = False, parallel: int = 1,
                on_result=None) -> tuple[TrialResult, list[TrialResult]]:
    """Run every grid trial and select the winner.

    With parallel > 1 trials run in worker processes; per-trial seeds keep the
    results identical to a serial run.  on_result, when given, is called with
    each TrialResult as it completes (serial mode: in trial order).
    """
    configs = grid.enumerate(seed, augment=augment)
    for tc in configs:
        if tc.max_seq_len not in datasets:
            raise ConfigError(
                f"grid needs instances for max_seq_len {tc.max_seq_len}; "
                f"have {sorted(datasets)}")
    jobs = list(zip(configs, range(len(configs))))
    if parallel <= 1:
        results = []
        for tc, index in jobs:
            result = run_trial(datasets, tc, index, mcfg_base, word_table, pad_id)
            results.append(result)
            if on_result is not None:
                on_result(result)
    else:
        with ProcessPoolExecutor(
                max_workers=parallel, initializer=_grid_worker_init,
                initargs=(datasets, mcfg_base, word_table, pad_id)) as pool:
            results = []
            for result in pool.map(_grid_worker_run, jobs):
                results.append(result)
                if on_result is not None:
                    on_result(result)
    return select_best(results), results


def final_fit(full_set: list[RelationInstance], tc: TrainConfig,
              mcfg_base: ModelConfig, word_table: EmbeddingTable,
              pad_id: int) -> tuple[ModelParams, TrainLog]:
    """Retrain the selected config on training + validation (+ augmentation)."""
    mcfg = derive_model_config(mcfg_base, tc)
    return train(full_set, tc, mcfg, word_table, pad_id)


def write_trial_log(trials: list[TrialResult], path) -> None:
    """One JSON record per line, in trial order."""
    with open(path, "w", encoding="utf-8") as fh:
        for trial in sorted(trials, key=lambda t: t.trial_index):
            fh.write(json.dumps(trial.record(), sort_keys=True) + "\n")


def format_grid_summary(trials: list[TrialResult], top: int = 10) -> str:
    """Human-readable leaderboard of the best trials."""
    ranked = sorted(trials, key=lambda t: (-t.macro_f1, t.config.epochs,
                                           t.config.n_filters, t.trial_index))
    header = (f"{'rank':>4}  {'trial':>5}  {'epochs':>6}  {'seq':>4}  "
              f"{'batch':>5}  {'filters':>7}  {'lr':>7}  {'macro-F1':>8}")
    lines = [header, "-" * len(header)]
    for rank, t in enumerate(ranked[:top], start=1):
        c = t.config
        lines.append(f"{rank:>4}  {t.trial_index:>5}  {c.epochs:>6}  "
                     f"{c.max_seq_len:>4}  {c.batch_size:>5}  {c.n_filters:>7}  "
                     f"{c.learning_rate:>7g}  {t.macro_f1:>8.4f}")
    lines.append(f"({len(trials)} trials total)")
    return "\n".join(lines)
