"""Command line interface: inspect, train, grid, predict, evaluate.

One executable, subcommand style.  Hyperparameters come from a JSON config
file (sections: preprocess, model, train, grid) with flags overriding; every
command writes a run manifest recording input digests, the effective config
and the artifact paths, so any run can be reproduced bit-for-bit from its
manifest seed.

Exit codes: 0 success, 1 usage/config error, 2 data/parse error, 3 numeric
failure (non-finite loss).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, asdict, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import report
from .corpus import (Corpus, LABELS, RelationRecord, class_histogram,
                     load_corpus, parse_relations, resolve)
from .embeddings import Vocabulary, load_pretrained
from .errors import ConfigError, DataError, NumericError, ScirelError
from .pcnn import ModelConfig, ModelParams, load_model, save_model
from .preprocess import (PreprocessConfig, REVERSE, build_instances,
                         head_position, prepare_segment)
from .scoring import (FALLBACK_LABEL, format_score_report, prediction_records,
                      report_table, score, write_prediction_file)
from .trainer import (GridSpec, TrainConfig, TrialData, derive_model_config,
                      final_fit, format_grid_summary, grid_search, train,
                      validation_macro_f1, write_trial_log)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse maps usage problems to exit code 2; we reserve 2 for data."""

    def error(self, message):
        raise ConfigError(message)


# --- configuration -------------------------------------------------------------

_SECTIONS = {
    "preprocess": PreprocessConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "grid": GridSpec,
}


@dataclass
class AppConfig:
    preprocess: PreprocessConfig
    model: ModelConfig
    train: TrainConfig
    grid: GridSpec

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in _SECTIONS}


def _build_section(cls, data: dict, section: str, problems: list[str]):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            problems.append(
                f"{section}: unknown key {key!r} (known: {', '.join(sorted(known))})")
            continue
        default = known[key].default
        if isinstance(default, tuple) and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        problems.append(f"{section}: {exc}")
        return cls()


def load_config(path: str | None) -> AppConfig:
    """Parse the JSON config; every violation is reported, not just the first."""
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")

    problems: list[str] = []
    for section in raw:
        if section not in _SECTIONS:
            problems.append(f"unknown config section {section!r} "
                            f"(known: {', '.join(_SECTIONS)})")
    built = {}
    for section, cls in _SECTIONS.items():
        built[section] = _build_section(cls, raw.get(section, {}), section,
                                        problems)
    cfg = AppConfig(**built)
    for section in _SECTIONS:
        problems.extend(f"{section}: {p}" for p in getattr(cfg, section).validate())
    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(problems))
    return cfg


# --- run manifest ----------------------------------------------------------------

def _sha256(path) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                digest.update(chunk)
    except FileNotFoundError:
        raise DataError(f"input file not found: {path}")
    except OSError as exc:
        raise DataError(f"cannot read input file {path}: {exc}")
    return digest.hexdigest()


def _digest_inputs(named_paths: list[tuple[str, str]]) -> dict:
    """Digest every input up front, before any of it is parsed."""
    return {name: {"path": str(p), "sha256": _sha256(p)} for name, p in named_paths}


@dataclass
class RunManifest:
    command: str
    created_utc: str
    seed: int
    inputs: dict
    config: dict
    artifacts: dict

    @classmethod
    def start(cls, command: str, seed: int, inputs: dict, config: dict
              ) -> "RunManifest":
        return cls(command=command,
                   created_utc=datetime.now(timezone.utc).isoformat(),
                   seed=seed, inputs=inputs, config=config, artifacts={})

    def add(self, name: str, path) -> Path:
        self.artifacts[name] = str(path)
        return Path(path)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        self.artifacts["manifest"] = str(path)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _out_dir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_jsonl(path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


# --- shared data plumbing ---------------------------------------------------------

def _augment_pairs(args) -> list[tuple[str, str]]:
    texts = args.augment_text or []
    rels = args.augment_relations or []
    if len(texts) != len(rels):
        raise ConfigError(
            f"--augment-text given {len(texts)} time(s) but "
            f"--augment-relations {len(rels)} time(s); they must pair up")
    return list(zip(texts, rels))


def _load_training_corpus(args) -> tuple[Corpus, bool]:
    """Main corpus plus any augmentation corpora merged in."""
    from .trainer import augment

    corpus = load_corpus(args.train_text, args.train_relations,
                         source_tag=Path(args.train_text).stem)
    pairs = _augment_pairs(args)
    for text_path, rel_path in pairs:
        extra = load_corpus(text_path, rel_path,
                            source_tag=Path(text_path).stem)
        corpus = augment(corpus, extra)
    return corpus, bool(pairs)


def _build_dataset(corpus: Corpus, vocab: Vocabulary, pre_cfg: PreprocessConfig,
                   require_labels: bool):
    resolved = resolve(corpus)
    instances, skipped = build_instances(resolved, vocab, pre_cfg)
    if require_labels and any(inst.label is None for inst in instances):
        raise DataError("corpus contains relations with no usable label")
    return instances, skipped


def _predicted_records(instances, skipped, params: ModelParams,
                       mcfg: ModelConfig) -> list[RelationRecord]:
    """Model predictions plus fallback labels for non-encodable relations."""
    records = prediction_records(instances, params, mcfg)
    for sk in skipped:
        records.append(RelationRecord(label=FALLBACK_LABEL,
                                      arg1_id=sk.relation.arg1_id,
                                      arg2_id=sk.relation.arg2_id,
                                      reverse=sk.relation.reverse))
    return records


def _in_corpus_order(corpus: Corpus, records: list[RelationRecord]
                     ) -> list[RelationRecord]:
    """Reorder predictions to line up with the gold relations file."""
    by_key = {(r.arg1_id, r.arg2_id, r.reverse): r for r in records}
    ordered = []
    for rel in corpus.relations:
        key = (rel.arg1_id, rel.arg2_id, rel.reverse)
        if key not in by_key:
            raise DataError(f"no prediction produced for {rel.render()}")
        ordered.append(by_key[key])
    return ordered


def _effective_seed(args, cfg: AppConfig) -> int:
    return args.seed if args.seed is not None else cfg.train.seed


def _log(message: str) -> None:
    print(message)


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


# --- subcommands -------------------------------------------------------------------

def cmd_inspect(args) -> int:
    cfg = load_config(args.config)
    out_dir = _out_dir(args)
    named = [("train_text", args.train_text),
             ("train_relations", args.train_relations)]
    for i, (t, r) in enumerate(_augment_pairs(args)):
        named += [(f"augment_text_{i}", t), (f"augment_relations_{i}", r)]
    inputs = _digest_inputs(named)
    manifest = RunManifest.start("inspect", _effective_seed(args, cfg),
                                 inputs, cfg.to_dict())

    corpus, _ = _load_training_corpus(args)
    histogram = class_histogram(corpus)
    resolved = resolve(corpus)

    seg_lengths = []
    for doc in corpus.documents:
        for in_title in (True, False):
            seg_lengths.append(len(prepare_segment(doc.segment(in_title),
                                                   cfg.preprocess).tokens))
    distances = []
    dumped: list[dict] = []
    for item in resolved:
        seg = prepare_segment(item.document.segment(item.arg1.in_title),
                              cfg.preprocess)
        try:
            h1 = head_position(seg, item.arg1)
            h2 = head_position(seg, item.arg2)
        except ScirelError:
            continue  # counted by preprocessing reports, not worth failing here
        distances.append(abs(h2 - h1))
        if args.dump_instances:
            rel = item.relation
            dumped.append({"doc_id": item.document.doc_id,
                           "arg1_id": rel.arg1_id, "arg2_id": rel.arg2_id,
                           "label": rel.label,
                           "direction": "REVERSE" if rel.reverse else "FORWARD",
                           "p1": h1, "p2": h2, "tokens": seg.tokens})

    def percentiles(values):
        if not values:
            return {}
        arr = np.asarray(values)
        out = {f"p{q}": float(np.percentile(arr, q)) for q in (50, 75, 90, 95, 99)}
        out["max"] = int(arr.max())
        return out

    stats = {
        "documents": len(corpus.documents),
        "relations": len(corpus.relations),
        "source_tag": corpus.source_tag,
        "class_histogram": histogram,
        "segment_token_lengths": percentiles(seg_lengths),
        "entity_token_distances": percentiles(distances),
    }
    _write_json(manifest.add("stats", out_dir / "inspect_stats.json"), stats)
    if args.dump_instances:
        _write_jsonl(manifest.add("instances", out_dir / "instances.jsonl"),
                     dumped)
    report.save_class_histogram(histogram,
                                manifest.add("class_histogram_figure",
                                             out_dir / "class_histogram.png"))
    report.save_length_histogram(seg_lengths,
                                 manifest.add("length_histogram_figure",
                                              out_dir / "sequence_lengths.png"),
                                 title="Segment token lengths")
    manifest.write(out_dir)

    _log(f"documents:  {stats['documents']}")
    _log(f"relations:  {stats['relations']}")
    _log("class histogram:")
    for label in LABELS:
        _log(f"  {label:<12} {histogram[label]}")
    if seg_lengths:
        p = stats["segment_token_lengths"]
        _log(f"segment tokens: median {p['p50']:.0f}, p95 {p['p95']:.0f}, "
             f"max {p['max']}")
    if distances:
        p = stats["entity_token_distances"]
        _log(f"entity distance: median {p['p50']:.0f}, p95 {p['p95']:.0f}, "
             f"max {p['max']}")
    _log(f"artifacts in {out_dir}")
    return EXIT_OK


def _load_word_table(args):
    if args.vocab_limit is not None and args.vocab_limit <= 0:
        raise ConfigError(f"--vocab-limit must be positive, got {args.vocab_limit}")
    return load_pretrained(args.embeddings, vocab_limit=args.vocab_limit)


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = _effective_seed(args, cfg)
    out_dir = _out_dir(args)

    named = [("train_text", args.train_text),
             ("train_relations", args.train_relations),
             ("embeddings", args.embeddings)]
    for i, (t, r) in enumerate(_augment_pairs(args)):
        named += [(f"augment_text_{i}", t), (f"augment_relations_{i}", r)]
    if bool(args.val_text) != bool(args.val_relations):
        raise ConfigError("--val-text and --val-relations must be given together")
    if args.val_text:
        named += [("val_text", args.val_text), ("val_relations", args.val_relations)]
    inputs = _digest_inputs(named)

    corpus, augmented = _load_training_corpus(args)
    vocab, word_table = _load_word_table(args)
    tc = replace(cfg.train, seed=seed, augment=augmented)
    mcfg = derive_model_config(cfg.model, tc)
    pre_cfg = replace(cfg.preprocess, max_seq_len=tc.max_seq_len)
    manifest = RunManifest.start("train", seed, inputs, cfg.to_dict())
    manifest.config["train"] = asdict(tc)

    instances, skipped = _build_dataset(corpus, vocab, pre_cfg,
                                        require_labels=True)
    if skipped:
        _warn(f"{len(skipped)} of {len(corpus.relations)} relations could not "
              f"be encoded and will not be trained on")
    params, log = train(instances, tc, mcfg, word_table, vocab.pad_id)

    save_model(manifest.add("checkpoint", out_dir / "model.ckpt"),
               params, mcfg, vocab, pre_cfg)
    _write_jsonl(manifest.add("training_log", out_dir / "training_log.jsonl"),
                 [{"epoch": i + 1, "mean_loss": loss}
                  for i, loss in enumerate(log.epoch_losses)])
    report.save_loss_curve(log.epoch_losses,
                           manifest.add("loss_curve_figure",
                                        out_dir / "loss_curve.png"))

    metrics = {"n_train": len(instances), "n_skipped_train": len(skipped),
               "epochs": tc.epochs, "final_train_loss": log.final_loss,
               "seed": seed, "augmented": augmented}
    if args.val_text:
        val_corpus = load_corpus(args.val_text, args.val_relations,
                                 source_tag=Path(args.val_text).stem)
        val_instances, val_skipped = _build_dataset(val_corpus, vocab, pre_cfg,
                                                    require_labels=True)
        extra_gold = tuple(sk.relation.label for sk in val_skipped)
        val_f1 = validation_macro_f1(val_instances, params, mcfg,
                                     extra_gold=extra_gold)
        metrics.update(n_val=len(val_instances) + len(val_skipped),
                       n_skipped_val=len(val_skipped), val_macro_f1=val_f1)
        _log(f"validation macro-F1: {val_f1:.4f}")
    _write_json(manifest.add("metrics", out_dir / "metrics.json"), metrics)
    manifest.write(out_dir)
    _log(f"trained {tc.epochs} epochs on {len(instances)} instances "
         f"(final loss {log.final_loss:.4f})")
    _log(f"artifacts in {out_dir}")
    return EXIT_OK


def cmd_grid(args) -> int:
    cfg = load_config(args.config)
    seed = _effective_seed(args, cfg)
    out_dir = _out_dir(args)
    if not (args.val_text and args.val_relations):
        raise ConfigError("grid search needs --val-text and --val-relations "
                          "(the held-out split that selects the winner)")

    named = [("train_text", args.train_text),
             ("train_relations", args.train_relations),
             ("embeddings", args.embeddings),
             ("val_text", args.val_text),
             ("val_relations", args.val_relations)]
    for i, (t, r) in enumerate(_augment_pairs(args)):
        named += [(f"augment_text_{i}", t), (f"augment_relations_{i}", r)]
    inputs = _digest_inputs(named)
    manifest = RunManifest.start("grid", seed, inputs, cfg.to_dict())

    corpus, augmented = _load_training_corpus(args)
    val_corpus = load_corpus(args.val_text, args.val_relations,
                             source_tag=Path(args.val_text).stem)
    vocab, word_table = _load_word_table(args)

    datasets = {}
    for seq_len in cfg.grid.max_seq_lens:
        pre_cfg = replace(cfg.preprocess, max_seq_len=seq_len)
        train_insts, train_skipped = _build_dataset(corpus, vocab, pre_cfg,
                                                    require_labels=True)
        val_insts, val_skipped = _build_dataset(val_corpus, vocab, pre_cfg,
                                                require_labels=True)
        if train_skipped:
            _warn(f"seq_len {seq_len}: {len(train_skipped)} training relations "
                  f"not encodable")
        datasets[seq_len] = TrialData(
            train_set=tuple(train_insts), val_set=tuple(val_insts),
            val_extra_gold=tuple(sk.relation.label for sk in val_skipped))

    total = cfg.grid.size

    def progress(result):
        c = result.config
        print(f"trial {result.trial_index + 1:>3}/{total}: epochs={c.epochs} "
              f"seq={c.max_seq_len} batch={c.batch_size} filters={c.n_filters} "
              f"lr={c.learning_rate:g} -> macro-F1 {result.macro_f1:.4f}",
              file=sys.stderr)

    best, trials = grid_search(datasets, cfg.grid, cfg.model, word_table,
                               vocab.pad_id, seed, augment=augmented,
                               parallel=args.parallel, on_result=progress)

    write_trial_log(trials, manifest.add("trials", out_dir / "grid_trials.jsonl"))
    summary = format_grid_summary(trials)
    with open(manifest.add("summary", out_dir / "grid_summary.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(summary + "\n")
    report.save_grid_results([t.record() for t in trials],
                             manifest.add("trials_figure",
                                          out_dir / "grid_results.png"))

    # final fit on train + validation with the winning config
    best_data = datasets[best.config.max_seq_len]
    full = list(best_data.train_set) + list(best_data.val_set)
    params, fit_log = final_fit(full, best.config, cfg.model, word_table,
                                vocab.pad_id)
    final_pre_cfg = replace(cfg.preprocess, max_seq_len=best.config.max_seq_len)
    save_model(manifest.add("checkpoint", out_dir / "model.ckpt"), params,
               derive_model_config(cfg.model, best.config), vocab, final_pre_cfg)
    report.save_loss_curve(fit_log.epoch_losses,
                           manifest.add("final_fit_loss_figure",
                                        out_dir / "final_fit_loss.png"),
                           title="Final fit loss")

    metrics = {"n_trials": len(trials), "best": best.record(),
               "final_fit_instances": len(full),
               "final_fit_loss": fit_log.final_loss, "seed": seed}
    _write_json(manifest.add("metrics", out_dir / "metrics.json"), metrics)
    manifest.write(out_dir)

    _log(summary)
    c = best.config
    _log(f"best trial {best.trial_index}: epochs={c.epochs} "
         f"seq={c.max_seq_len} batch={c.batch_size} filters={c.n_filters} "
         f"lr={c.learning_rate:g} macro-F1={best.macro_f1:.4f}")
    _log(f"artifacts in {out_dir}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg_unused = args.config  # predict is fully described by its checkpoint
    if cfg_unused:
        _warn("--config is ignored by predict; the checkpoint carries its "
              "own configuration")
    out_dir = _out_dir(args)
    inputs = _digest_inputs([("checkpoint", args.checkpoint),
                             ("text", args.text),
                             ("relations", args.relations)])
    params, mcfg, vocab, pre_cfg = load_model(args.checkpoint)
    manifest = RunManifest.start(
        "predict", args.seed if args.seed is not None else 0, inputs,
        {"model": asdict(mcfg), "preprocess": asdict(pre_cfg)})

    corpus = load_corpus(args.text, args.relations,
                         source_tag=Path(args.text).stem)
    instances, skipped = _build_dataset(corpus, vocab, pre_cfg,
                                        require_labels=False)
    if skipped:
        _warn(f"{len(skipped)} relations fall back to label {FALLBACK_LABEL}")
    records = _in_corpus_order(
        corpus, _predicted_records(instances, skipped, params, mcfg))
    write_prediction_file(records,
                          manifest.add("predictions", out_dir / "predictions.txt"))
    manifest.write(out_dir)
    _log(f"wrote {len(records)} predictions to {out_dir / 'predictions.txt'}")
    return EXIT_OK


def _aligned_labels(gold: list[RelationRecord], pred: list[RelationRecord]
                    ) -> tuple[list[str], list[str]]:
    """Pair gold and predicted labels by (arg1, arg2, reverse) key."""
    def keyed(records):
        return sorted(records, key=lambda r: (r.arg1_id, r.arg2_id, r.reverse,
                                              r.label))

    gold_sorted, pred_sorted = keyed(gold), keyed(pred)
    gold_keys = [(r.arg1_id, r.arg2_id, r.reverse) for r in gold_sorted]
    pred_keys = [(r.arg1_id, r.arg2_id, r.reverse) for r in pred_sorted]
    if gold_keys != pred_keys:
        missing = [k for k in gold_keys if k not in set(pred_keys)][:5]
        extra = [k for k in pred_keys if k not in set(gold_keys)][:5]
        raise DataError(
            f"gold and predictions cover different relation pairs; "
            f"missing from predictions: {missing}; unexpected: {extra}")
    return [r.label for r in gold_sorted], [r.label for r in pred_sorted]


def cmd_evaluate(args) -> int:
    out_dir = _out_dir(args)
    inputs = _digest_inputs([("gold", args.gold), ("predictions", args.pred)])
    manifest = RunManifest.start("evaluate",
                                 args.seed if args.seed is not None else 0,
                                 inputs, {"macro_over": args.macro_over})
    with open(args.gold, encoding="utf-8") as fh:
        gold_records = parse_relations(fh.read())
    with open(args.pred, encoding="utf-8") as fh:
        pred_records = parse_relations(fh.read())
    gold_labels, pred_labels = _aligned_labels(gold_records, pred_records)
    rep = score(gold_labels, pred_labels, macro_over=args.macro_over)

    _write_json(manifest.add("score_report", out_dir / "score_report.json"),
                rep.to_dict())
    table = format_score_report(rep)
    with open(manifest.add("score_table", out_dir / "scores.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(table + "\n")
    report.save_confusion_matrix(rep.confusion, rep.labels,
                                 manifest.add("confusion_figure",
                                              out_dir / "confusion_matrix.png"))
    manifest.write(out_dir)

    _log(table)
    if args.task and args.data:
        _log("")
        _log(report_table([{"task": args.task, "data": args.data,
                            "macro_f1": rep.macro_f1}]))
    return EXIT_OK


# --- parser ---------------------------------------------------------------------

def _add_common(sp) -> None:
    sp.add_argument("--config", help="JSON config file "
                    "(sections: preprocess, model, train, grid)")
    sp.add_argument("--seed", type=int, default=None,
                    help="manifest seed; overrides the config file")
    sp.add_argument("--out-dir", default="scirel-out",
                    help="directory for artifacts (default: %(default)s)")


def _add_corpus_flags(sp) -> None:
    sp.add_argument("--train-text", required=True,
                    help="entity-annotated abstracts file")
    sp.add_argument("--train-relations", required=True,
                    help="gold relations file")
    sp.add_argument("--augment-text", action="append", metavar="PATH",
                    help="abstracts of a corpus to merge in (repeatable, "
                    "pairs with --augment-relations)")
    sp.add_argument("--augment-relations", action="append", metavar="PATH",
                    help="relations of a corpus to merge in (repeatable)")


def _add_val_flags(sp) -> None:
    sp.add_argument("--val-text", help="validation abstracts file")
    sp.add_argument("--val-relations", help="validation relations file")


def _add_embedding_flags(sp) -> None:
    sp.add_argument("--embeddings", required=True,
                    help="pretrained word vectors (word2vec text format)")
    sp.add_argument("--vocab-limit", type=int, default=None,
                    help="keep only the first N file vectors to bound memory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scirel",
                     description="Relation classification for scientific "
                                 "abstracts with a piecewise CNN.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("inspect", help="corpus statistics and figures")
    _add_corpus_flags(p)
    p.add_argument("--dump-instances", action="store_true",
                   help="also write one structured record per relation "
                        "(tokens, head positions, direction, label)")
    _add_common(p)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("train", help="train one model")
    _add_corpus_flags(p)
    _add_val_flags(p)
    _add_embedding_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="hyperparameter grid search")
    _add_corpus_flags(p)
    _add_val_flags(p)
    _add_embedding_flags(p)
    p.add_argument("--parallel", type=int,
                   default=int(os.environ.get("SCIREL_PARALLEL", "1")),
                   help="worker processes for trials (default: "
                        "$SCIREL_PARALLEL or 1)")
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("predict", help="label relation pairs with a checkpoint")
    p.add_argument("--checkpoint", required=True, help="trained model file")
    p.add_argument("--text", required=True, help="entity-annotated abstracts")
    p.add_argument("--relations", required=True,
                   help="relation pairs to label (labels in the file are "
                        "ignored; any valid label works as a placeholder)")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--gold", required=True, help="gold relations file")
    p.add_argument("--pred", required=True, help="predicted relations file")
    p.add_argument("--macro-over", choices=("all", "present"), default="all",
                   help="average F1 over all 6 classes or only those present "
                        "in gold (default: %(default)s)")
    p.add_argument("--task", help="task id for the reference table (e.g. 1.2)")
    p.add_argument("--data", help="data condition for the reference table "
                        "(e.g. 1.1+1.2)")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ScirelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
