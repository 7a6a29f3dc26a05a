"""Command-line front end.

Subcommands: stats, train, evaluate, compare, score. Configuration can
come from a JSON file (--config) with the ExperimentConfig field names;
command-line flags override file values. Exit codes: 0 success, 2
input/data error, 3 training divergence. NIDB_THREADS caps the worker
pool cmd_compare may use (default: sequential).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from pathlib import Path

from . import modelstore
from .dataset import (
    Category,
    LabeledDataset,
    builtin_schema,
    count_by_category,
    default_taxonomy,
    load_dataset,
    parse_dataset,
    sdn_schema,
)
from .errors import NidbError, NonFiniteLoss
from .evaluation import EvalReport, render_comparison
from .experiment import (
    ExperimentConfig,
    artifact_predict_proba,
    comparison_kinds,
    evaluate_artifact,
    load_experiment_dataset,
    run_comparison_row,
    train_single,
)
from .preprocess import SplitSpec, stratified_split

_STATS_ORDER = (Category.NORMAL, Category.DOS, Category.U2R,
                Category.R2L, Category.PROBE)


def _print_err(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# config assembly

_FLAG_TO_FIELD = {
    "train": "train_path",
    "test": "test_path",
    "mode": "feature_mode",
    "kind": "model_kind",
    "pca_components": "pca_components",
    "validation_fraction": "validation_fraction",
    "seed": "seed",
    "n_trees": "n_trees",
}

_FLAG_TO_NEURAL = {
    "epochs": "max_epochs",
    "batch_size": "batch_size",
    "learning_rate": "learning_rate",
    "patience": "early_stop_patience",
    "optimizer": "optimizer",
}

_FLAG_TO_GBDT = {
    "rounds": "rounds",
    "shrinkage": "shrinkage",
}


def _config_from_args(args) -> ExperimentConfig:
    doc: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    for flag, fieldname in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            doc[fieldname] = value
    neural_doc = dict(doc.get("neural", {}))
    for flag, fieldname in _FLAG_TO_NEURAL.items():
        value = getattr(args, flag, None)
        if value is not None:
            neural_doc[fieldname] = value
    if getattr(args, "hidden_widths", None):
        neural_doc["hidden_widths"] = [
            int(w) for w in args.hidden_widths.split(",")]
    if neural_doc:
        doc["neural"] = neural_doc
    gbdt_doc = dict(doc.get("gbdt", {}))
    for flag, fieldname in _FLAG_TO_GBDT.items():
        value = getattr(args, flag, None)
        if value is not None:
            gbdt_doc[fieldname] = value
    if gbdt_doc:
        doc["gbdt"] = gbdt_doc
    trees_doc = dict(doc.get("trees", {}))
    if getattr(args, "max_depth", None) is not None:
        trees_doc["max_depth"] = args.max_depth
    if trees_doc:
        doc["trees"] = trees_doc
    return ExperimentConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# stats

def _format_count_table(
    counts_train: dict[Category, int], counts_test: dict[Category, int]
) -> str:
    rows = [("Traffic", "Train", "Test")]
    categories = list(_STATS_ORDER)
    if counts_train[Category.UNKNOWN] or counts_test[Category.UNKNOWN]:
        categories.append(Category.UNKNOWN)
    for cat in categories:
        rows.append((cat.value,
                     f"{counts_train[cat]:,}",
                     f"{counts_test[cat]:,}"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for r in rows:
        lines.append("  ".join((r[0].ljust(widths[0]),
                                r[1].rjust(widths[1]),
                                r[2].rjust(widths[2]))).rstrip())
    return "\n".join(lines) + "\n"


def cmd_stats(args) -> int:
    taxonomy = default_taxonomy()
    counts = []
    for path in (args.train, args.test):
        ds = load_dataset(path)
        counts.append(count_by_category(ds, taxonomy))
    sys.stdout.write(_format_count_table(*counts))
    return 0


# ---------------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.train_path:
        _print_err("train: no training file given (--train or config)")
        return 2
    out_path = args.out or "model.nidb"
    trained = train_single(cfg)
    modelstore.save(trained.artifact, out_path)
    r = trained.report
    sys.stdout.write(
        f"model: {r.model_name}\n"
        f"feature mode: {r.feature_mode}\n"
        f"train accuracy: {r.train_accuracy:.6f}\n"
        f"validation accuracy: {r.validation_accuracy:.6f}\n"
        f"artifact: {out_path}\n")
    return 0


# ---------------------------------------------------------------------------
# evaluate

def _sniff_dataset(path: str) -> LabeledDataset:
    """Parse a labeled file, full or SDN-restricted layout by field count."""
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        first = ""
        for line in fh:
            if line.strip():
                first = line
                break
    n_fields = len(first.split(",")) if first.strip() else 0
    schema = builtin_schema()
    if n_fields in (len(sdn_schema()) + 1, len(sdn_schema()) + 2):
        schema = sdn_schema()
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        return parse_dataset(fh, schema, source=path)


def _render_eval_report(report: EvalReport, fmt: str) -> str:
    c = report.confusion_counts["test"]
    recall = {cat.value: report.category_recall[cat]
              for cat in Category if cat in report.category_recall}
    if fmt == "json":
        doc = {
            "algorithm": report.algorithm_label,
            "feature_mode": report.feature_mode,
            "test_accuracy": report.test_accuracy,
            "confusion": {"tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn},
            "category_recall": recall,
        }
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        lines = ["metric,value",
                 f"algorithm,{report.algorithm_label}",
                 f"feature_mode,{report.feature_mode}",
                 f"test_accuracy,{report.test_accuracy!r}",
                 f"confusion_tp,{c.tp}", f"confusion_tn,{c.tn}",
                 f"confusion_fp,{c.fp}", f"confusion_fn,{c.fn}"]
        lines += [f"recall_{name},{value!r}" for name, value in recall.items()]
        return "\n".join(lines) + "\n"
    lines = [
        f"model: {report.model_name}",
        f"feature mode: {report.feature_mode}",
        f"test accuracy: {report.test_accuracy:.6f}",
        f"confusion (Normal positive): tp={c.tp} tn={c.tn} fp={c.fp} fn={c.fn}",
        "per-category recall:",
    ]
    lines += [f"  {name}: {value:.6f}" for name, value in recall.items()]
    return "\n".join(lines) + "\n"


def cmd_evaluate(args) -> int:
    artifact = modelstore.load(args.artifact)
    expected_mode = args.mode or "full"
    if artifact.feature_mode != expected_mode:
        _print_err(
            f"evaluate: schema fingerprint mismatch: artifact is "
            f"{artifact.feature_mode}-mode, expected {expected_mode} "
            f"(pass --mode {artifact.feature_mode} to evaluate it)")
        return 2
    test_ds = _sniff_dataset(args.test)
    report = evaluate_artifact(artifact, test_ds)
    sys.stdout.write(_render_eval_report(report, args.format or "text"))
    return 0


# ---------------------------------------------------------------------------
# compare

def _worker_count() -> int:
    raw = os.environ.get("NIDB_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            _print_err(f"ignoring invalid NIDB_THREADS={raw!r}")
    return 1


def _compare_row_worker(cfg_doc: dict, kind: str):
    """Self-contained row job for the process pool."""
    cfg = ExperimentConfig.from_dict(cfg_doc)
    test_ds = load_dataset(cfg.test_path)
    return run_comparison_row(cfg, kind, None, test_ds)


def cmd_compare(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.train_path or not cfg.test_path:
        _print_err("compare: both train and test files are required")
        return 2
    kinds = comparison_kinds(cfg.feature_mode)
    workers = min(_worker_count(), len(kinds))
    rows: list[EvalReport] = []
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_compare_row_worker, cfg.to_dict(), kind)
                       for kind in kinds]
            for kind, fut in zip(kinds, futures):
                try:
                    rows.append(fut.result())
                except Exception as exc:
                    _print_err(f"compare: {kind} failed: {exc}")
                    rows.append(EvalReport(kind, cfg.feature_mode, failed=True))
    else:
        ds = load_experiment_dataset(cfg)
        split = stratified_split(
            ds, SplitSpec(cfg.validation_fraction, cfg.seed))
        test_ds = load_dataset(cfg.test_path)
        for kind in kinds:
            try:
                rows.append(run_comparison_row(cfg, kind, split, test_ds))
            except Exception as exc:
                _print_err(f"compare: {kind} failed: {exc}")
                rows.append(EvalReport(kind, cfg.feature_mode, failed=True))
    table = render_comparison(rows, args.format or "text")
    sys.stdout.write(table)
    csv_path = args.out or f"comparison_{cfg.feature_mode}.csv"
    Path(csv_path).write_text(render_comparison(rows, "csv"),
                              encoding="utf-8")
    _print_err(f"compare: wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# score

def cmd_score(args) -> int:
    artifact = modelstore.load(args.artifact)
    schema = artifact.encoding.schema
    expected = len(schema)
    numeric_positions = [f.position for f in schema.features
                         if f.kind == "numeric"]
    if args.input == "-":
        lines = sys.stdin.readlines()
    else:
        with open(args.input, "r", encoding="utf-8", newline=None) as fh:
            lines = fh.readlines()
    keep: list[tuple[int, tuple[str, ...]]] = []
    for line_no, line in enumerate(lines, start=1):
        fields = line.strip().split(",") if line.strip() else []
        if len(fields) != expected:
            _print_err(f"line {line_no}: expected {expected} fields, "
                       f"got {len(fields)}; skipped")
            continue
        bad = None
        for pos in numeric_positions:
            try:
                float(fields[pos])
            except ValueError:
                bad = (schema.features[pos].name, fields[pos])
                break
        if bad is not None:
            _print_err(f"line {line_no}: column {bad[0]!r} not numeric: "
                       f"{bad[1]!r}; skipped")
            continue
        keep.append((line_no, tuple(fields)))
    if not keep:
        _print_err("score: no well-formed records in input")
        return 2
    proba = artifact_predict_proba(artifact, [row for _, row in keep])
    for (line_no, _), p in zip(keep, proba):
        verdict = "attack" if p >= 0.5 else "normal"
        sys.stdout.write(f"{line_no},{verdict},{float(p)!r}\n")
    return 0


# ---------------------------------------------------------------------------
# entry points

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="experiment seed (default 42)")
    common.add_argument("--config", default=None,
                        help="JSON config file; flags override its values")
    common.add_argument("--format", choices=("text", "csv", "json"),
                        default=None, help="output format (default text)")
    common.add_argument("--out", default=None, help="output path")

    experiment_flags = argparse.ArgumentParser(add_help=False)
    experiment_flags.add_argument("--train", help="training dataset file")
    experiment_flags.add_argument("--test", help="test dataset file")
    experiment_flags.add_argument("--mode", choices=("full", "sdn"),
                                  default=None, help="feature mode")
    experiment_flags.add_argument("--pca-components", type=int,
                                  dest="pca_components")
    experiment_flags.add_argument("--validation-fraction", type=float,
                                  dest="validation_fraction")
    experiment_flags.add_argument("--epochs", type=int)
    experiment_flags.add_argument("--batch-size", type=int, dest="batch_size")
    experiment_flags.add_argument("--learning-rate", type=float,
                                  dest="learning_rate")
    experiment_flags.add_argument("--patience", type=int)
    experiment_flags.add_argument("--optimizer", choices=("adam", "sgd"))
    experiment_flags.add_argument("--hidden-widths", dest="hidden_widths",
                                  help="comma-separated hidden layer widths")
    experiment_flags.add_argument("--n-trees", type=int, dest="n_trees")
    experiment_flags.add_argument("--rounds", type=int)
    experiment_flags.add_argument("--shrinkage", type=float)
    experiment_flags.add_argument("--max-depth", type=int, dest="max_depth")

    parser = argparse.ArgumentParser(
        prog="nidb",
        description="Binary intrusion detection experiments on NSL-KDD")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common],
                       help="per-category record counts of train/test files")
    p.add_argument("train")
    p.add_argument("test")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", parents=[common, experiment_flags],
                       help="train one model and write its artifact")
    p.add_argument("--kind", choices=modelstore.MODEL_KINDS, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="evaluate an artifact on a labeled test file")
    p.add_argument("artifact")
    p.add_argument("test")
    p.add_argument("--mode", choices=("full", "sdn"), default=None,
                   help="expected feature mode of the artifact (default full)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", parents=[common, experiment_flags],
                       help="train and evaluate the standard comparison rows")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("score", parents=[common],
                       help="classify unlabeled records (41 or 6 fields)")
    p.add_argument("artifact")
    p.add_argument("input", help="records file, or - for stdin")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        _print_err(f"{args.command}: training diverged: {exc}")
        return 3
    except NidbError as exc:
        _print_err(f"{args.command}: {exc}")
        return 2
    except OSError as exc:
        _print_err(f"{args.command}: {exc}")
        return 2
    except json.JSONDecodeError as exc:
        _print_err(f"{args.command}: bad config file: {exc}")
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
