"""Confusion counts, accuracy, per-category recall, comparison tables.

Caution: the positive class here is Normal traffic (label 0), not
Attack. Most intrusion-detection literature does it the other way
around; the counts below keep the Normal-positive reading, so tp is
"normal predicted normal" and tn is "attack predicted attack".
Accuracy is unaffected by the choice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import Category
from .errors import EmptyEvaluation, LengthMismatch, MixedFeatureModes

# Render order of the standard comparison rows.
STANDARD_ROW_ORDER = (
    "decision_tree",
    "extra_tree",
    "extra_trees_ensemble",
    "gbdt",
    "dnn",
    "pca_dnn",
)

ALGORITHM_LABELS = {
    "decision_tree": "Decision Tree",
    "extra_tree": "Extra Tree",
    "extra_trees_ensemble": "Ensemble Extra Tree",
    "gbdt": "Gradient Boosted Trees",
    "dnn": "Deep Neural Network",
    "pca_dnn": "PCA + Deep Neural Network",
}


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts with Normal as the positive class."""

    tp: int  # normal classified normal
    tn: int  # attack classified attack
    fp: int  # normal misclassified as attack
    fn: int  # attack misclassified as normal

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _as_binary(v, name: str) -> np.ndarray:
    arr = np.asarray(v)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(np.int64)


def confusion(pred, truth) -> ConfusionCounts:
    """Count agreement cells; 0 = Normal (positive), 1 = Attack."""
    p = _as_binary(pred, "pred")
    t = _as_binary(truth, "truth")
    if len(p) != len(t):
        raise LengthMismatch(f"pred has {len(p)} entries, truth has {len(t)}")
    return ConfusionCounts(
        tp=int(np.sum((t == 0) & (p == 0))),
        tn=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def accuracy(c: ConfusionCounts) -> float:
    """(tp + tn) / total."""
    if c.total == 0:
        raise EmptyEvaluation("no records evaluated")
    return (c.tp + c.tn) / c.total


def per_category_recall(pred, truth_categories) -> dict[Category, float]:
    """Fraction of each category's records classified on its own side.

    Attack categories report the fraction predicted Attack; Normal
    reports the fraction predicted Normal. Absent categories are
    omitted from the result.
    """
    p = _as_binary(pred, "pred")
    cats = np.asarray([
        c.value if isinstance(c, Category) else str(c)
        for c in truth_categories
    ])
    if len(p) != len(cats):
        raise LengthMismatch(
            f"pred has {len(p)} entries, categories has {len(cats)}")
    out: dict[Category, float] = {}
    for cat in Category:
        mask = cats == cat.value
        n = int(mask.sum())
        if n == 0:
            continue
        if cat is Category.NORMAL:
            hit = int(np.sum(p[mask] == 0))
        else:
            hit = int(np.sum(p[mask] == 1))
        out[cat] = hit / n
    return out


@dataclass
class EvalReport:
    """One comparison-table row plus its supporting counts."""

    model_name: str
    feature_mode: str                       # "full" | "sdn"
    train_accuracy: float | None = None
    validation_accuracy: float | None = None
    test_accuracy: float | None = None
    confusion_counts: dict[str, ConfusionCounts] = field(default_factory=dict)
    category_recall: dict[Category, float] = field(default_factory=dict)
    failed: bool = False

    def __post_init__(self):
        stored = {"train": self.train_accuracy,
                  "validation": self.validation_accuracy,
                  "test": self.test_accuracy}
        for split, counts in self.confusion_counts.items():
            acc = stored.get(split)
            if acc is not None and abs(acc - accuracy(counts)) > 1e-12:
                raise ValueError(
                    f"{split} accuracy inconsistent with confusion counts")

    @property
    def algorithm_label(self) -> str:
        return ALGORITHM_LABELS.get(self.model_name, self.model_name)


@dataclass
class ComparisonTable:
    rows: list[EvalReport]

    def __post_init__(self):
        modes = {r.feature_mode for r in self.rows}
        if len(modes) > 1:
            raise MixedFeatureModes(f"rows mix feature modes {sorted(modes)}")


def _cell(value: float | None, failed: bool, precision: int | None) -> str:
    if failed:
        return "failed"
    if value is None:
        return ""
    if precision is None:
        return repr(value)
    return f"{value:.{precision}f}"


def render_comparison(rows: list[EvalReport], format: str = "text") -> str:
    """Render rows as a text table, csv, or json document.

    Text shows accuracies to 3 decimal places; csv and json keep full
    precision. Rows must share one feature mode.
    """
    if not rows:
        raise ValueError("no rows to render")
    ComparisonTable(list(rows))  # validates homogeneous feature mode
    header = ("Algorithm", "Train Accuracy", "Validation Accuracy",
              "Test Accuracy")
    if format == "text":
        body = [
            (r.algorithm_label,
             _cell(r.train_accuracy, r.failed, 3),
             _cell(r.validation_accuracy, r.failed, 3),
             _cell(r.test_accuracy, r.failed, 3))
            for r in rows
        ]
        widths = [max(len(row[i]) for row in [header, *body])
                  for i in range(4)]
        lines = []
        for row in [header, *body]:
            cells = [row[0].ljust(widths[0])]
            cells += [row[i].rjust(widths[i]) for i in range(1, 4)]
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines) + "\n"
    if format == "csv":
        lines = ["algorithm,feature_mode,train_accuracy,validation_accuracy,"
                 "test_accuracy"]
        for r in rows:
            lines.append(",".join((
                r.algorithm_label,
                r.feature_mode,
                _cell(r.train_accuracy, r.failed, None),
                _cell(r.validation_accuracy, r.failed, None),
                _cell(r.test_accuracy, r.failed, None),
            )))
        return "\n".join(lines) + "\n"
    if format == "json":
        doc = [
            {
                "algorithm": r.algorithm_label,
                "feature_mode": r.feature_mode,
                "train_accuracy": None if r.failed else r.train_accuracy,
                "validation_accuracy": None if r.failed else r.validation_accuracy,
                "test_accuracy": None if r.failed else r.test_accuracy,
            }
            for r in rows
        ]
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown format {format!r}")
