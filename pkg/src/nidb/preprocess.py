"""Encoding, scaling, SDN feature subsetting, and stratified splitting.

Two preprocessing profiles are used downstream: the network models
consume one-hot encoded, min-max scaled matrices; the tree models
consume ordinal-encoded, unscaled matrices (splits are threshold-based
and scale-invariant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import (
    AttackTaxonomy,
    FeatureDescriptor,
    FeatureSchema,
    LabeledDataset,
    SDN_FEATURES,
    binarize,
    default_taxonomy,
)
from .errors import (
    DimensionMismatch,
    EmptyInput,
    NumericParseError,
    SchemaMismatch,
    StratumTooSmall,
)

_MASK64 = (1 << 64) - 1


def _rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic generator for a seed plus a derivation path."""
    return np.random.default_rng((seed & _MASK64, *stream))


@dataclass(frozen=True)
class DesignMatrix:
    """Dense numeric matrix with column provenance and aligned labels.

    `labels` is the binary target (0 normal, 1 attack); `categories`
    keeps the broad traffic category of each row for diagnostics.
    """

    values: np.ndarray            # (n, d) float64
    column_names: tuple[str, ...]
    labels: np.ndarray            # (n,) int
    categories: np.ndarray        # (n,) unicode Category values

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")
        n, d = self.values.shape
        if len(self.column_names) != d:
            raise ValueError("column_names length must match width")
        if len(self.labels) != n or len(self.categories) != n:
            raise ValueError("labels/categories must align with rows")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("design matrix contains NaN or Inf")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EncodingPlan:
    """Learned categorical encoding, fit on training data only.

    Vocabularies hold the lexicographically sorted category strings
    observed per nominal feature at fit time.
    """

    mode: str                                  # "onehot" | "ordinal"
    schema: FeatureSchema
    vocabularies: dict[str, tuple[str, ...]]   # nominal feature -> categories
    column_names: tuple[str, ...]


@dataclass(frozen=True)
class ScalingParams:
    """Per-column train min/max for [0,1] min-max scaling."""

    mins: np.ndarray
    maxs: np.ndarray


@dataclass(frozen=True)
class SplitSpec:
    validation_fraction: float
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")


def fit_encoding(train: LabeledDataset, mode: str) -> EncodingPlan:
    """Learn nominal vocabularies and the output column layout."""
    if mode not in ("onehot", "ordinal"):
        raise ValueError(f"unknown encoding mode {mode!r}")
    if len(train) == 0:
        raise EmptyInput("cannot fit encoding on an empty dataset")
    vocabularies: dict[str, tuple[str, ...]] = {}
    for pos in train.schema.nominal_positions:
        name = train.schema.features[pos].name
        observed = {r.values[pos] for r in train.records}
        vocabularies[name] = tuple(sorted(observed))
    column_names: list[str] = []
    for feat in train.schema.features:
        if feat.kind == "nominal" and mode == "onehot":
            column_names.extend(
                f"{feat.name}={cat}" for cat in vocabularies[feat.name])
        else:
            column_names.append(feat.name)
    return EncodingPlan(mode, train.schema, vocabularies, tuple(column_names))


def encode_feature_rows(
    rows: list[tuple[str, ...]], plan: EncodingPlan
) -> np.ndarray:
    """Encode raw string rows into the plan's numeric column layout.

    One-hot: a category unseen at fit time leaves its indicator block
    all-zero. Ordinal: unseen categories code as -1.
    """
    n = len(rows)
    blocks: list[np.ndarray] = []
    columns = list(zip(*rows)) if n else [()] * len(plan.schema)
    for feat in plan.schema.features:
        col = columns[feat.position]
        if feat.kind == "numeric":
            raw = np.asarray(col, dtype=object)
            try:
                block = raw.astype(np.float64).reshape(n, 1)
            except (ValueError, TypeError):
                for row_idx, text in enumerate(col):
                    try:
                        float(text)
                    except ValueError:
                        raise NumericParseError(row_idx, feat.name, text)
                raise
        else:
            vocab = plan.vocabularies[feat.name]
            code_of = {cat: i for i, cat in enumerate(vocab)}
            codes = np.fromiter(
                (code_of.get(v, -1) for v in col), dtype=np.int64, count=n)
            if plan.mode == "onehot":
                block = np.zeros((n, len(vocab)), dtype=np.float64)
                seen = codes >= 0
                block[np.nonzero(seen)[0], codes[seen]] = 1.0
            else:
                block = codes.astype(np.float64).reshape(n, 1)
        blocks.append(block)
    if not blocks:
        return np.zeros((n, 0), dtype=np.float64)
    return np.hstack(blocks)


def apply_encoding(
    ds: LabeledDataset,
    plan: EncodingPlan,
    taxonomy: AttackTaxonomy | None = None,
) -> DesignMatrix:
    """Encode a dataset against a fitted plan."""
    if ds.schema.names != plan.schema.names:
        raise SchemaMismatch("dataset schema differs from the plan's")
    if taxonomy is None:
        taxonomy = default_taxonomy()
    values = encode_feature_rows([r.values for r in ds.records], plan)
    labels = np.fromiter((binarize(r.label) for r in ds.records),
                         dtype=np.int64, count=len(ds))
    categories = np.array(
        [taxonomy.category_of(r.label).value for r in ds.records], dtype="U13")
    return DesignMatrix(values, plan.column_names, labels, categories)


def design_matrix_from_arrays(X, y) -> DesignMatrix:
    """Wrap plain arrays as a DesignMatrix (columns named x1..xd).

    Rows with label 0 are tagged Normal, label 1 rows UnknownAttack;
    handy for synthetic data in tests and demos.
    """
    values = np.asarray(X, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("X must be 2-D")
    labels = np.asarray(y, dtype=np.int64)
    names = tuple(f"x{i + 1}" for i in range(values.shape[1]))
    categories = np.where(labels == 0, "Normal", "UnknownAttack").astype("U13")
    return DesignMatrix(values, names, labels, categories)


def fit_scaler(train: DesignMatrix) -> ScalingParams:
    """Column min/max from the training matrix."""
    return ScalingParams(train.values.min(axis=0), train.values.max(axis=0))


def scale_array(values: np.ndarray, params: ScalingParams) -> np.ndarray:
    """Array-level min-max scaling; see apply_scaler for the rules."""
    if values.shape[1] != len(params.mins):
        raise DimensionMismatch(
            f"matrix has {values.shape[1]} columns, "
            f"scaler has {len(params.mins)}")
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    scaled = (values - params.mins) / safe
    scaled[:, span == 0] = 0.0
    return np.clip(scaled, 0.0, 1.0)


def apply_scaler(m: DesignMatrix, params: ScalingParams) -> DesignMatrix:
    """Map each column through (x-min)/(max-min), clipped into [0,1].

    Constant train columns map to 0 everywhere.
    """
    return DesignMatrix(scale_array(m.values, params), m.column_names,
                        m.labels, m.categories)


def select_sdn_features(ds: LabeledDataset) -> LabeledDataset:
    """Restrict a dataset to the six SDN-observable connection features."""
    try:
        src_positions = [ds.schema.index_of(name) for name in SDN_FEATURES]
    except KeyError as missing:
        raise SchemaMismatch(f"missing SDN feature column {missing}")
    descs = tuple(
        FeatureDescriptor(
            name=name,
            kind=ds.schema.features[pos].kind,
            position=i,
        )
        for i, (name, pos) in enumerate(zip(SDN_FEATURES, src_positions))
    )
    schema = FeatureSchema(descs)
    records = tuple(
        type(r)(tuple(r.values[p] for p in src_positions), r.label, r.difficulty)
        for r in ds.records
    )
    return LabeledDataset(schema, records, ds.source)


def subset_dataset(ds: LabeledDataset, indices: np.ndarray,
                   tag: str = "") -> LabeledDataset:
    """New dataset holding the given record indices, original order."""
    idx = np.sort(np.asarray(indices, dtype=np.int64))
    records = tuple(ds.records[i] for i in idx)
    source = f"{ds.source}[{tag}]" if tag else ds.source
    return LabeledDataset(ds.schema, records, source)


def _largest_remainder_allocation(
    group_sizes: list[int], fraction: float, total_target: int
) -> list[int]:
    """Per-group validation counts: floor quotas plus largest remainders."""
    quotas = [fraction * g for g in group_sizes]
    alloc = [int(np.floor(q)) for q in quotas]
    remainders = [q - a for q, a in zip(quotas, alloc)]
    short = total_target - sum(alloc)
    order = sorted(range(len(group_sizes)),
                   key=lambda i: (-remainders[i], i))
    for i in order[:max(short, 0)]:
        if alloc[i] < group_sizes[i]:
            alloc[i] += 1
    return alloc


def stratified_split(
    ds: LabeledDataset, spec: SplitSpec
) -> tuple[LabeledDataset, LabeledDataset]:
    """Partition into train/validation parts preserving label proportions.

    Deterministic under the spec's seed; per-label validation counts
    deviate from the exact fraction by at most one record.
    """
    y = np.fromiter((binarize(r.label) for r in ds.records),
                    dtype=np.int64, count=len(ds))
    n = len(y)
    target = int(np.floor(spec.validation_fraction * n + 0.5))
    if n < 2 or target < 1 or target >= n:
        raise StratumTooSmall(
            f"cannot split {n} records into two non-empty parts "
            f"at fraction {spec.validation_fraction}")
    groups = [np.nonzero(y == lab)[0] for lab in (0, 1)]
    groups = [g for g in groups if len(g)]
    alloc = _largest_remainder_allocation(
        [len(g) for g in groups], spec.validation_fraction, target)
    rng = _rng(spec.seed)
    val_parts = []
    for g, take in zip(groups, alloc):
        shuffled = g[rng.permutation(len(g))]
        val_parts.append(shuffled[:take])
    val_idx = np.sort(np.concatenate(val_parts))
    mask = np.ones(n, dtype=bool)
    mask[val_idx] = False
    train_idx = np.nonzero(mask)[0]
    return (subset_dataset(ds, train_idx, "train"),
            subset_dataset(ds, val_idx, "val"))


def stratified_kfold(
    ds: LabeledDataset, k: int, seed: int
) -> list[np.ndarray]:
    """k disjoint, exhaustive folds with per-label sizes differing <= 1."""
    if k < 2:
        raise ValueError("k must be >= 2")
    y = np.fromiter((binarize(r.label) for r in ds.records),
                    dtype=np.int64, count=len(ds))
    rng = _rng(seed)
    folds: list[list[np.ndarray]] = [[] for _ in range(k)]
    for lab in (0, 1):
        g = np.nonzero(y == lab)[0]
        if len(g) == 0:
            continue
        if len(g) < k:
            raise StratumTooSmall(
                f"label {lab} has {len(g)} records, fewer than k={k}")
        shuffled = g[rng.permutation(len(g))]
        for i in range(k):
            folds[i].append(shuffled[i::k])
    return [np.sort(np.concatenate(parts)) for parts in folds]
