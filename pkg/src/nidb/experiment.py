"""End-to-end experiment pipelines shared by the CLI and the tests.

A pipeline is: parse -> optional SDN restriction -> stratified holdout
split -> encode (one-hot for networks, ordinal for trees) -> scale and
optionally PCA-reduce (networks only) -> fit -> evaluate. The fitted
pipeline is bundled into a ModelArtifact so inference always reuses the
exact preprocessing it was trained with.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import forests, neural, pca
from .dataset import (
    LabeledDataset,
    binarize,
    default_taxonomy,
    load_dataset,
)
from .errors import SchemaMismatch
from .evaluation import EvalReport, accuracy, confusion, per_category_recall
from .modelstore import ModelArtifact
from .preprocess import (
    DesignMatrix,
    EncodingPlan,
    ScalingParams,
    SplitSpec,
    apply_encoding,
    encode_feature_rows,
    fit_encoding,
    fit_scaler,
    scale_array,
    select_sdn_features,
    stratified_split,
)

NETWORK_KINDS = ("dnn", "pca_dnn")
TREE_KINDS = ("decision_tree", "extra_tree", "extra_trees_ensemble", "gbdt")

# Hidden widths by pipeline shape: wide for the ~122-column one-hot
# matrix, narrow for the 6-feature and PCA-reduced inputs.
WIDE_HIDDEN = (512, 256, 128, 64, 32)
NARROW_HIDDEN = (64, 48, 32, 16, 8)


@dataclass
class NeuralSettings:
    learning_rate: float = 1e-3
    batch_size: int = 512
    max_epochs: int = 100
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_patience: int = 5
    shuffle_each_epoch: bool = True
    hidden_widths: tuple[int, ...] | None = None


@dataclass
class TreeSettings:
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1


@dataclass
class GbdtSettings:
    rounds: int = 200
    shrinkage: float = 0.1
    max_depth: int = 6


@dataclass
class ExperimentConfig:
    train_path: str = ""
    test_path: str = ""
    feature_mode: str = "full"           # "full" | "sdn"
    model_kind: str = "dnn"
    pca_components: int = 15
    validation_fraction: float = 0.2
    seed: int = 42
    n_trees: int = 100
    neural: NeuralSettings = field(default_factory=NeuralSettings)
    trees: TreeSettings = field(default_factory=TreeSettings)
    gbdt: GbdtSettings = field(default_factory=GbdtSettings)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        neural_doc = dict(doc.pop("neural", {}))
        if neural_doc.get("hidden_widths") is not None:
            neural_doc["hidden_widths"] = tuple(neural_doc["hidden_widths"])
        trees_doc = dict(doc.pop("trees", {}))
        gbdt_doc = dict(doc.pop("gbdt", {}))
        cfg = cls(**doc)
        cfg.neural = replace(NeuralSettings(), **neural_doc)
        cfg.trees = replace(TreeSettings(), **trees_doc)
        cfg.gbdt = replace(GbdtSettings(), **gbdt_doc)
        return cfg

    def to_dict(self) -> dict:
        doc = asdict(self)
        if doc["neural"]["hidden_widths"] is not None:
            doc["neural"]["hidden_widths"] = list(
                doc["neural"]["hidden_widths"])
        return doc


def resolve_hidden_widths(cfg: ExperimentConfig, kind: str) -> tuple[int, ...]:
    if cfg.neural.hidden_widths is not None:
        return tuple(cfg.neural.hidden_widths)
    if kind == "dnn" and cfg.feature_mode == "full":
        return WIDE_HIDDEN
    return NARROW_HIDDEN


def encoding_mode_for(kind: str) -> str:
    return "onehot" if kind in NETWORK_KINDS else "ordinal"


def _train_config(cfg: ExperimentConfig) -> neural.TrainConfig:
    ns = cfg.neural
    return neural.TrainConfig(
        learning_rate=ns.learning_rate,
        batch_size=ns.batch_size,
        max_epochs=ns.max_epochs,
        seed=cfg.seed,
        optimizer=ns.optimizer,
        beta1=ns.beta1,
        beta2=ns.beta2,
        adam_eps=ns.adam_eps,
        early_stop_patience=ns.early_stop_patience,
        shuffle_each_epoch=ns.shuffle_each_epoch,
    )


def _tree_params(cfg: ExperimentConfig) -> forests.TreeParams:
    ts = cfg.trees
    return forests.TreeParams(max_depth=ts.max_depth,
                              min_samples_split=ts.min_samples_split,
                              min_samples_leaf=ts.min_samples_leaf,
                              seed=cfg.seed)


@dataclass
class TrainedPipeline:
    artifact: ModelArtifact
    report: EvalReport
    history: neural.TrainHistory | None = None


def load_experiment_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    ds = load_dataset(cfg.train_path)
    if cfg.feature_mode == "sdn":
        ds = select_sdn_features(ds)
    return ds


@dataclass
class PreparedInputs:
    """Split datasets plus the encoded matrices for one model family."""

    plan: EncodingPlan
    train: DesignMatrix
    val: DesignMatrix
    scaling: ScalingParams | None = None
    pca_model: pca.PcaModel | None = None


def prepare_inputs(
    train_part: LabeledDataset,
    val_part: LabeledDataset,
    kind: str,
    cfg: ExperimentConfig,
) -> PreparedInputs:
    plan = fit_encoding(train_part, encoding_mode_for(kind))
    m_train = apply_encoding(train_part, plan)
    m_val = apply_encoding(val_part, plan)
    scaling = None
    pca_model = None
    if kind in NETWORK_KINDS:
        scaling = fit_scaler(m_train)
        m_train = DesignMatrix(scale_array(m_train.values, scaling),
                               m_train.column_names, m_train.labels,
                               m_train.categories)
        m_val = DesignMatrix(scale_array(m_val.values, scaling),
                             m_val.column_names, m_val.labels,
                             m_val.categories)
        if kind == "pca_dnn":
            pca_model = pca.fit_pca(m_train, cfg.pca_components)
            m_train = pca.transform(pca_model, m_train)
            m_val = pca.transform(pca_model, m_val)
    return PreparedInputs(plan, m_train, m_val, scaling, pca_model)


def _fit_model(kind: str, inputs: PreparedInputs, cfg: ExperimentConfig):
    history = None
    if kind == "decision_tree":
        model = forests.fit_decision_tree(inputs.train, _tree_params(cfg))
    elif kind == "extra_tree":
        model = forests.fit_extra_tree(inputs.train, _tree_params(cfg))
    elif kind == "extra_trees_ensemble":
        model = forests.fit_extra_trees_ensemble(
            inputs.train, _tree_params(cfg), cfg.n_trees)
    elif kind == "gbdt":
        gb = cfg.gbdt
        tree_params = forests.TreeParams(
            max_depth=gb.max_depth,
            min_samples_split=cfg.trees.min_samples_split,
            min_samples_leaf=cfg.trees.min_samples_leaf,
            seed=cfg.seed)
        model = forests.fit_gbdt(inputs.train, gb.rounds, gb.shrinkage,
                                 tree_params)
    elif kind in NETWORK_KINDS:
        arch = neural.MlpArchitecture(inputs.train.n_cols,
                                      resolve_hidden_widths(cfg, kind))
        model, history = neural.train(inputs.train, inputs.val, arch,
                                      _train_config(cfg))
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return model, history


def model_predict_proba(kind: str, model, values: np.ndarray) -> np.ndarray:
    if kind in NETWORK_KINDS:
        return neural.forward(model, values)
    if kind == "extra_trees_ensemble":
        return forests.forest_predict_proba(model, values)
    if kind == "gbdt":
        return forests.gbdt_predict_proba(model, values)
    return forests.tree_predict_proba(model, values)


def _hyperparameter_echo(cfg: ExperimentConfig, kind: str) -> dict:
    if kind in NETWORK_KINDS:
        echo = asdict(cfg.neural)
        echo["hidden_widths"] = list(resolve_hidden_widths(cfg, kind))
        if kind == "pca_dnn":
            echo["pca_components"] = cfg.pca_components
        return echo
    if kind == "gbdt":
        return asdict(cfg.gbdt)
    echo = asdict(cfg.trees)
    if kind == "extra_trees_ensemble":
        echo["n_trees"] = cfg.n_trees
    return echo


def train_single(
    cfg: ExperimentConfig,
    kind: str | None = None,
    prepared: tuple[LabeledDataset, LabeledDataset] | None = None,
) -> TrainedPipeline:
    """Train one model kind end to end and report train/val accuracy.

    `prepared` lets callers reuse an existing (train_part, val_part)
    split; by default the split is derived from the config's seed, so
    reuse and re-derivation give identical results.
    """
    kind = kind or cfg.model_kind
    if prepared is None:
        ds = load_experiment_dataset(cfg)
        prepared = stratified_split(
            ds, SplitSpec(cfg.validation_fraction, cfg.seed))
    train_part, val_part = prepared
    inputs = prepare_inputs(train_part, val_part, kind, cfg)
    model, history = _fit_model(kind, inputs, cfg)
    p_train = model_predict_proba(kind, model, inputs.train.values)
    p_val = model_predict_proba(kind, model, inputs.val.values)
    c_train = confusion((p_train >= 0.5).astype(np.int64), inputs.train.labels)
    c_val = confusion((p_val >= 0.5).astype(np.int64), inputs.val.labels)
    report = EvalReport(
        model_name=kind,
        feature_mode=cfg.feature_mode,
        train_accuracy=accuracy(c_train),
        validation_accuracy=accuracy(c_val),
        confusion_counts={"train": c_train, "validation": c_val},
    )
    artifact = ModelArtifact(
        model_kind=kind,
        feature_mode=cfg.feature_mode,
        encoding=inputs.plan,
        model=model,
        scaling=inputs.scaling,
        pca=inputs.pca_model,
        metadata={
            "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "seed": cfg.seed,
            "validation_fraction": cfg.validation_fraction,
            "hyperparameters": _hyperparameter_echo(cfg, kind),
        },
    )
    return TrainedPipeline(artifact, report, history)


def pipeline_matrix(artifact: ModelArtifact,
                    rows: list[tuple[str, ...]]) -> np.ndarray:
    """Run raw feature rows through the artifact's preprocessing."""
    values = encode_feature_rows(rows, artifact.encoding)
    if artifact.scaling is not None:
        values = scale_array(values, artifact.scaling)
    if artifact.pca is not None:
        values = pca.transform(artifact.pca, values)
    return values


def artifact_predict_proba(artifact: ModelArtifact,
                           rows: list[tuple[str, ...]]) -> np.ndarray:
    """Attack probability per raw feature row."""
    values = pipeline_matrix(artifact, rows)
    return model_predict_proba(artifact.model_kind, artifact.model, values)


def restrict_to_artifact(artifact: ModelArtifact,
                         ds: LabeledDataset) -> LabeledDataset:
    """Match a parsed dataset to the artifact's feature layout."""
    if ds.schema.names == artifact.encoding.schema.names:
        return ds
    if artifact.feature_mode == "sdn":
        restricted = select_sdn_features(ds)
        if restricted.schema.names == artifact.encoding.schema.names:
            return restricted
    raise SchemaMismatch(
        f"dataset columns do not match the artifact's "
        f"{artifact.feature_mode} layout")


def evaluate_artifact(artifact: ModelArtifact,
                      test_ds: LabeledDataset) -> EvalReport:
    """Test accuracy, confusion counts, and per-category recall."""
    ds = restrict_to_artifact(artifact, test_ds)
    proba = artifact_predict_proba(artifact, [r.values for r in ds.records])
    pred = (proba >= 0.5).astype(np.int64)
    truth = np.fromiter((binarize(r.label) for r in ds.records),
                        dtype=np.int64, count=len(ds))
    taxonomy = default_taxonomy()
    categories = [taxonomy.category_of(r.label) for r in ds.records]
    c = confusion(pred, truth)
    return EvalReport(
        model_name=artifact.model_kind,
        feature_mode=artifact.feature_mode,
        test_accuracy=accuracy(c),
        confusion_counts={"test": c},
        category_recall=per_category_recall(pred, categories),
    )


def comparison_kinds(feature_mode: str) -> tuple[str, ...]:
    """Standard comparison rows; the PCA row exists only in full mode."""
    kinds = list(TREE_KINDS) + ["dnn"]
    if feature_mode == "full":
        kinds.append("pca_dnn")
    return tuple(kinds)


def run_comparison_row(cfg: ExperimentConfig, kind: str,
                       split: tuple[LabeledDataset, LabeledDataset] | None,
                       test_ds: LabeledDataset) -> EvalReport:
    """Train one row and evaluate it on the shared test dataset."""
    trained = train_single(cfg, kind, prepared=split)
    test_report = evaluate_artifact(trained.artifact, test_ds)
    report = trained.report
    report.test_accuracy = test_report.test_accuracy
    report.confusion_counts["test"] = test_report.confusion_counts["test"]
    report.category_recall = test_report.category_recall
    return report
