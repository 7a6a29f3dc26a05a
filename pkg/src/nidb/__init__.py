"""Binary intrusion-detection benchmark on NSL-KDD connection records.

Library layout:

- :mod:`nidb.dataset` — record schema, attack taxonomy, file parsing
- :mod:`nidb.preprocess` — encoding, scaling, SDN subset, stratified splits
- :mod:`nidb.pca` — covariance-eigendecomposition PCA
- :mod:`nidb.neural` — five-hidden-layer ReLU/sigmoid classifier
- :mod:`nidb.forests` — CART, extremely randomized trees, gradient boosting
- :mod:`nidb.evaluation` — confusion counts, accuracy, comparison tables
- :mod:`nidb.modelstore` — versioned single-file pipeline persistence
- :mod:`nidb.experiment` — end-to-end pipelines behind the CLI
- :mod:`nidb.cli` — the ``nidb`` command
"""

from .dataset import (
    AttackTaxonomy,
    Category,
    FeatureSchema,
    LabeledDataset,
    RawRecord,
    binarize,
    builtin_schema,
    categorize,
    count_by_category,
    default_taxonomy,
    load_dataset,
    parse_dataset,
    sdn_schema,
)
from .evaluation import ConfusionCounts, EvalReport, accuracy, confusion
from .experiment import ExperimentConfig, evaluate_artifact, train_single
from .modelstore import ModelArtifact, load, save
from .preprocess import (
    DesignMatrix,
    EncodingPlan,
    ScalingParams,
    SplitSpec,
    apply_encoding,
    apply_scaler,
    design_matrix_from_arrays,
    fit_encoding,
    fit_scaler,
    select_sdn_features,
    stratified_kfold,
    stratified_split,
)

__version__ = "0.1.0"
