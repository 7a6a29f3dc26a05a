"""Single-file persistence for complete inference pipelines.

Format: the magic bytes ``NIDB``, the format version as decimal text,
a newline, then one JSON document. Every float is written with 17
significant digits so doubles round-trip bit-exactly, and loading is
data-only (no code execution). Recommended extension: ``.nidb``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np

from .dataset import FeatureDescriptor, FeatureSchema, builtin_schema, sdn_schema
from .errors import (
    BadMagic,
    CorruptArtifact,
    InvalidArtifact,
    UnsupportedVersion,
)
from .forests import ForestModel, GbdtModel, Leaf, Split, TreeNode
from .neural import MlpParams
from .pca import PcaModel
from .preprocess import EncodingPlan, ScalingParams

MAGIC = b"NIDB"
CURRENT_VERSION = 1

MODEL_KINDS = ("decision_tree", "extra_tree", "extra_trees_ensemble",
               "gbdt", "dnn", "pca_dnn")
_NETWORK_KINDS = ("dnn", "pca_dnn")
FEATURE_MODES = ("full", "sdn")


def schema_fingerprint(schema: FeatureSchema) -> str:
    """Hash of the ordered feature names and kinds."""
    text = "\n".join(f"{f.name}:{f.kind}" for f in schema.features)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def expected_fingerprint(feature_mode: str) -> str:
    base = builtin_schema() if feature_mode == "full" else sdn_schema()
    return schema_fingerprint(base)


@dataclass
class ModelArtifact:
    """A model bundled with the exact preprocessing that feeds it."""

    model_kind: str
    feature_mode: str
    encoding: EncodingPlan
    model: Any                       # MlpParams | TreeNode | ForestModel | GbdtModel
    scaling: ScalingParams | None = None
    pca: PcaModel | None = None
    schema_fingerprint: str = ""
    metadata: dict = field(default_factory=dict)
    format_version: int = CURRENT_VERSION

    def __post_init__(self):
        if not self.schema_fingerprint:
            object.__setattr__(self, "schema_fingerprint",
                               schema_fingerprint(self.encoding.schema))


def validate_artifact(a: ModelArtifact) -> None:
    """Check kind-component consistency and the schema fingerprint."""
    if a.model_kind not in MODEL_KINDS:
        raise InvalidArtifact(f"unknown model kind {a.model_kind!r}")
    if a.feature_mode not in FEATURE_MODES:
        raise InvalidArtifact(f"unknown feature mode {a.feature_mode!r}")
    if a.model_kind in _NETWORK_KINDS:
        if a.scaling is None:
            raise InvalidArtifact(f"{a.model_kind} artifact needs scaling params")
        if not isinstance(a.model, MlpParams):
            raise InvalidArtifact(f"{a.model_kind} artifact needs MlpParams")
    else:
        if a.scaling is not None:
            raise InvalidArtifact("tree artifacts must not carry scaling params")
    if a.model_kind == "pca_dnn":
        if a.pca is None:
            raise InvalidArtifact("pca_dnn artifact needs a PcaModel")
    elif a.pca is not None:
        raise InvalidArtifact(f"{a.model_kind} artifact must not carry a PcaModel")
    if a.model_kind in ("decision_tree", "extra_tree") \
            and not isinstance(a.model, (Leaf, Split)):
        raise InvalidArtifact(f"{a.model_kind} artifact needs a tree root")
    if a.model_kind == "extra_trees_ensemble" \
            and not isinstance(a.model, ForestModel):
        raise InvalidArtifact("extra_trees_ensemble artifact needs a ForestModel")
    if a.model_kind == "gbdt" and not isinstance(a.model, GbdtModel):
        raise InvalidArtifact("gbdt artifact needs a GbdtModel")
    expected = schema_fingerprint(a.encoding.schema)
    if a.schema_fingerprint != expected:
        raise InvalidArtifact("schema fingerprint does not match encoding plan")
    if a.schema_fingerprint != expected_fingerprint(a.feature_mode):
        raise InvalidArtifact(
            f"schema is not the canonical {a.feature_mode} layout")


# ---------------------------------------------------------------------------
# JSON text with exact float round trips

def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise InvalidArtifact(f"non-finite value {x!r} in artifact")
    return format(x, ".16e")


def _write_json(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_write_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        parts = []
        for k, v in obj.items():
            if not isinstance(k, str):
                raise InvalidArtifact(f"non-string key {k!r} in artifact")
            parts.append(json.dumps(k) + ":" + _write_json(v))
        return "{" + ",".join(parts) + "}"
    raise InvalidArtifact(f"unserializable value of type {type(obj).__name__}")


def _vector_doc(arr) -> list:
    return [float(v) for v in np.asarray(arr, dtype=np.float64)]


def _matrix_doc(arr) -> list:
    return [_vector_doc(row) for row in np.asarray(arr, dtype=np.float64)]


# ---------------------------------------------------------------------------
# Component documents

def _tree_doc(root: TreeNode) -> list[dict]:
    """Flat preorder node list; child ids always exceed the parent id."""
    nodes: list[dict] = []
    stack = [(root, None, None)]
    while stack:
        node, parent_id, side = stack.pop()
        node_id = len(nodes)
        if isinstance(node, Leaf):
            nodes.append({"value": float(node.value)})
        else:
            nodes.append({"feature": int(node.feature_index),
                          "threshold": float(node.threshold),
                          "left": -1, "right": -1})
            stack.append((node.right, node_id, "right"))
            stack.append((node.left, node_id, "left"))
        if parent_id is not None:
            nodes[parent_id][side] = node_id
    return nodes


def _tree_from_doc(doc) -> TreeNode:
    if not isinstance(doc, list) or not doc:
        raise CorruptArtifact("tree document must be a non-empty list")
    built: list[TreeNode] = []
    for i, nd in enumerate(doc):
        if not isinstance(nd, dict):
            raise CorruptArtifact("tree node must be an object")
        if "value" in nd:
            built.append(Leaf(float(nd["value"])))
        else:
            built.append(Split(int(nd["feature"]), float(nd["threshold"])))
    for i, nd in enumerate(doc):
        if "value" in nd:
            continue
        left, right = int(nd["left"]), int(nd["right"])
        for child in (left, right):
            if not (i < child < len(built)):
                raise CorruptArtifact(
                    f"tree node {i} references invalid child {child}")
        built[i].left = built[left]
        built[i].right = built[right]
    return built[0]


def _encoding_doc(plan: EncodingPlan) -> dict:
    return {
        "mode": plan.mode,
        "features": [[f.name, f.kind] for f in plan.schema.features],
        "vocabularies": {name: list(vocab)
                         for name, vocab in plan.vocabularies.items()},
    }


def _encoding_from_doc(doc) -> EncodingPlan:
    descs = tuple(
        FeatureDescriptor(name=str(name), kind=str(kind), position=i)
        for i, (name, kind) in enumerate(doc["features"])
    )
    schema = FeatureSchema(descs)
    vocabularies = {str(k): tuple(str(v) for v in vs)
                    for k, vs in doc["vocabularies"].items()}
    mode = str(doc["mode"])
    column_names: list[str] = []
    for feat in schema.features:
        if feat.kind == "nominal" and mode == "onehot":
            column_names.extend(
                f"{feat.name}={cat}" for cat in vocabularies[feat.name])
        else:
            column_names.append(feat.name)
    return EncodingPlan(mode, schema, vocabularies, tuple(column_names))


def _model_doc(kind: str, model) -> dict:
    if kind in _NETWORK_KINDS:
        return {"weights": [_matrix_doc(w) for w in model.weights],
                "biases": [_vector_doc(b) for b in model.biases]}
    if kind in ("decision_tree", "extra_tree"):
        return {"nodes": _tree_doc(model)}
    if kind == "extra_trees_ensemble":
        return {"trees": [_tree_doc(t) for t in model.trees],
                "n_features_considered": int(model.n_features_considered)}
    return {"base_score": float(model.base_score),
            "shrinkage": float(model.shrinkage),
            "trees": [_tree_doc(t) for t in model.trees]}


def _model_from_doc(kind: str, doc):
    if kind in _NETWORK_KINDS:
        weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        return MlpParams(weights, biases)
    if kind in ("decision_tree", "extra_tree"):
        return _tree_from_doc(doc["nodes"])
    if kind == "extra_trees_ensemble":
        return ForestModel([_tree_from_doc(t) for t in doc["trees"]],
                           int(doc["n_features_considered"]))
    return GbdtModel(float(doc["base_score"]),
                     [_tree_from_doc(t) for t in doc["trees"]],
                     float(doc["shrinkage"]))


def artifact_doc(a: ModelArtifact) -> dict:
    return {
        "model_kind": a.model_kind,
        "feature_mode": a.feature_mode,
        "schema_fingerprint": a.schema_fingerprint,
        "metadata": a.metadata,
        "encoding": _encoding_doc(a.encoding),
        "scaling": None if a.scaling is None else {
            "mins": _vector_doc(a.scaling.mins),
            "maxs": _vector_doc(a.scaling.maxs),
        },
        "pca": None if a.pca is None else {
            "mean": _vector_doc(a.pca.mean),
            "components": _matrix_doc(a.pca.components),
            "eigenvalues": _vector_doc(a.pca.eigenvalues),
            "explained_variance_ratio": _vector_doc(
                a.pca.explained_variance_ratio),
        },
        "model": _model_doc(a.model_kind, a.model),
    }


def _artifact_from_doc(doc, version: int) -> ModelArtifact:
    kind = str(doc["model_kind"])
    scaling = None
    if doc.get("scaling") is not None:
        scaling = ScalingParams(
            np.asarray(doc["scaling"]["mins"], dtype=np.float64),
            np.asarray(doc["scaling"]["maxs"], dtype=np.float64))
    pca_model = None
    if doc.get("pca") is not None:
        p = doc["pca"]
        pca_model = PcaModel(
            np.asarray(p["mean"], dtype=np.float64),
            np.asarray(p["components"], dtype=np.float64),
            np.asarray(p["eigenvalues"], dtype=np.float64),
            np.asarray(p["explained_variance_ratio"], dtype=np.float64))
    return ModelArtifact(
        model_kind=kind,
        feature_mode=str(doc["feature_mode"]),
        encoding=_encoding_from_doc(doc["encoding"]),
        model=_model_from_doc(kind, doc["model"]),
        scaling=scaling,
        pca=pca_model,
        schema_fingerprint=str(doc["schema_fingerprint"]),
        metadata=dict(doc.get("metadata") or {}),
        format_version=version,
    )


# ---------------------------------------------------------------------------
# save / load

def save(a: ModelArtifact, sink: str | Path | BinaryIO) -> None:
    """Validate and write the artifact to a path or binary stream."""
    validate_artifact(a)
    payload = (MAGIC + str(a.format_version).encode("ascii") + b"\n"
               + _write_json(artifact_doc(a)).encode("utf-8") + b"\n")
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            fh.write(payload)
    else:
        sink.write(payload)


def _reject_constant(token: str):
    raise CorruptArtifact(f"non-finite JSON constant {token!r}")


def load(source: str | Path | BinaryIO) -> ModelArtifact:
    """Read, validate, and reconstruct an artifact (data only, no code)."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            blob = fh.read()
    else:
        blob = source.read()
    if blob[:4] != MAGIC:
        raise BadMagic("stream does not start with the NIDB magic")
    newline = blob.find(b"\n", 4)
    if newline < 0:
        raise CorruptArtifact("missing version line")
    try:
        version = int(blob[4:newline].decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        raise CorruptArtifact("unreadable version field")
    if version != CURRENT_VERSION:
        raise UnsupportedVersion(f"format version {version} not supported")
    try:
        doc = json.loads(blob[newline + 1:].decode("utf-8"),
                         parse_constant=_reject_constant)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptArtifact(f"invalid artifact body: {exc}")
    try:
        artifact = _artifact_from_doc(doc, version)
        validate_artifact(artifact)
    except CorruptArtifact:
        raise
    except (InvalidArtifact, KeyError, TypeError, ValueError, IndexError) as exc:
        raise CorruptArtifact(f"artifact failed validation: {exc}")
    return artifact
