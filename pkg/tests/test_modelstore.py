"""Artifact persistence: format, validation, and exact round trips."""

import io
import re

import numpy as np
import pytest

from nidb.dataset import parse_dataset
from nidb.errors import (
    BadMagic,
    CorruptArtifact,
    InvalidArtifact,
    UnsupportedVersion,
)
from nidb.experiment import artifact_predict_proba
from nidb.modelstore import (
    ModelArtifact,
    expected_fingerprint,
    load,
    save,
    schema_fingerprint,
)
from nidb.dataset import builtin_schema, sdn_schema

from conftest import synthetic_lines
from pipelines import ALL_KINDS, build_artifact


@pytest.fixture(scope="module")
def artifacts(synth_train_file):
    return {kind: build_artifact(synth_train_file, kind)
            for kind in ALL_KINDS}


@pytest.fixture(scope="module")
def probe_rows():
    ds = parse_dataset(synthetic_lines(100, seed=77, test_variant=True))
    return [r.values for r in ds.records]


class TestRoundTrip:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_predictions_bit_identical(self, artifacts, probe_rows,
                                       tmp_path, kind):
        artifact = artifacts[kind]
        before = artifact_predict_proba(artifact, probe_rows)
        path = tmp_path / f"{kind}.nidb"
        save(artifact, path)
        restored = load(path)
        after = artifact_predict_proba(restored, probe_rows)
        assert np.array_equal(before, after)

    def test_fields_survive(self, artifacts, tmp_path):
        artifact = artifacts["pca_dnn"]
        path = tmp_path / "model.nidb"
        save(artifact, path)
        restored = load(path)
        assert restored.model_kind == "pca_dnn"
        assert restored.feature_mode == "full"
        assert restored.schema_fingerprint == artifact.schema_fingerprint
        assert restored.metadata["seed"] == artifact.metadata["seed"]
        assert restored.encoding.vocabularies == artifact.encoding.vocabularies
        assert np.array_equal(restored.pca.components, artifact.pca.components)
        assert np.array_equal(restored.scaling.mins, artifact.scaling.mins)

    def test_stream_interface(self, artifacts):
        buf = io.BytesIO()
        save(artifacts["decision_tree"], buf)
        buf.seek(0)
        restored = load(buf)
        assert restored.model_kind == "decision_tree"


class TestFormat:
    def test_magic_bytes(self, artifacts, tmp_path):
        path = tmp_path / "m.nidb"
        save(artifacts["decision_tree"], path)
        blob = path.read_bytes()
        assert blob[:4] == b"NIDB"
        assert blob[4:6] == b"1\n"

    def test_floats_have_17_significant_digits(self, artifacts, tmp_path):
        path = tmp_path / "m.nidb"
        save(artifacts["dnn"], path)
        body = path.read_bytes().split(b"\n", 1)[1].decode()
        floats = re.findall(r"-?\d\.\d+e[+-]\d+", body)
        assert floats, "expected scientific-notation floats in the body"
        assert all(len(f.split(".")[1].split("e")[0]) == 16 for f in floats)

    def test_exact_double_round_trip_in_text(self):
        # 17 significant digits uniquely identify a double.
        value = 0.1 + 0.2  # famously not 0.3
        assert float(format(value, ".16e")) == value

    def test_body_is_plain_json(self, artifacts, tmp_path):
        import json
        path = tmp_path / "m.nidb"
        save(artifacts["gbdt"], path)
        body = path.read_bytes().split(b"\n", 1)[1]
        doc = json.loads(body)
        assert doc["model_kind"] == "gbdt"


class TestLoadErrors:
    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            load(io.BytesIO(b"XXXX1\n{}"))

    def test_truncated_body(self, artifacts, tmp_path):
        path = tmp_path / "m.nidb"
        save(artifacts["decision_tree"], path)
        blob = path.read_bytes()
        with pytest.raises(CorruptArtifact):
            load(io.BytesIO(blob[:int(len(blob) * 0.6)]))

    def test_unsupported_version(self):
        with pytest.raises(UnsupportedVersion):
            load(io.BytesIO(b"NIDB999\n{}"))

    def test_unreadable_version(self):
        with pytest.raises(CorruptArtifact):
            load(io.BytesIO(b"NIDBv1\n{}"))
        with pytest.raises(CorruptArtifact):
            load(io.BytesIO(b"NIDB1{}"))

    def test_tampered_fingerprint(self, artifacts, tmp_path):
        path = tmp_path / "m.nidb"
        save(artifacts["decision_tree"], path)
        blob = path.read_bytes()
        fp = artifacts["decision_tree"].schema_fingerprint
        tampered = blob.replace(fp.encode(), ("0" * 64).encode())
        with pytest.raises(CorruptArtifact):
            load(io.BytesIO(tampered))

    def test_missing_component(self, artifacts, tmp_path):
        import json
        path = tmp_path / "m.nidb"
        save(artifacts["pca_dnn"], path)
        header, body = path.read_bytes().split(b"\n", 1)
        doc = json.loads(body)
        doc["pca"] = None
        with pytest.raises(CorruptArtifact):
            load(io.BytesIO(header + b"\n" + json.dumps(doc).encode()))


class TestValidation:
    def test_pca_dnn_without_pca_rejected_before_write(self, artifacts):
        artifact = artifacts["pca_dnn"]
        broken = ModelArtifact(
            model_kind="pca_dnn",
            feature_mode=artifact.feature_mode,
            encoding=artifact.encoding,
            model=artifact.model,
            scaling=artifact.scaling,
            pca=None,
        )
        with pytest.raises(InvalidArtifact):
            save(broken, io.BytesIO())

    def test_tree_with_scaling_rejected(self, artifacts):
        tree = artifacts["decision_tree"]
        broken = ModelArtifact(
            model_kind="decision_tree",
            feature_mode=tree.feature_mode,
            encoding=tree.encoding,
            model=tree.model,
            scaling=artifacts["dnn"].scaling,
        )
        with pytest.raises(InvalidArtifact):
            save(broken, io.BytesIO())

    def test_unknown_kind_rejected(self, artifacts):
        tree = artifacts["decision_tree"]
        broken = ModelArtifact(
            model_kind="oracle",
            feature_mode="full",
            encoding=tree.encoding,
            model=tree.model,
        )
        with pytest.raises(InvalidArtifact):
            save(broken, io.BytesIO())

    def test_fingerprints_distinguish_modes(self):
        assert expected_fingerprint("full") != expected_fingerprint("sdn")
        assert expected_fingerprint("full") == \
            schema_fingerprint(builtin_schema())
        assert expected_fingerprint("sdn") == schema_fingerprint(sdn_schema())

    def test_sdn_artifact_round_trip(self, synth_train_file, tmp_path,
                                     probe_rows):
        artifact = build_artifact(synth_train_file, "decision_tree",
                                  mode="sdn")
        path = tmp_path / "sdn.nidb"
        save(artifact, path)
        restored = load(path)
        assert restored.feature_mode == "sdn"
        sdn_rows = [tuple(r[i] for i in (0, 1, 4, 5, 22, 23))
                    for r in probe_rows]
        before = artifact_predict_proba(artifact, sdn_rows)
        after = artifact_predict_proba(restored, sdn_rows)
        assert np.array_equal(before, after)
