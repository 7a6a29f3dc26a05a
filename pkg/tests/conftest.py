"""Shared fixtures: synthetic NSL-KDD-format corpora and data discovery.

The synthetic generator emits files in the exact wire format (41
comma-separated feature fields + label [+ difficulty]) with a learnable
attack/normal signal. The test variant introduces attack names and
service values never seen in the train variant, mimicking the novel
intrusions of the real test split.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from nidb.dataset import FEATURE_NAMES

TRAIN_ATTACKS = ("neptune", "smurf", "satan", "guess_passwd",
                 "buffer_overflow")
TEST_ONLY_ATTACKS = ("mscan", "apache2", "snmpguess")

_TRAIN_SERVICES = ("http", "smtp", "ftp", "domain_u", "private", "telnet")
_TEST_ONLY_SERVICES = ("ntp_u", "imap4")
_FLAGS = ("SF", "S0", "REJ", "RSTR")


def synthetic_lines(
    n: int,
    seed: int,
    test_variant: bool = False,
    with_difficulty: bool = True,
) -> list[str]:
    rng = np.random.default_rng(seed)
    idx = {name: i for i, name in enumerate(FEATURE_NAMES)}
    lines = []
    for _ in range(n):
        is_attack = rng.random() < 0.45
        fields = ["0"] * len(FEATURE_NAMES)
        services = _TRAIN_SERVICES + (_TEST_ONLY_SERVICES if test_variant
                                      else ())
        fields[idx["protocol_type"]] = rng.choice(("tcp", "udp", "icmp"))
        fields[idx["service"]] = rng.choice(services)
        if is_attack:
            label = rng.choice(TRAIN_ATTACKS + (TEST_ONLY_ATTACKS
                                                if test_variant else ()))
            fields[idx["flag"]] = rng.choice(_FLAGS[1:])
            fields[idx["duration"]] = str(int(rng.exponential(2)))
            fields[idx["src_bytes"]] = str(int(rng.exponential(8000)))
            fields[idx["dst_bytes"]] = str(int(rng.exponential(100)))
            fields[idx["count"]] = str(int(rng.integers(80, 500)))
            fields[idx["srv_count"]] = str(int(rng.integers(60, 500)))
            fields[idx["serror_rate"]] = f"{rng.uniform(0.6, 1.0):.2f}"
            fields[idx["same_srv_rate"]] = f"{rng.uniform(0.0, 0.3):.2f}"
            fields[idx["dst_host_count"]] = str(int(rng.integers(150, 256)))
        else:
            label = "normal"
            fields[idx["flag"]] = rng.choice(_FLAGS[:2])
            fields[idx["duration"]] = str(int(rng.exponential(30)))
            fields[idx["src_bytes"]] = str(int(rng.exponential(300)))
            fields[idx["dst_bytes"]] = str(int(rng.exponential(3000)))
            fields[idx["logged_in"]] = "1"
            fields[idx["count"]] = str(int(rng.integers(1, 40)))
            fields[idx["srv_count"]] = str(int(rng.integers(1, 30)))
            fields[idx["serror_rate"]] = f"{rng.uniform(0.0, 0.2):.2f}"
            fields[idx["same_srv_rate"]] = f"{rng.uniform(0.7, 1.0):.2f}"
            fields[idx["dst_host_count"]] = str(int(rng.integers(1, 120)))
        # Light noise on a few quiet columns so nothing is constant.
        fields[idx["hot"]] = str(int(rng.integers(0, 3)))
        fields[idx["dst_host_srv_count"]] = str(int(rng.integers(0, 256)))
        fields[idx["rerror_rate"]] = f"{rng.uniform(0.0, 1.0):.2f}"
        parts = fields + [label]
        if with_difficulty:
            parts.append(str(int(rng.integers(0, 22))))
        lines.append(",".join(parts))
    return lines


@pytest.fixture(scope="session")
def synth_train_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "synth_train.txt"
    path.write_text("\n".join(synthetic_lines(1500, seed=11)) + "\n")
    return path


@pytest.fixture(scope="session")
def synth_test_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "synth_test.txt"
    path.write_text(
        "\n".join(synthetic_lines(500, seed=12, test_variant=True)) + "\n")
    return path


def official_data_dir() -> Path | None:
    """Directory holding KDDTrain+.txt / KDDTest+.txt, if available."""
    candidates = []
    env = os.environ.get("NSLKDD_DIR", "")
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parent.parent / "data")
    for cand in candidates:
        if (cand / "KDDTrain+.txt").is_file() \
                and (cand / "KDDTest+.txt").is_file():
            return cand
    return None


def require_official_data() -> Path:
    data = official_data_dir()
    if data is None:
        pytest.skip("official NSL-KDD files not found: place KDDTrain+.txt "
                    "and KDDTest+.txt under ./data or set NSLKDD_DIR")
    return data
