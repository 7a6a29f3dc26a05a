"""NSL-KDD record schema, attack taxonomy, and dataset parsing.

The connection-record layout is the standard 41-column NSL-KDD one:
three nominal string columns (protocol_type, service, flag) and 38
numeric columns (binary indicator columns are plain numeric 0/1).
Dataset files carry one record per line: 41 feature fields plus the
attack label, optionally followed by a difficulty score.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmptyInput, MalformedLine

NUM_FEATURES = 41

# Canonical column order of the NSL-KDD files.
FEATURE_NAMES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate",
    "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate",
    "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
)

NOMINAL_FEATURES = ("protocol_type", "service", "flag")

# The six connection attributes observable from an SDN switch.
SDN_FEATURES = ("duration", "protocol_type", "src_bytes", "dst_bytes",
                "count", "srv_count")


class Category(enum.Enum):
    """Broad traffic categories for binary and diagnostic reporting."""

    NORMAL = "Normal"
    DOS = "DoS"
    PROBE = "Probe"
    R2L = "R2L"
    U2R = "U2R"
    UNKNOWN = "UnknownAttack"


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    kind: str  # "nominal" | "numeric"
    position: int


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature layout of a dataset.

    Positions must be 0..n-1 with no gaps and names unique. The
    canonical full schema has 41 features with exactly 3 nominal ones;
    SDN-restricted schemas are smaller but follow the same rules.
    """

    features: tuple[FeatureDescriptor, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        positions = [f.position for f in self.features]
        if positions != list(range(len(self.features))):
            raise ValueError("feature positions must be 0..n-1 with no gaps")
        for f in self.features:
            if f.kind not in ("nominal", "numeric"):
                raise ValueError(f"unknown feature kind {f.kind!r}")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def nominal_positions(self) -> tuple[int, ...]:
        return tuple(f.position for f in self.features if f.kind == "nominal")

    def index_of(self, name: str) -> int:
        for f in self.features:
            if f.name == name:
                return f.position
        raise KeyError(name)


def builtin_schema() -> FeatureSchema:
    """The canonical 41-column NSL-KDD schema."""
    descs = tuple(
        FeatureDescriptor(
            name=n,
            kind="nominal" if n in NOMINAL_FEATURES else "numeric",
            position=i,
        )
        for i, n in enumerate(FEATURE_NAMES)
    )
    return FeatureSchema(descs)


def sdn_schema() -> FeatureSchema:
    """The 6-column SDN-restricted schema (builtin kinds preserved)."""
    full = builtin_schema()
    descs = tuple(
        FeatureDescriptor(
            name=name,
            kind=full.features[full.index_of(name)].kind,
            position=i,
        )
        for i, name in enumerate(SDN_FEATURES)
    )
    return FeatureSchema(descs)


@dataclass(frozen=True)
class RawRecord:
    """One connection record: 41 raw string fields plus its label."""

    values: tuple[str, ...]
    label: str
    difficulty: int | None = None


@dataclass(frozen=True)
class LabeledDataset:
    """Immutable collection of records that share one schema."""

    schema: FeatureSchema
    records: tuple[RawRecord, ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def labels(self) -> Iterator[str]:
        return (r.label for r in self.records)


@dataclass(frozen=True)
class AttackTaxonomy:
    """Attack-name to category mapping.

    Unmapped names resolve to UnknownAttack, never to Normal, so novel
    attacks in a test split can only be under-described, not whitewashed.
    """

    mapping: dict[str, Category] = field(default_factory=dict)

    def category_of(self, label: str) -> Category:
        if label == "normal":
            return Category.NORMAL
        return self.mapping.get(label, Category.UNKNOWN)


# Category membership consistent with the canonical NSL-KDD per-category
# totals (train 67343/45927/52/995/11656, test 9711/7458/67/2887/2421):
# worm, httptunnel and warezclient are counted under R2L in those totals.
_DOS = ("back", "land", "neptune", "pod", "smurf", "teardrop", "mailbomb",
        "processtable", "udpstorm", "apache2")
_PROBE = ("ipsweep", "nmap", "portsweep", "satan", "mscan", "saint")
_R2L = ("ftp_write", "guess_passwd", "imap", "multihop", "phf", "spy",
        "warezmaster", "warezclient", "xlock", "xsnoop", "snmpguess",
        "snmpgetattack", "httptunnel", "sendmail", "named", "worm")
_U2R = ("buffer_overflow", "loadmodule", "perl", "rootkit", "sqlattack",
        "xterm", "ps")


def default_taxonomy() -> AttackTaxonomy:
    """Attack taxonomy covering both NSL-KDD splits."""
    mapping: dict[str, Category] = {"normal": Category.NORMAL}
    for names, cat in ((_DOS, Category.DOS), (_PROBE, Category.PROBE),
                       (_R2L, Category.R2L), (_U2R, Category.U2R)):
        for n in names:
            mapping[n] = cat
    return AttackTaxonomy(mapping)


def normalize_label(raw: str) -> str:
    """Lowercase, strip trailing punctuation, hyphens to underscores."""
    return raw.strip().lower().rstrip(".").replace("-", "_")


def parse_dataset(
    stream: Iterable[str],
    schema: FeatureSchema | None = None,
    source: str = "",
) -> LabeledDataset:
    """Parse comma-separated NSL-KDD lines into a LabeledDataset.

    Accepts 42-field lines (features + label) and 43-field lines
    (features + label + difficulty). Empty lines are ignored; any other
    field count raises MalformedLine with its 1-based line number.
    """
    if schema is None:
        schema = builtin_schema()
    n_feat = len(schema)
    records = []
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) == n_feat + 1:
            difficulty = None
        elif len(fields) == n_feat + 2:
            try:
                difficulty = int(fields[-1])
            except ValueError:
                raise MalformedLine(line_no, f"bad difficulty {fields[-1]!r}")
            fields = fields[:-1]
        else:
            raise MalformedLine(
                line_no, f"expected {n_feat + 1} or {n_feat + 2} fields, "
                f"got {len(fields)}")
        label = normalize_label(fields[-1])
        if not label:
            raise MalformedLine(line_no, "empty label")
        records.append(RawRecord(tuple(fields[:-1]), label, difficulty))
    if not records:
        raise EmptyInput("no records in input")
    return LabeledDataset(schema, tuple(records), source)


def load_dataset(path: str | Path, schema: FeatureSchema | None = None) -> LabeledDataset:
    """Read a dataset file from disk (LF or CRLF line endings)."""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        return parse_dataset(fh, schema, source=str(path))


def categorize(label: str, taxonomy: AttackTaxonomy) -> Category:
    """Map a lowercase attack name to its broad category."""
    return taxonomy.category_of(label)


def binarize(label: str) -> int:
    """0 for normal traffic, 1 for every attack (known or not)."""
    return 0 if label == "normal" else 1


def count_by_category(
    ds: LabeledDataset, taxonomy: AttackTaxonomy
) -> dict[Category, int]:
    """Record counts per category; categories absent from ds count 0."""
    counts = {cat: 0 for cat in Category}
    for record in ds.records:
        counts[taxonomy.category_of(record.label)] += 1
    return counts
