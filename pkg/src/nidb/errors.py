"""Exception types shared across the nidb package."""


class NidbError(Exception):
    """Base class for all nidb errors."""


class MalformedLine(NidbError):
    """A dataset line does not have 42 or 43 comma-separated fields."""

    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        msg = f"malformed line {line_no}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class EmptyInput(NidbError):
    """An operation that needs at least one record received none."""


class NumericParseError(NidbError):
    """Non-numeric text found in a numeric column."""

    def __init__(self, row: int, column: str, value: str = ""):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: not numeric: {value!r}")


class SchemaMismatch(NidbError):
    """Dataset columns do not match what the operation expects."""


class StratumTooSmall(NidbError):
    """A label stratum is too small to honor the requested partition."""


class RankError(NidbError):
    """Requested more principal components than the data supports."""


class ConvergenceError(NidbError):
    """The eigensolver failed to converge."""


class DimensionMismatch(NidbError):
    """Matrix width does not match the model's expected input width."""


class LengthMismatch(NidbError):
    """Two aligned vectors have different lengths."""


class NonFiniteLoss(NidbError):
    """Training loss became NaN or infinite (diverged)."""


class EmptyEvaluation(NidbError):
    """Accuracy requested over zero evaluated records."""


class MixedFeatureModes(NidbError):
    """Comparison rows mix full-feature and SDN-feature results."""


class SingleClassInput(NidbError):
    """Boosting requires both classes in the training labels."""


class InvalidArtifact(NidbError):
    """Model artifact components are inconsistent with its kind."""


class BadMagic(NidbError):
    """Stream does not start with the NIDB magic bytes."""


class UnsupportedVersion(NidbError):
    """Artifact format version is not supported by this build."""


class CorruptArtifact(NidbError):
    """Artifact failed structural or invariant validation while loading."""
