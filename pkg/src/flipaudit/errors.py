"""Exception hierarchy shared by the whole package.

Every failure mode that callers are expected to handle has its own class so
that batch drivers (and the CLI) can map them to exit codes without string
matching.
"""


class AuditError(Exception):
    """Base class for all errors raised by this package."""


class DataError(AuditError):
    """Invalid or inconsistent input data."""


class NumericError(AuditError):
    """A numerical procedure failed (divergence, singularity, ...)."""


class NonFiniteError(DataError):
    """Input contains NaN or infinite values."""


class ConstantFeatureError(DataError):
    """A feature column has zero variance and cannot be normalized."""

    def __init__(self, name: str):
        super().__init__(f"feature {name!r} is constant (zero variance)")
        self.name = name


class DimensionMismatchError(DataError):
    """Operands disagree on the number of features."""


class ShapeMismatchError(DataError):
    """Operands disagree on shape (rows and/or columns)."""


class SchemaMismatchError(DataError):
    """Feature names do not match the expected schema."""


class UnequalSizesError(DataError):
    """The exact solver requires equally sized groups."""

    def __init__(self, n_a: int, n_b: int):
        super().__init__(
            f"exact transport needs equal group sizes, got {n_a} and {n_b}; "
            "subsample the larger group first"
        )
        self.n_a = n_a
        self.n_b = n_b


class EmptyDatasetError(DataError):
    """A group has no rows."""


class TooLargeError(DataError):
    """Instance too large for exhaustive enumeration."""

    def __init__(self, n: int, limit: int):
        super().__init__(f"brute force enumerates n! bijections; n={n} exceeds limit {limit}")
        self.n = n
        self.limit = limit


class KTooLargeError(DataError):
    """Requested subsample exceeds the available rows."""


class MissingLabelsError(DataError):
    """Operation requires true labels on both groups."""


class EmptyStratumError(DataError):
    """A label stratum of one group is empty."""

    def __init__(self, label: int, group: str):
        super().__init__(f"label stratum y={label} of group {group!r} is empty")
        self.label = label
        self.group = group


class EmptyFlipsetError(DataError):
    """A transparency report is undefined on an empty flipset side."""


class EmptySampleError(DataError):
    """A statistic requires a nonempty sample."""


class SingularDesignError(NumericError):
    """Least-squares design matrix is rank deficient."""

    def __init__(self, features):
        feats = ", ".join(features)
        super().__init__(f"collinear design matrix over features: {feats}")
        self.features = tuple(features)


class NonFiniteLossError(NumericError):
    """Adversarial training produced a NaN/inf loss and was aborted."""

    def __init__(self, step: int, kind: str, value: float):
        super().__init__(f"{kind} loss became non-finite ({value}) at step {step}")
        self.step = step
        self.kind = kind
        self.value = value


class DivergedError(NumericError):
    """Iterative optimization diverged."""


class BadParamsError(DataError):
    """Generator/model parameters are out of their valid range."""
