"""Exception types shared across the toolkit."""


class RbsError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(RbsError, ValueError):
    """Shapes of related arrays disagree (runs, matrices, model inputs)."""


class EmptyInputError(RbsError, ValueError):
    """An operation received an empty collection where data is required."""


class GeneratorConfigError(RbsError, ValueError):
    """Synthetic generator configuration would produce invalid fields."""


class CannotSplitError(RbsError, ValueError):
    """A run-level split cannot leave both sides non-empty."""


class NumericError(RbsError, ValueError):
    """Non-finite values where finite data is required."""


class UndefinedEnergyError(RbsError, ValueError):
    """Accumulated energy is undefined (all singular values are zero)."""


class UndefinedMetricError(RbsError, ValueError):
    """A relative metric has a zero denominator."""


class ConvergenceError(RbsError, RuntimeError):
    """Iterative solver hit its iteration cap before meeting tolerance.

    Carries the residual optimality violation at the point of failure.
    """

    def __init__(self, message: str, violation: float = float("nan")):
        super().__init__(message)
        self.violation = violation


class TuningFailedError(RbsError, RuntimeError):
    """Every hyperparameter trial failed."""


class RuntimeBindError(RbsError, RuntimeError):
    """The server cannot bind its requested address."""


class FormatError(RbsError, ValueError):
    """A serialized file does not match its declared format.

    ``offset`` is the byte offset where the problem was detected, when known;
    ``section`` names the offending section of a sectioned file.
    """

    def __init__(self, message: str, offset: int | None = None,
                 section: str | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        if section is not None:
            message = f"{message} [section {section}]"
        super().__init__(message)
        self.offset = offset
        self.section = section


class ChecksumError(FormatError):
    """A section checksum does not match its table entry."""


class UnsupportedVersionError(FormatError):
    """The file's format version is not supported by this build."""
