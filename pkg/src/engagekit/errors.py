"""Exception hierarchy shared across the package.

CLI exit codes map onto these classes: config errors exit 2, data errors
exit 3, numeric failures exit 4.
"""


class EngageError(Exception):
    """Base class for all engagekit errors."""


class ConfigError(EngageError):
    """Invalid run configuration (unknown keys, bad values)."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ValidationError(EngageError):
    """A domain invariant was violated; names the offending field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class FormatError(EngageError):
    """On-disk container could not be parsed."""

    BAD_MAGIC = "bad_magic"
    BAD_VERSION = "bad_version"
    TRUNCATED = "truncated"
    CORRUPT = "corrupt"

    def __init__(self, code, message):
        self.code = code
        super().__init__(f"[{code}] {message}")


class DegeneracyError(EngageError):
    """Geometric input is degenerate (e.g. all points collinear)."""


class ShapeError(EngageError):
    """Array arguments have incompatible shapes."""


class FingerprintMismatchError(EngageError):
    """Checkpoint was produced by a different architecture."""


class UndefinedMetricError(EngageError):
    """Metric is undefined for the given inputs (e.g. single-class AUC)."""


class DivergenceError(EngageError):
    """Training produced a non-finite loss."""
