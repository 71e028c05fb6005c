"""Exception taxonomy shared across the package.

Every failure path raises one of these so callers (CLI, service) can map
errors to diagnostics and exit codes without string matching.
"""


class GeortError(Exception):
    """Base class for all package errors."""


class ChainParseError(GeortError):
    """Hand description document is malformed. Carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFeatureError(GeortError):
    """Document uses a feature outside the supported subset (e.g. prismatic joints)."""


class ChainStructureError(GeortError):
    """Link graph is not a tree rooted at the wrist."""


class UnknownFingerError(GeortError, KeyError):
    """Finger id not declared by the chain."""


class ShapeError(GeortError, ValueError):
    """Array dimensions do not match the declared interface."""


class ContractError(GeortError, ValueError):
    """An operation was called outside its contract (empty batch, non-scalar output, ...)."""


class DegeneracyError(GeortError):
    """Too many samples were numerically degenerate to produce a meaningful value."""


class ConfigError(GeortError, ValueError):
    """Invalid or incomplete configuration."""


class DataError(GeortError):
    """Dataset cannot support the requested operation (e.g. single-class labels)."""


class QualityError(GeortError):
    """A trained component missed its quality gate; training was aborted."""


class TrainingDivergenceError(GeortError):
    """Loss or gradient became non-finite. Names the offending term when known."""

    def __init__(self, message: str, term: str | None = None):
        self.term = term
        super().__init__(message if term is None else f"{message} (term: {term})")


class SchemaError(GeortError):
    """A data file violates its schema. Carries line/field context when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        ctx = []
        if line is not None:
            ctx.append(f"line {line}")
        if field is not None:
            ctx.append(f"field {field!r}")
        if ctx:
            message = f"{', '.join(ctx)}: {message}"
        super().__init__(message)


class UnitsError(GeortError):
    """Coordinates look implausible for meters (likely a millimeter file)."""


class CheckpointFormatError(GeortError):
    """Checkpoint file is corrupt or not a checkpoint."""


class CheckpointVersionError(GeortError):
    """Checkpoint was written by a newer format version; upgrade required."""


class InferenceRequestError(GeortError, ValueError):
    """A single inference request was rejected; the session stays usable."""
