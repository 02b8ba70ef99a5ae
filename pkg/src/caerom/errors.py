"""Exception hierarchy shared across the package."""


class CaeRomError(Exception):
    """Base class for all package errors."""


class DimensionError(CaeRomError, ValueError):
    """Array shapes do not agree with what an operation expects."""


class ConfigurationError(CaeRomError, ValueError):
    """A layer, solver or pipeline configuration is invalid."""


class StateError(CaeRomError, RuntimeError):
    """An operation was called in the wrong state (e.g. backward before forward)."""


class TrainingError(CaeRomError, RuntimeError):
    """Training produced non-finite values."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SolverError(CaeRomError, RuntimeError):
    """A high-fidelity solver failed to converge."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class GeometryError(CaeRomError, ValueError):
    """Mesh geometry cannot be meshed conformingly."""


class AssemblyError(CaeRomError, RuntimeError):
    """Global system assembly produced a singular operator."""


class MetricError(CaeRomError, ValueError):
    """An error metric is undefined for the given input."""


class CompatibilityError(CaeRomError, ValueError):
    """Two checkpoints (or a checkpoint and a dataset) do not fit together."""


class FormatError(CaeRomError, ValueError):
    """A persisted file is corrupt or has an unsupported layout."""


class StageError(CaeRomError, RuntimeError):
    """A pipeline stage failed; ``cause`` holds the original exception."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
