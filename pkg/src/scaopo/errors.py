"""Exception types shared across the package."""


class ScaopoError(Exception):
    """Base class for package errors."""


class ConfigurationError(ScaopoError):
    """A parameter or config value violates its contract."""


class NotReadyError(ScaopoError):
    """An estimate was requested before the replay window filled up."""


class ContractViolationError(ScaopoError):
    """An action or state handed to an environment breaks its contract."""


class DegenerateDualError(ScaopoError):
    """Dual weights produced a non-convex (zero-curvature) inner problem."""


class CheckpointError(ScaopoError):
    """A checkpoint file is missing fields or has an unknown version."""
