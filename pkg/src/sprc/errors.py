"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent dimensions, invalid parameters or malformed config."""


class NotReadyError(RuntimeError):
    """Requested quantity needs more history than has been recorded."""


class ConditioningError(RuntimeError):
    """Square-root factor lost positive definiteness (tiny diagonal)."""


class InfeasibleError(RuntimeError):
    """Constraint set admits no feasible point."""


class RunAborted(RuntimeError):
    """Closed-loop run stopped early (e.g. an infeasibility streak)."""
