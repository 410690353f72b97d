"""Exception types shared across the package.

The CLI maps these onto process exit codes (2 config, 3 infeasible, 4 solver).
"""


class SimError(Exception):
    """Base class for all package errors."""


class ConfigError(SimError, ValueError):
    """Invalid or unknown configuration parameter."""


class DomainError(SimError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class InfeasibleError(SimError):
    """No assignment matrix satisfies the row/column constraints."""


class SolverError(SimError):
    """A numerical solver failed to reach its termination criterion."""


class IterationLimitError(SolverError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateChannelError(SimError):
    """Effective channel is identically zero, so no scaling can be fitted."""


class InstanceTooLargeError(SimError):
    """Exhaustive search requested on an instance above the size cap."""
