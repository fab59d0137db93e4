"""Exception types shared across the package.

The CLI maps these onto process exit codes, so solver and I/O code should
raise the most specific type that applies rather than bare ValueError.
"""


class NetReserveError(Exception):
    """Base class for all package errors."""


class DomainError(NetReserveError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class StructureError(NetReserveError, ValueError):
    """A topology or reservation references ids inconsistently."""


class ConfigError(NetReserveError, ValueError):
    """A run configuration or input file fails schema validation."""


class ConvergenceError(NetReserveError, RuntimeError):
    """An iterative solve hit its iteration cap before its tolerance.

    Carries the best iterate found so diagnostics and partial reports can
    still be produced by callers that choose to continue.
    """

    def __init__(self, message, residual=None, iterations=None, best=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.best = best
