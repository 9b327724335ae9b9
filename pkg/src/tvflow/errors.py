class TVFlowError(Exception):
    """Base class for errors raised by this package."""


class SolverError(TVFlowError):
    """An iterative solver failed; ``residual`` and ``where`` carry diagnostics."""

    def __init__(self, message, residual=None, where=None):
        super().__init__(message)
        self.residual = residual
        self.where = where


class NonConvergenceError(SolverError):
    pass


class ConstructionError(TVFlowError):
    """A geometric object violates one of its invariants."""


class ResolutionError(ConstructionError):
    """The grid is too coarse for the requested construction."""


class BlowUpError(TVFlowError):
    def __init__(self, message, step=None, node=None):
        super().__init__(message)
        self.step = step
        self.node = node


class BarrierFailure(TVFlowError):
    def __init__(self, message, margin=None, node=None):
        super().__init__(message)
        self.margin = margin
        self.node = node


class ConfigError(TVFlowError):
    pass
