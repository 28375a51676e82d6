"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Arrays and grids (or partitions) that do not fit together."""


class NumericalError(ArithmeticError):
    """A linear solve or quadrature that did not reach its tolerance."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConvergenceError(NumericalError):
    """Newton iteration gave up; carries the last residual and the step index."""

    def __init__(self, message, residual, step=None, **diagnostics):
        super().__init__(message, residual=residual, step=step, **diagnostics)
        self.residual = residual
        self.step = step


class ResolutionError(ValueError):
    """Grid too coarse for the requested sampling."""
