"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file could not be parsed (bad magic, wrong bit depth, color data, ...)."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    Carries the best achieved figure of merit (residual or terminal defect)
    so callers can report how far the solve got.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
