"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """A precondition on the arguments was violated."""


class ResolutionError(InvalidInput):
    """The grid is too coarse for the requested cube, radius or annulus."""


class InternalDefect(RuntimeError):
    """A guaranteed construction failed; indicates a bug, not bad input."""


class ConvergenceError(RuntimeError):
    """An iterative method did not reach its tolerance."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket
