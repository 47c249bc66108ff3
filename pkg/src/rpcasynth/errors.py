"""Exception hierarchy.

``ValidationError`` covers bad input (malformed files, broken panel
invariants, impossible arguments). ``NumericalError`` covers failures that
happen while computing on valid input. The CLI maps them to distinct exit
codes.
"""


class RpcaSynthError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RpcaSynthError, ValueError):
    pass


class NumericalError(RpcaSynthError, ArithmeticError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = iteration
        self.message = message
        super().__init__(message or f"non-finite iterate at iteration {iteration}")

    def __reduce__(self):
        return type(self), (self.iteration, self.message)


class NoDonorsError(NumericalError):
    pass


class StageError(RpcaSynthError):
    """Wraps an error raised inside one stage of the pipeline."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")

    # results of worker processes travel by pickle
    def __reduce__(self):
        return type(self), (self.stage, self.cause)
