"""Exception and warning types raised across the package."""


class DimensionMismatch(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


class ParseError(ValueError):
    """Malformed Matrix Market input. ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class UnsupportedFormat(ValueError):
    pass


class NoConvergence(RuntimeError):
    """A dense kernel hit its iteration cap."""


class NotConverged(RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    The best-effort iterate is kept on the exception so callers can decide
    whether it is good enough.
    """

    def __init__(self, message, partial=None, residuals=None, iterations=None):
        super().__init__(message)
        self.partial = partial
        self.residuals = residuals
        self.iterations = iterations


class NotPositiveDefinite(RuntimeError):
    """A CG quadratic form went nonpositive; usually the shift is too small."""


class RankDeficient(UserWarning):
    """Fewer numerically independent directions were found than requested."""

    def __init__(self, message, achieved_rank=0, requested_rank=0):
        super().__init__(message)
        self.achieved_rank = achieved_rank
        self.requested_rank = requested_rank


class TruncatedResult(UserWarning):
    """Numerically zero Ritz values were dropped from an update."""
