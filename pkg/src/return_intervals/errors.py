"""Exception hierarchy shared by all pipeline stages."""


class AnalysisError(Exception):
    """Base class for hard errors raised by the pipeline."""


class TickFormatError(AnalysisError):
    """Input file has an unreadable or unexpected header."""


class MalformedDataError(AnalysisError):
    """Too many malformed rows; the file is probably not what was expected."""


class DomainError(AnalysisError, ValueError):
    """A parameter lies outside the domain where the operation is defined."""


class DegenerateSeriesError(AnalysisError):
    """Series carries no variation (e.g. all-zero volatility)."""


class InsufficientDataError(AnalysisError):
    """Not enough points for an estimate.

    The offending count is kept on ``count`` so callers can tally it.
    """

    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count


class DegenerateRegressorError(AnalysisError, ValueError):
    """Regressor has zero variance so the slope is undefined."""


class MissingSectionError(AnalysisError):
    """A report lacks the analysis a figure table needs."""


class StageError(AnalysisError):
    """Hard failure inside a named pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
