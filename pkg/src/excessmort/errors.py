"""Exception and warning classes shared across the toolkit."""


class ExcessMortError(Exception):
    """Base class for all toolkit errors."""


class DataError(ExcessMortError, ValueError):
    """Input data violates a structural requirement."""


class ParseError(DataError):
    pass


class GapError(DataError):
    pass


class RangeError(DataError):
    pass


class MissingYearError(DataError):
    pass


class MissingPointError(DataError):
    pass


class ZeroSigmaError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class WindowError(DataError):
    """Window months missing from predictions/observations, or overlapping the fit."""


class LeakageError(WindowError):
    """An excess window reaches into the years the baseline was fitted on."""


class ContextError(DataError):
    """A prediction needs an observed value that is not available."""


class SamplerWarning(UserWarning):
    pass


class DivergenceWarning(SamplerWarning):
    pass


class ConvergenceWarning(SamplerWarning):
    pass
