"""Exception hierarchy shared across the package."""


class CoefRandError(ValueError):
    """Base class for all errors raised by coefrand."""


class InvalidDataset(CoefRandError):
    pass


class DegenerateRegressor(CoefRandError):
    """The predictor has no usable variation (e.g. all zeros)."""


class ZeroResidualVariance(CoefRandError):
    pass


class ZeroDenominator(CoefRandError):
    pass


class SingularGram(CoefRandError):
    """x and x**2 are collinear so the second-stage regression is undefined."""


class TruncationTooLarge(CoefRandError):
    pass


class ZeroLongRunVariance(CoefRandError):
    pass


class InvalidConfig(CoefRandError):
    pass


class UnknownPreset(CoefRandError):
    pass


class EmptyGrid(CoefRandError):
    pass


class UnsupportedAlpha(CoefRandError):
    pass


class ProductSubsamplingRejected(CoefRandError):
    """Subsampling inference for the Product statistic is asymptotically oversized."""


class TooManyDroppedWindows(CoefRandError):
    pass


class InvalidCorrelation(CoefRandError):
    pass


class DegenerateSeries(CoefRandError):
    pass


class MissingColumn(CoefRandError):
    pass


class NonNumericCell(CoefRandError):
    pass


class MisalignedDates(CoefRandError):
    pass


class InvalidCell(CoefRandError):
    """A Monte Carlo cell lost too many replications to be reported."""


class NonConvergenceWarning(UserWarning):
    """The optimizer hit its iteration cap; the result is still returned."""
