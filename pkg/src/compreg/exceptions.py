"""Exception hierarchy.

Three families so the CLI can map failures to exit codes: configuration
problems (exit 2), bad or unusable data (exit 3), numerical failures (exit 4).
"""


class CompregError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CompregError):
    """Invalid configuration: bad grids, roles, or option combinations."""


class DataError(CompregError):
    """Input data violates a precondition."""


class NumericError(CompregError):
    """A numerical procedure cannot proceed (singularity, rank loss)."""


# -- data errors --------------------------------------------------------------

class AllZeroVector(DataError):
    """A raw vector sums to zero and cannot be closed."""


class NegativePart(DataError):
    """A compositional part is negative."""


class InvalidDimension(DataError):
    """Fewer than two components."""


class ZeroPart(DataError):
    """A zero part where a log-ratio transform needs strict positivity."""


class ZeroWithNonpositiveAlpha(DataError):
    """Zero parts require a strictly positive power parameter."""


class AlphaIsZero(ConfigError):
    """The power transform is undefined at zero; use the ilr limit explicitly."""


class OutOfRange(DataError):
    """A coordinate vector lies outside the image of the transform."""


class FittedZero(DataError):
    """A fitted part is zero where the observed part is positive."""


class AllZeroComponent(DataError):
    """A component is zero in every row; no detection limit exists."""


class ReplacementExceedsUnity(DataError):
    """Zero replacements in one row sum to one or more."""


class TooFewRows(DataError):
    """Not enough rows for the requested fit."""


class DimensionMismatch(DataError):
    """Matrix or batch dimensions do not agree."""


class LabelMismatch(DataError):
    """Component labels differ between model and data."""


class UnknownFactorLevel(DataError):
    """A factor level absent from the training data."""


class ParseError(DataError):
    """A CSV cell failed to parse; message carries row/column location."""


class MissingColumn(DataError):
    """A role refers to a column that is not in the file."""


class EmptyData(DataError):
    """No data rows."""


# -- config errors -------------------------------------------------------------

class FoldTooSmall(ConfigError):
    """Fold layout incompatible with the data (folds, stratification)."""


# -- numeric errors ------------------------------------------------------------

class SingularCovariance(NumericError):
    """Covariance estimate is singular even after ridge jitter."""


class RankDeficientDesign(NumericError):
    """Design matrix is not of full column rank."""


class SingularScores(NumericError):
    """Score regression design is singular."""


class DegenerateVariance(NumericError):
    """Response is constant; coefficient of determination undefined."""
