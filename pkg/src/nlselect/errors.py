"""Exception types raised across the package."""


class NLSelectError(ValueError):
    """Base class for all package errors."""


class ZeroCoefficient(NLSelectError):
    """A coefficient sits on the pole of the non-local prior (beta_i == 0)."""


class NonPositiveScale(NLSelectError):
    """A scale parameter (tau or sigma^2) is not strictly positive."""


class NonConvergence(NLSelectError):
    """Newton iterations hit the cap without meeting the gradient tolerance."""


class SingularDesign(NLSelectError):
    """The restricted design matrix is numerically rank deficient."""


class ModelTooLarge(NLSelectError):
    """Requested model exceeds the admissible size cap."""


class EmptySet(NLSelectError):
    """An operation needing at least one scored model got none."""


class DimensionTooLarge(NLSelectError):
    """The exact oracle only covers models with at most two coefficients."""


class NonConvergedQuadrature(NLSelectError):
    """The integration box could not be made to contain the integrand mass."""


class MalformedCsv(NLSelectError):
    """Input CSV is not a rectangular numeric table with a header row."""


class ZeroVarianceColumn(NLSelectError):
    """One or more design columns are constant."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"zero-variance column(s): {', '.join(map(str, self.columns))}")


class MissingColumn(NLSelectError):
    """The requested response column is not present in the header."""
