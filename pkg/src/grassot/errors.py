"""Exception types raised across the package.

Every error derives from :class:`GrassotError`, itself a ``ValueError``, so
callers that only care about "bad input" can catch the builtin.
"""


class GrassotError(ValueError):
    """Base class for all package errors."""


class NonFinite(GrassotError):
    pass


class NotHermitian(GrassotError):
    pass


class NotTangent(GrassotError):
    pass


class NotProjection(GrassotError):
    pass


class RankMismatch(GrassotError):
    pass


class CutLocus(GrassotError):
    """Raised when a pair of subspaces has a principal angle at (or numerically
    indistinguishable from) pi/2, where minimal geodesics are not unique."""


class BaseMismatch(GrassotError):
    pass


class NotSubprojection(GrassotError):
    pass


class InvalidDensity(GrassotError):
    pass


class NotPSD(InvalidDensity):
    pass


class NotNormalized(GrassotError):
    pass


class BadFrame(GrassotError):
    pass


class BadPartition(GrassotError):
    pass


class DimMismatch(GrassotError):
    pass


class ZeroVector(GrassotError):
    pass


class Infeasible(GrassotError):
    pass


class InfiniteCost(Infeasible):
    pass


class SupportMismatch(GrassotError):
    pass


class NotOrthogonalPath(GrassotError):
    pass


class NotBijective(GrassotError):
    pass


class NotSubordinate(GrassotError):
    pass


class NotRepresentation(GrassotError):
    pass


class BadDimension(GrassotError):
    pass


class ParseError(GrassotError):
    """Input file could not be decoded; carries the offending path/field."""

    def __init__(self, message, path=None, field=None):
        super().__init__(message)
        self.path = path
        self.field = field


class ValidationError(ParseError):
    """Input decoded but violates a type invariant."""


class AssertionFailure(GrassotError):
    """A computed result violated an invariant the report asserts."""

    def __init__(self, message, path=None, field=None):
        super().__init__(message)
        self.path = path
        self.field = field
