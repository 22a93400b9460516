"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class TumblerError(Exception):
    """Base class for all library errors."""


class DomainError(TumblerError, ValueError):
    """A point or parameter lies outside its admissible domain."""


class NoBulkEntry(TumblerError, ArithmeticError):
    """The streamline through a point has no bulk portion."""


class NonSymmetricParams(TumblerError, ValueError):
    """An operation that needs equal layer depths got unequal ones."""


class EmptyIntersection(TumblerError):
    """The requested period-one curve does not exist for these parameters."""


class StencilError(TumblerError):
    """A finite-difference stencil could not be evaluated safely."""


class StencilOutsideDomain(StencilError, DomainError):
    """A stencil point left the filled hemisphere."""


class StencilStraddlesInterface(StencilError):
    """Stencil points fall in different flow regions, so the map is not smooth there."""


class DefectiveMatrixError(TumblerError, ArithmeticError):
    """A repeated eigenvalue lacks a full set of eigenvectors."""


class NotHyperbolic(TumblerError, ValueError):
    """The point is not a normally hyperbolic fixed point."""


class AlphaTooLarge(TumblerError, ValueError):
    """The fundamental-domain offset is too large for the linearization."""


class NoEllipticPoint(TumblerError, ValueError):
    """The requested shell carries no elliptic fixed point."""
