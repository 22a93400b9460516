"""Dimensionless tumbler geometry, layer shape, streamfunctions and regions.

The tumbler is the unit sphere, half full, with the free surface at ``y = 0``.
Rotation about an axis produces a thin lens-shaped flowing layer on the free
surface and solid-body rotation in the bulk below it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi

#: Tolerance for boundary tags in :func:`classify_region`.
TOL_REGION = 1e-12
#: Points this far outside the sphere are errors; closer ones are projected.
TOL_WALL = 1e-9
#: A seed with ``y`` above ``-TOL_RIM`` and ``x^2+z^2`` above ``1 - TOL_RIM``
#: sits on the rim corner, where the flow is ambiguous.
TOL_RIM = 1e-12


class Axis(enum.Enum):
    """Rotation axis of a single stage of the protocol."""

    Z = "z"
    X = "x"

    @property
    def other(self) -> "Axis":
        return Axis.X if self is Axis.Z else Axis.Z


class RegionTag(enum.Enum):
    """Flow region of a point for a given rotation axis."""

    BULK = "Bulk"
    FLOWING_LAYER = "FlowingLayer"
    FREE_SURFACE_BOUNDARY = "FreeSurfaceBoundary"
    INTERFACE_BOUNDARY = "InterfaceBoundary"
    OUTSIDE = "Outside"


class Point3(NamedTuple):
    """Tracer position in the filled hemisphere (tumbler radius 1)."""

    x: float
    y: float
    z: float

    @property
    def r(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Point3":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class ProtocolParams:
    """The four protocol numbers of the blinking tumbler.

    Parameters
    ----------
    eps_z, eps_x : float
        Maximal layer depth for rotation about z and x, in ``(0, 0.5]``.
    theta_z, theta_x : float
        Rotation angle per stage in radians, in ``[0, 2*pi]``. A zero angle
        switches the stage off, which gives the integrable single-axis limit.
    """

    eps_z: float = 0.15
    eps_x: float = 0.15
    theta_z: float = math.pi
    theta_x: float = math.pi

    def __post_init__(self):
        for name in ("eps_z", "eps_x"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 < v <= 0.5):
                raise DomainError(f"{name}={v!r} must lie in (0, 0.5]")
        for name in ("theta_z", "theta_x"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= TWO_PI):
                raise DomainError(f"{name}={v!r} must lie in [0, 2*pi]")

    def symmetric(self) -> bool:
        """True iff both axes have exactly the same layer depth."""
        return self.eps_z == self.eps_x

    def eps(self, axis: Axis) -> float:
        return self.eps_z if axis is Axis.Z else self.eps_x

    def theta(self, axis: Axis) -> float:
        return self.theta_z if axis is Axis.Z else self.theta_x

    def swapped(self) -> "ProtocolParams":
        """Parameters with the roles of the two axes exchanged."""
        return ProtocolParams(self.eps_x, self.eps_z, self.theta_x, self.theta_z)

    @property
    def eps_max(self) -> float:
        return max(self.eps_z, self.eps_x)

    def with_angles(self, theta_z: float, theta_x: float) -> "ProtocolParams":
        return replace(self, theta_z=theta_z, theta_x=theta_x)

    def as_dict(self) -> dict:
        return {"eps_z": self.eps_z, "eps_x": self.eps_x,
                "theta_z": self.theta_z, "theta_x": self.theta_x}


def to_frame(axis: Axis, x, y, z):
    """Map coordinates to the axis frame ``(u, y, held)``.

    For ``Axis.Z`` the in-plane horizontal coordinate is ``x`` and ``z`` is
    held; for ``Axis.X`` the roles of ``x`` and ``z`` are exchanged.
    """
    if axis is Axis.Z:
        return x, y, z
    return z, y, x


from_frame = to_frame  # the swap is an involution


def flowing_layer_depth(p: ProtocolParams, a: Axis, x: float, z: float) -> float:
    """Layer depth ``eps_a * sqrt(1 - x^2 - z^2)`` below the free surface."""
    s = x * x + z * z
    if s > 1.0:
        if s - 1.0 > TOL_WALL:
            raise DomainError(f"(x, z)=({x!r}, {z!r}) lies outside the unit disk")
        return 0.0
    return p.eps(a) * math.sqrt(1.0 - s)


def classify_region(p: ProtocolParams, a: Axis, pt, tol: float = TOL_REGION) -> RegionTag:
    """Tag a point as bulk, layer, boundary or outside for rotation about ``a``.

    The free surface ``y = 0`` takes precedence over the interface where the
    two meet at the rim.
    """
    x, y, z = (float(c) for c in pt)
    r2 = x * x + y * y + z * z
    if not (math.isfinite(r2)) or r2 > 1.0 + tol or y > tol:
        return RegionTag.OUTSIDE
    s = min(x * x + z * z, 1.0)
    delta = p.eps(a) * math.sqrt(1.0 - s)
    if abs(y) <= tol:
        return RegionTag.FREE_SURFACE_BOUNDARY
    if abs(y + delta) <= tol:
        return RegionTag.INTERFACE_BOUNDARY
    if y < -delta:
        return RegionTag.BULK
    return RegionTag.FLOWING_LAYER


def in_layer_mask(eps: float, pts: np.ndarray, axis: Axis) -> np.ndarray:
    """Vectorized test ``y >= -delta`` (layer or interface) for an ``(N, 3)`` array."""
    u, y, h = to_frame(axis, pts[:, 0], pts[:, 1], pts[:, 2])
    delta = eps * np.sqrt(np.clip(1.0 - u * u - h * h, 0.0, None))
    return y >= -delta


def streamfunction(p: ProtocolParams, a: Axis, pt) -> float:
    """Streamfunction of the active branch at ``pt``.

    Layer: ``(delta*y + y^2/2) / eps^2``; bulk: ``(u^2 + y^2)/2`` with ``u`` the
    in-plane horizontal coordinate. Boundary points use the layer branch.
    """
    tag = classify_region(p, a, pt)
    if tag is RegionTag.OUTSIDE:
        raise DomainError(f"point {tuple(pt)!r} is outside the filled hemisphere")
    u, y, h = to_frame(a, float(pt[0]), float(pt[1]), float(pt[2]))
    if tag is RegionTag.BULK:
        return 0.5 * (u * u + y * y)
    eps = p.eps(a)
    delta = eps * math.sqrt(max(1.0 - u * u - h * h, 0.0))
    return (delta * y + 0.5 * y * y) / (eps * eps)


def bulk_radius(pt) -> float:
    return math.sqrt(float(pt[0]) ** 2 + float(pt[1]) ** 2 + float(pt[2]) ** 2)


def sanitize_points(pts, reject_rim: bool = False) -> np.ndarray:
    """Check an ``(N, 3)`` array against the filled hemisphere.

    Points outside the sphere by more than ``TOL_WALL`` raise; closer ones are
    projected radially onto the wall. Tiny positive ``y`` is clamped to zero.
    """
    a = np.array(pts, dtype=float, copy=True)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[1] != 3:
        raise DomainError("points must have three coordinates")
    if not np.all(np.isfinite(a)):
        raise DomainError("points must be finite")
    r = np.sqrt(np.einsum("ij,ij->i", a, a))
    bad = r - 1.0 > TOL_WALL
    if np.any(bad):
        raise DomainError(f"point {tuple(a[np.argmax(bad)])!r} lies outside the sphere")
    over = r > 1.0
    if np.any(over):
        a[over] /= r[over, None]
    if np.any(a[:, 1] > TOL_WALL):
        raise DomainError("points must satisfy y <= 0 (filled half)")
    a[:, 1] = np.minimum(a[:, 1], 0.0)
    if reject_rim:
        rim = (a[:, 1] >= -TOL_RIM) & (a[:, 0] ** 2 + a[:, 2] ** 2 >= 1.0 - TOL_RIM)
        if np.any(rim):
            raise DomainError("seeds on the rim corner (y = 0, x^2 + z^2 = 1) are not supported")
    return a[0] if single else a
