"""The blinking-protocol map, its inverse and its local linearization.

One period of the protocol rotates the tumbler by ``theta`` about the first
axis and then by ``theta`` about the second. Each stage is the exact
single-axis flow, so the composite map is exact up to round-off.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DefectiveMatrixError, DomainError, StencilOutsideDomain, StencilStraddlesInterface
from .geometry import Axis, Point3, ProtocolParams, in_layer_mask, sanitize_points
from .trajectory import advance_points

DEFAULT_H = 1e-6


class MapOrder(enum.Enum):
    """Which axis rotates first within one protocol period."""

    Z_FIRST = "ZFirst"
    X_FIRST = "XFirst"

    @property
    def axes(self) -> tuple[Axis, Axis]:
        return (Axis.Z, Axis.X) if self is MapOrder.Z_FIRST else (Axis.X, Axis.Z)


class StabilityClass(enum.Enum):
    NORMALLY_HYPERBOLIC = "NormallyHyperbolic"
    NORMALLY_ELLIPTIC = "NormallyElliptic"
    PARABOLIC = "Parabolic"
    NON_FIXED = "NonFixed"


def map_points(p: ProtocolParams, order: MapOrder, pts: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Apply one protocol period (or its inverse) to an ``(N, 3)`` array."""
    first, second = order.axes
    if not inverse:
        q = advance_points(p, first, pts, p.theta(first))
        return advance_points(p, second, q, p.theta(second))
    q = advance_points(p, second, pts, -p.theta(second))
    return advance_points(p, first, q, -p.theta(first))


def _one(pt) -> np.ndarray:
    return sanitize_points(np.asarray(pt, dtype=float).reshape(3), reject_rim=True)[None, :]


def apply_map(p: ProtocolParams, order: MapOrder, pt) -> Point3:
    """Position after one full period of the protocol."""
    return Point3.from_array(map_points(p, order, _one(pt))[0])


def apply_inverse_map(p: ProtocolParams, order: MapOrder, pt) -> Point3:
    """Exact inverse of :func:`apply_map`."""
    return Point3.from_array(map_points(p, order, _one(pt), inverse=True)[0])


def iterate(p: ProtocolParams, order: MapOrder, pt, n: int, inverse: bool = False) -> np.ndarray:
    """Orbit ``[pt, Q(pt), ..., Q^n(pt)]`` as an ``(n+1, 3)`` array."""
    if n < 0:
        raise DomainError("n must be non-negative")
    out = np.empty((n + 1, 3))
    out[0] = _one(pt)[0]
    for k in range(n):
        out[k + 1] = map_points(p, order, out[k:k + 1], inverse=inverse)[0]
    return out


def iterate_many(p: ProtocolParams, order: MapOrder, pts, n: int, inverse: bool = False) -> np.ndarray:
    """Orbits of many seeds at once, shape ``(n+1, N, 3)``."""
    pts = sanitize_points(np.atleast_2d(pts), reject_rim=True)
    out = np.empty((n + 1,) + pts.shape)
    out[0] = pts
    for k in range(n):
        out[k + 1] = map_points(p, order, out[k], inverse=inverse)
    return out


# Jacobian -------------------------------------------------------------------


@dataclass(frozen=True)
class Jacobian3:
    matrix: np.ndarray
    h: float

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


def stage_regions(p: ProtocolParams, order: MapOrder, pts: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Layer membership at the start and end of each stage, shape ``(N, 4)``."""
    first, second = order.axes
    pts = np.atleast_2d(pts)
    if not inverse:
        mid = advance_points(p, first, pts, p.theta(first))
        end = advance_points(p, second, mid, p.theta(second))
        pairs = ((pts, first), (mid, first), (mid, second), (end, second))
    else:
        mid = advance_points(p, second, pts, -p.theta(second))
        end = advance_points(p, first, mid, -p.theta(first))
        pairs = ((pts, second), (mid, second), (mid, first), (end, first))
    return np.stack([in_layer_mask(p.eps(a), q, a) for q, a in pairs], axis=1)


def jacobian_fd(p: ProtocolParams, order: MapOrder, pt, h: float = DEFAULT_H,
                inverse: bool = False) -> Jacobian3:
    """Central-difference Jacobian of the map on the six-point stencil.

    Raises
    ------
    StencilOutsideDomain
        If a stencil point leaves the filled hemisphere.
    StencilStraddlesInterface
        If stencil points fall in different flow regions at the start or end
        of a stage, where the map is continuous but not differentiable.
    """
    c = np.asarray(pt, dtype=float).reshape(3)
    stencil = np.vstack([c, c + h * np.eye(3), c - h * np.eye(3)])
    r2 = np.einsum("ij,ij->i", stencil, stencil)
    if np.any(r2 > 1.0) or np.any(stencil[:, 1] > 0.0):
        raise StencilOutsideDomain(f"stencil of half-width {h:g} around {tuple(c)} leaves the hemisphere")
    regions = stage_regions(p, order, stencil, inverse=inverse)
    if np.any(regions != regions[0]):
        raise StencilStraddlesInterface(f"stencil around {tuple(c)} crosses a layer interface")
    images = map_points(p, order, stencil, inverse=inverse)
    J = (images[1:4] - images[4:7]).T / (2.0 * h)
    return Jacobian3(J, h)


# eigen-analysis ---------------------------------------------------------------


@dataclass
class EigenDecomposition:
    """Eigenvalues and matched unit eigenvectors of a 3x3 matrix.

    ``values[0]`` is the eigenvalue closest to 1; ``vectors[:, k]`` belongs to
    ``values[k]``.
    """

    values: np.ndarray
    vectors: np.ndarray
    classification: StabilityClass = StabilityClass.NON_FIXED
    info: dict = field(default_factory=dict)

    @property
    def product(self) -> complex:
        return complex(np.prod(self.values))


def _cubic_real_root(a: float, b: float, c: float) -> float:
    """One real root of ``l^3 + a l^2 + b l + c``, the largest in magnitude if several."""
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    D = q * q / 4.0 + p ** 3 / 27.0
    if D > 0.0:
        s = math.sqrt(D)
        t = np.cbrt(-q / 2.0 + s) + np.cbrt(-q / 2.0 - s)
        roots = [float(t)]
    elif p * math.sqrt(abs(p)) == 0.0:
        roots = [float(np.cbrt(-q))]  # also covers underflow of p
    else:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = max(-1.0, min(1.0, 3.0 * q / (p * m)))
        phi = math.acos(arg) / 3.0
        roots = [m * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]
    lam = max((t - a / 3.0 for t in roots), key=abs)
    for _ in range(3):
        f = ((lam + a) * lam + b) * lam + c
        df = (3.0 * lam + 2.0 * a) * lam + b
        if df == 0.0:
            break
        step = f / df
        lam -= step
        if abs(step) <= 1e-16 * max(1.0, abs(lam)):
            break
    return lam


def _quadratic_roots(e: float, f: float) -> tuple[complex, complex]:
    """Roots of ``l^2 + e l + f`` with the cancellation-free formula."""
    disc = e * e - 4.0 * f
    if disc >= 0.0:
        s = math.sqrt(disc)
        q = -0.5 * (e + math.copysign(s, e))
        if q == 0.0:
            return 0.0 + 0j, 0.0 + 0j
        return complex(q), complex(f / q)
    s = math.sqrt(-disc)
    return complex(-0.5 * e, 0.5 * s), complex(-0.5 * e, -0.5 * s)


def _null_vectors(M: np.ndarray, mult: int, scale: float, tol: float) -> list[np.ndarray]:
    rows = [M[i] for i in range(3)]
    crosses = [np.cross(rows[i], rows[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    norms = [np.linalg.norm(v) for v in crosses]
    k = int(np.argmax(norms))
    rank2 = norms[k] > tol * scale * scale
    if rank2:
        if mult > 1:
            raise DefectiveMatrixError("repeated eigenvalue with a one-dimensional eigenspace")
        v = crosses[k]
        return [v / np.linalg.norm(v)]
    rnorms = [np.linalg.norm(r) for r in rows]
    j = int(np.argmax(rnorms))
    if rnorms[j] <= tol * scale:
        basis = np.eye(3, dtype=complex)
        return [basis[:, i] for i in range(mult)]
    if mult > 2:
        raise DefectiveMatrixError("triple eigenvalue with a two-dimensional eigenspace")
    r = np.conj(rows[j])
    r = r / np.linalg.norm(r)
    trial = np.eye(3, dtype=complex)[int(np.argmin(np.abs(r)))]
    v1 = trial - np.vdot(r, trial) * r
    v1 /= np.linalg.norm(v1)
    v2 = np.cross(np.conj(r), np.conj(v1))
    v2 = np.conj(v2)
    v2 /= np.linalg.norm(v2)
    return [v1, v2][:mult] if mult > 1 else [v1]


def eigen_3x3(J, tol: float = 1e-10, classify_tol: float = 1e-3) -> EigenDecomposition:
    """Closed-form eigenvalues and eigenvectors of a real 3x3 matrix.

    The characteristic cubic is solved for one real root, which is deflated to
    a quadratic for the remaining pair. Eigenvectors come from cross products
    of rows of ``J - lambda I``.

    Raises
    ------
    DefectiveMatrixError
        If a repeated eigenvalue has fewer independent eigenvectors than its
        multiplicity.
    """
    M = np.asarray(J.matrix if isinstance(J, Jacobian3) else J, dtype=float)
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise DomainError("expected a finite 3x3 matrix")
    tr = float(np.trace(M))
    minors = (M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
              + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
              + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
    det = float(np.linalg.det(M))
    a, b, c = -tr, float(minors), -det
    r = _cubic_real_root(a, b, c)
    e = a + r
    f = b + r * e
    l2, l3 = _quadratic_roots(e, f)
    vals = [complex(r), l2, l3]
    vals.sort(key=lambda v: abs(v - 1.0))
    scale = max(float(np.max(np.abs(M))), 1.0)
    vecs: list[np.ndarray | None] = [None, None, None]
    done = [False] * 3
    for i in range(3):
        if done[i]:
            continue
        group = [j for j in range(3) if not done[j] and abs(vals[j] - vals[i]) <= 1e3 * tol * scale]
        lam = sum(vals[j] for j in group) / len(group)
        basis = _null_vectors(M.astype(complex) - lam * np.eye(3), len(group), scale, tol)
        for j, v in zip(group, basis):
            k = int(np.argmax(np.abs(v)))
            v = v * (abs(v[k]) / v[k])  # fix the phase so the largest entry is real positive
            vecs[j] = v / np.linalg.norm(v)
            done[j] = True
    values = np.array(vals, dtype=complex)
    vectors = np.column_stack(vecs)
    if np.all(np.abs(values.imag) == 0.0):
        values = values.real.astype(complex)
    if np.all(np.abs(vectors.imag) == 0.0):
        vectors = vectors.real
    out = EigenDecomposition(values, vectors)
    out.classification = classify_spectrum(values, classify_tol)
    return out


def classify_spectrum(values, tol: float = 1e-3) -> StabilityClass:
    """Stability class of a fixed point from its three eigenvalues.

    One eigenvalue within ``tol`` of 1 is the direction along the curve of
    fixed points; the remaining pair decides the transverse behaviour.
    """
    vals = sorted((complex(v) for v in values), key=lambda v: abs(v - 1.0))
    l1, l2, l3 = vals
    if abs(l1 - 1.0) > tol:
        return StabilityClass.NON_FIXED
    if abs(l2 - 1.0) <= tol and abs(l3 - 1.0) <= tol:
        return StabilityClass.PARABOLIC
    complex_pair = abs(l2.imag) > 0.0 and abs(l2 - l3.conjugate()) <= tol
    if complex_pair and abs(abs(l2) - 1.0) <= tol and abs(abs(l3) - 1.0) <= tol:
        return StabilityClass.NORMALLY_ELLIPTIC
    if abs(l2.imag) == 0.0 and abs(l3.imag) == 0.0 and abs(l2.real * l3.real - 1.0) <= tol:
        return StabilityClass.NORMALLY_HYPERBOLIC
    return StabilityClass.NON_FIXED


def fixed_point_residual(p: ProtocolParams, order: MapOrder, pt) -> float:
    c = np.asarray(pt, dtype=float).reshape(1, 3)
    return float(np.linalg.norm(map_points(p, order, c)[0] - c[0]))


def polish_fixed_point(p: ProtocolParams, order: MapOrder, pt, tol: float = 1e-12,
                       max_iter: int = 30, h: float = 1e-7) -> Point3:
    """Newton-refine a point on a curve of fixed points.

    ``DQ - I`` is singular along the curve, so each step is the minimum-norm
    least-squares solution, which moves transversally onto the curve.
    """
    x = np.asarray(pt, dtype=float).reshape(3).copy()
    for _ in range(max_iter):
        F = map_points(p, order, x[None, :])[0] - x
        if np.linalg.norm(F) <= tol:
            break
        J = jacobian_fd(p, order, x, h=h).matrix - np.eye(3)
        step, *_ = np.linalg.lstsq(J, -F, rcond=1e-8)
        x = x + step
    return Point3.from_array(x)
