"""Period-one structures of the blinking map.

A streamline of a single-axis flow is fixed by a rotation of ``theta`` when
its period equals ``theta``. For rotation about z these streamlines fill a
prolate spheroid ``x^2 + y^2 + c z^2 = c`` in the bulk (the bowl) and the
implicit surface ``x^2 + w^2 = q (1 - z^2)`` in the layer (the cap), with
``w = (y + delta)/eps`` and ``q = (1 - d)^2``. Points fixed by both stages,
and therefore by the whole protocol, lie on the pairwise intersections of
the two axes' surfaces.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyIntersection, NonSymmetricParams
from .geometry import Point3, ProtocolParams

PARABOLIC_TOL = 1e-10
EDGE_TOL = 1e-5
NEWTON_TOL = 1e-13


class Branch(enum.Enum):
    BULK_BOWL = "BulkBowl"
    LAYER_CAP = "LayerCap"


class Stability(enum.Enum):
    HYPERBOLIC = "Hyperbolic"
    ELLIPTIC = "Elliptic"
    PARABOLIC = "Parabolic"


@dataclass(frozen=True)
class BowlCapConstants:
    c1: float
    c3: float
    d1: float
    d3: float

    @classmethod
    def from_params(cls, p: ProtocolParams) -> "BowlCapConstants":
        return cls(bowl_constant(p.eps_z, p.theta_z), bowl_constant(p.eps_x, p.theta_x),
                   cap_constant(p.eps_z, p.theta_z), cap_constant(p.eps_x, p.theta_x))


@dataclass(frozen=True)
class PeriodOneSample:
    position: Point3
    branch: Branch
    stability: Stability
    component: int = 0


@dataclass
class ShellFixedPoints:
    """Period-one points on an invariant bulk shell.

    ``R_bar`` is the shell actually used; it differs from ``requested_R_bar``
    only when the request was within the edge tolerance of the lower window
    end and was snapped onto the degenerate (parabolic) shell.
    """

    R_bar: float
    points: list[Point3]
    stability: list[Stability]
    window: tuple[float, float]
    requested_R_bar: float = float("nan")

    def __len__(self) -> int:
        return len(self.points)

    def of_kind(self, kind: Stability) -> list[Point3]:
        return [pt for pt, s in zip(self.points, self.stability) if s is kind]


# constants -----------------------------------------------------------------------


def _check_eps_theta(eps: float, theta: float) -> None:
    if not (0.0 < eps <= 0.5):
        raise DomainError(f"eps={eps!r} must lie in (0, 0.5]")
    if not (0.0 <= theta <= 2.0 * math.pi):
        raise DomainError(f"theta={theta!r} must lie in [0, 2*pi]")


def bowl_constant(eps: float, theta: float) -> float:
    """Squared depth of the period-one bowl for one axis.

    ``c = eps^2 (1 + tan^2 phi) / (1 + eps^2 tan^2 phi)`` with
    ``phi = (theta - eps*pi)/2``, written without the pole of ``tan``.
    """
    _check_eps_theta(eps, theta)
    phi = 0.5 * (theta - eps * math.pi)
    s2 = math.sin(phi) ** 2
    return eps * eps / (math.cos(phi) ** 2 + eps * eps * s2)


def cap_constant(eps: float, theta: float) -> float:
    """Apex depth of the period-one cap in units of ``eps``.

    ``d = 1 - sqrt(eps^2 tan^2 phi / (1 + eps^2 tan^2 phi))``.
    """
    _check_eps_theta(eps, theta)
    phi = 0.5 * (theta - eps * math.pi)
    s, co = abs(math.sin(phi)), math.cos(phi)
    return 1.0 - eps * s / math.sqrt(co * co + eps * eps * s * s)


def period_one_angle_range(eps: float) -> tuple[float, float]:
    """Rotation angles for which a streamline with period equal to the angle exists."""
    return eps * math.pi, (1.0 + eps) * math.pi


def stability_from_sign(x: float, z: float, tol: float = PARABOLIC_TOL) -> Stability:
    xz = x * z
    if abs(xz) <= tol:
        return Stability.PARABOLIC
    return Stability.HYPERBOLIC if xz > 0.0 else Stability.ELLIPTIC


# bulk curves ---------------------------------------------------------------------------


def _bulk_components(c1: float, c3: float, e: float, n: int) -> list[np.ndarray]:
    """Intersection of the two bowls clipped to the bulk of both axes."""
    e2 = e * e
    if c1 >= 1.0 - 1e-12 or c3 >= 1.0 - 1e-12:
        return []
    swap = c1 < c3
    cA, cB = (c3, c1) if swap else (c1, c3)
    # free coordinate t, dependent s with s^2 = a + b t^2, on the bowl of depth cA
    a = (cA - cB) / (1.0 - cB)
    b = (1.0 - cA) / (1.0 - cB)
    num = cA - e2 - (1.0 - e2) * a
    den = cA - e2 + (1.0 - e2) * b
    if num <= 0.0 or den <= 0.0:
        return []
    tmax = math.sqrt(num / den)
    t = np.linspace(-tmax, tmax, n)
    comps = []
    for sign in (1.0, -1.0):
        s = sign * np.sqrt(a + b * t * t)
        y = -np.sqrt(np.clip(cA - s * s - cA * t * t, 0.0, None))
        x, z = (t, s) if swap else (s, t)
        comps.append(np.column_stack([x, y, z]))
    return comps


# cap curves ------------------------------------------------------------------------------


class _CapSystem:
    """Two cap surfaces in the variables ``v = (x, z, w)`` with ``w`` the z-layer coordinate."""

    def __init__(self, p: ProtocolParams, q1: float, q3: float):
        self.ez, self.ex = p.eps_z, p.eps_x
        self.r = p.eps_z / p.eps_x
        self.q1, self.q3 = q1, q3

    def S(self, v):
        return math.sqrt(max(1.0 - v[0] ** 2 - v[1] ** 2, 0.0))

    def wx(self, v):
        return self.r * v[2] + (1.0 - self.r) * self.S(v)

    def G(self, v):
        x, z, w = v
        wx = self.wx(v)
        return np.array([x * x + w * w - self.q1 * (1.0 - z * z),
                         z * z + wx * wx - self.q3 * (1.0 - x * x)])

    def dG(self, v):
        x, z, w = v
        S = max(self.S(v), 1e-300)
        wx = self.wx(v)
        k = 2.0 * wx * (1.0 - self.r)
        return np.array([[2.0 * x, 2.0 * self.q1 * z, 2.0 * w],
                         [k * (-x / S) + 2.0 * self.q3 * x, 2.0 * z + k * (-z / S), 2.0 * wx * self.r]])

    def bounds(self, v):
        """Values that must stay non-negative inside both layers."""
        return np.array([v[2], self.wx(v), 1.0 - v[0] ** 2 - v[1] ** 2])

    def bounds_grad(self, v, k):
        x, z, _ = v
        S = max(self.S(v), 1e-300)
        if k == 0:
            return np.array([0.0, 0.0, 1.0])
        if k == 1:
            return np.array([(1.0 - self.r) * (-x / S), (1.0 - self.r) * (-z / S), self.r])
        return np.array([-2.0 * x, -2.0 * z, 0.0])

    def project(self, v, extra=None, max_iter=40):
        """Newton onto ``G = 0`` (minimum norm), optionally with a third equation."""
        v = np.array(v, dtype=float)
        for _ in range(max_iter):
            F = self.G(v)
            J = self.dG(v)
            if extra is not None:
                f3, g3 = extra(v)
                F = np.append(F, f3)
                J = np.vstack([J, g3])
            if np.max(np.abs(F)) < NEWTON_TOL:
                return v, True
            step, *_ = np.linalg.lstsq(J, -F, rcond=None)
            v = v + step
            if not np.all(np.isfinite(v)) or v[0] ** 2 + v[1] ** 2 > 1.0:
                return v, False
        F = self.G(v)
        return v, bool(np.max(np.abs(F)) < 1e-10)

    def tangent(self, v):
        J = self.dG(v)
        t = np.cross(J[0], J[1])
        nt = np.linalg.norm(t)
        return t / nt if nt > 0 else t

    def position(self, v):
        x, z, w = v
        return np.array([x, self.ez * (w - self.S(v)), z])


def _cap_seeds(sys: _CapSystem, n_grid: int) -> list[np.ndarray]:
    g = np.linspace(-1.0, 1.0, n_grid)
    X, Z = np.meshgrid(g, g, indexing="ij")
    W2 = sys.q1 * (1.0 - Z * Z) - X * X
    ok = (W2 >= 0.0) & (X * X + Z * Z < 1.0)
    W = np.sqrt(np.where(ok, W2, 0.0))
    S = np.sqrt(np.clip(1.0 - X * X - Z * Z, 0.0, None))
    WX = sys.r * W + (1.0 - sys.r) * S
    H = Z * Z + WX * WX - sys.q3 * (1.0 - X * X)
    ok &= WX >= 0.0
    seeds = []
    for axis in (0, 1):
        if axis == 0:
            h0, h1, o0, o1 = H[:-1, :], H[1:, :], ok[:-1, :], ok[1:, :]
            x0, x1, z0, z1 = X[:-1, :], X[1:, :], Z[:-1, :], Z[1:, :]
        else:
            h0, h1, o0, o1 = H[:, :-1], H[:, 1:], ok[:, :-1], ok[:, 1:]
            x0, x1, z0, z1 = X[:, :-1], X[:, 1:], Z[:, :-1], Z[:, 1:]
        hit = o0 & o1 & (np.sign(h0) != np.sign(h1))
        for i, j in zip(*np.nonzero(hit)):
            f = h0[i, j] / (h0[i, j] - h1[i, j])
            x = x0[i, j] + f * (x1[i, j] - x0[i, j])
            z = z0[i, j] + f * (z1[i, j] - z0[i, j])
            w = math.sqrt(max(sys.q1 * (1.0 - z * z) - x * x, 0.0))
            v, good = sys.project([x, z, w])
            if good and np.all(sys.bounds(v) >= 0.0):
                seeds.append(v)
    return seeds


def _trace_direction(sys: _CapSystem, v0, t0, ds0: float, max_steps: int, start) -> tuple[list, bool]:
    """March along the curve until a layer boundary is hit or the loop closes."""
    path = []
    v, t, ds = np.array(v0), np.array(t0), ds0
    travelled = 0.0
    for _ in range(max_steps):
        vp = v + ds * t

        def plane(u, vp=vp, t=t):
            return float(t @ (u - vp)), t

        vn, good = sys.project(vp, extra=plane, max_iter=12)
        if not good or np.linalg.norm(vn - v) > 2.0 * ds:
            ds *= 0.5
            if ds < 1e-9:
                return path, False
            continue
        b = sys.bounds(vn)
        if np.any(b < 0.0):
            k = int(np.argmin(b))

            def edge(u, k=k):
                return float(sys.bounds(u)[k]), sys.bounds_grad(u, k)

            vb, good = sys.project(v, extra=edge)
            if good and np.linalg.norm(vb - v) <= 2.0 * ds:
                path.append(vb)
                return path, False
            ds *= 0.5
            if ds < 1e-9:
                return path, False
            continue
        tn = sys.tangent(vn)
        if tn @ t < 0.0:
            tn = -tn
        travelled += np.linalg.norm(vn - v)
        v, t = vn, tn
        path.append(v)
        if travelled > 4.0 * ds0 and np.linalg.norm(v - start) < 0.75 * ds0:
            return path, True
        ds = min(ds * 1.5, ds0)
    return path, False


def _resample(sys: _CapSystem, path: np.ndarray, n: int, closed: bool) -> np.ndarray:
    pos = np.array([sys.position(v) for v in path])
    if closed:
        path = np.vstack([path, path[:1]])
        pos = np.vstack([pos, pos[:1]])
    seg = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, s[-1], n + 1 if closed else n)
    if closed:
        targets = targets[:-1]
    out = []
    for st in targets:
        k = min(int(np.searchsorted(s, st, side="right")) - 1, len(path) - 2)
        k = max(k, 0)
        f = 0.0 if s[k + 1] == s[k] else (st - s[k]) / (s[k + 1] - s[k])
        v = path[k] + f * (path[k + 1] - path[k])
        if f == 0.0 and (k == 0 or k == len(path) - 1):
            vp = v
        else:
            vp, good = sys.project(v)
            if not good:
                vp = v
        out.append(vp)
    if not closed:
        out[0], out[-1] = path[0], path[-1]
    return np.array(out)


def _cap_components(p: ProtocolParams, q1: float, q3: float, n: int,
                    n_grid: int = 201, ds: float = 5e-3) -> list[np.ndarray]:
    sys = _CapSystem(p, q1, q3)
    seeds = _cap_seeds(sys, n_grid)
    spacing = 2.0 / (n_grid - 1)
    comps = []
    remaining = seeds
    while remaining:
        v0 = remaining[0]
        t0 = sys.tangent(v0)
        fwd, closed = _trace_direction(sys, v0, t0, ds, 20000, v0)
        if closed:
            path = np.array([v0] + fwd[:-1])
        else:
            back, _ = _trace_direction(sys, v0, -t0, ds, 20000, v0)
            path = np.array(back[::-1] + [v0] + fwd)
        if len(path) >= 2:
            comps.append(_resample(sys, path, n, closed))
            dense = path[:, :2]
            remaining = [s for s in remaining[1:]
                         if np.min(np.linalg.norm(dense - s[:2], axis=1)) > 3.0 * spacing]
        else:
            remaining = remaining[1:]
    return [np.array([sys.position(v) for v in comp]) for comp in comps]


def sample_period_one_curves(p: ProtocolParams, n_samples: int = 100,
                             branches=(Branch.BULK_BOWL, Branch.LAYER_CAP)) -> list[PeriodOneSample]:
    """Sample the curves of points fixed by both single-axis stages.

    Bulk branches are closed-form intersections of the two bowls, swept
    uniformly in the free coordinate. Layer branches come from pseudo-arclength
    continuation of the two cap surfaces and are resampled uniformly in arc
    length. Each connected component gets ``n_samples`` points.

    Raises
    ------
    EmptyIntersection
        If no curve exists, including when either angle lies outside the range
        for which single-loop period-one streamlines exist.
    """
    if n_samples < 2:
        raise DomainError("n_samples must be at least 2")
    for eps, theta in ((p.eps_z, p.theta_z), (p.eps_x, p.theta_x)):
        lo, hi = period_one_angle_range(eps)
        if not (lo <= theta <= hi):
            raise EmptyIntersection(
                f"theta={theta!r} is outside [{lo!r}, {hi!r}], where period-one streamlines exist")
    k = BowlCapConstants.from_params(p)
    out: list[PeriodOneSample] = []
    comp_id = 0
    if Branch.BULK_BOWL in branches:
        for comp in _bulk_components(k.c1, k.c3, p.eps_max, n_samples):
            for row in comp:
                out.append(PeriodOneSample(Point3.from_array(row), Branch.BULK_BOWL,
                                           stability_from_sign(row[0], row[2]), comp_id))
            comp_id += 1
    if Branch.LAYER_CAP in branches:
        q1, q3 = (1.0 - k.d1) ** 2, (1.0 - k.d3) ** 2
        for comp in _cap_components(p, q1, q3, n_samples):
            for row in comp:
                out.append(PeriodOneSample(Point3.from_array(row), Branch.LAYER_CAP,
                                           stability_from_sign(row[0], row[2]), comp_id))
            comp_id += 1
    if not out:
        raise EmptyIntersection("no period-one curve for these parameters")
    return out


# shells -----------------------------------------------------------------------------------


def _require_symmetric(p: ProtocolParams) -> None:
    if not p.symmetric():
        raise NonSymmetricParams("invariant shells exist only when eps_z == eps_x")


def shell_existence_window(p: ProtocolParams) -> tuple[float, float]:
    """Shell radii ``(R_lo, R_hi)`` that carry bulk period-one points.

    The lower end is the deepest bowl bottom; above the upper end the points
    would lie in the flowing layer. An empty window has ``R_lo >= R_hi``.
    """
    _require_symmetric(p)
    k = BowlCapConstants.from_params(p)
    e2 = p.eps_z ** 2
    R_lo = math.sqrt(max(k.c1, k.c3))
    if max(k.c1, k.c3) >= 1.0:
        return R_lo, R_lo
    kk = 1.0 / (1.0 - k.c1) + 1.0 / (1.0 - k.c3) - 1.0
    m0 = k.c1 / (1.0 - k.c1) + k.c3 / (1.0 - k.c3)
    R_hi2 = ((1.0 - e2) * m0 - e2) / ((1.0 - e2) * kk - e2)
    R_hi = math.sqrt(R_hi2) if R_hi2 > 0.0 else 0.0
    return R_lo, R_hi


def shell_fixed_points(p: ProtocolParams, R_bar: float, edge_tol: float = EDGE_TOL) -> ShellFixedPoints:
    """Period-one points on the invariant bulk shell of radius ``R_bar``.

    Inside the open window there are four points, two hyperbolic (``x z > 0``)
    and two elliptic (``x z < 0``). A radius within ``edge_tol`` of the lower
    end is snapped onto it and yields the degenerate parabolic point(s): one
    when both bowls have equal depth, two otherwise. Outside the window the
    list is empty.
    """
    _require_symmetric(p)
    eps = p.eps_z
    if not (eps < R_bar <= 1.0):
        raise DomainError(f"R_bar={R_bar!r} must lie in ({eps!r}, 1]")
    k = BowlCapConstants.from_params(p)
    window = shell_existence_window(p)
    R_lo, R_hi = window
    requested = R_bar
    if R_lo >= R_hi:
        return ShellFixedPoints(R_bar, [], [], window, requested)
    if abs(R_bar - R_lo) <= edge_tol:
        R_bar = R_lo
    R2 = R_bar * R_bar
    x2 = (R2 - k.c3) / (1.0 - k.c3)
    z2 = (R2 - k.c1) / (1.0 - k.c1)
    if R_bar == R_lo:
        if k.c1 >= k.c3:
            z2 = 0.0
        if k.c3 >= k.c1:
            x2 = 0.0
    if x2 < 0.0 or z2 < 0.0:
        return ShellFixedPoints(R_bar, [], [], window, requested)
    y2 = R2 - x2 - z2
    # strict bulk: y^2 (1 - eps^2) > eps^2 (1 - R^2)
    if y2 <= 0.0 or y2 * (1.0 - eps * eps) <= eps * eps * (1.0 - R2):
        return ShellFixedPoints(R_bar, [], [], window, requested)
    x, z, y = math.sqrt(x2), math.sqrt(z2), -math.sqrt(y2)
    pts: list[Point3] = []
    for sx in ((1.0,) if x == 0.0 else (1.0, -1.0)):
        for sz in ((1.0,) if z == 0.0 else (1.0, -1.0)):
            pts.append(Point3(sx * x, y, sz * z))
    stab = [stability_from_sign(pt.x, pt.z) for pt in pts]
    return ShellFixedPoints(R_bar, pts, stab, window, requested)


# angles ---------------------------------------------------------------------------------------


def optimal_angles(eps_z: float, eps_x: float) -> tuple[float, float]:
    """Angles that minimise both bowl depths, ``(eps_z*pi, eps_x*pi)``."""
    for e in (eps_z, eps_x):
        if not (0.0 < e <= 0.5):
            raise DomainError(f"eps={e!r} must lie in (0, 0.5]")
    return eps_z * math.pi, eps_x * math.pi


@dataclass
class BowlDepthGrid:
    """Row-major grid of bowl constants, one row per layer depth."""

    eps: np.ndarray
    theta: np.ndarray
    c: np.ndarray
    depth_below_layer: np.ndarray
    theta_min_locus: np.ndarray = field(default=None)
    theta_max_locus: np.ndarray = field(default=None)

    def rows(self):
        for i, e in enumerate(self.eps):
            for j, t in enumerate(self.theta):
                yield float(e), float(t), float(self.c[i, j]), float(self.depth_below_layer[i, j])


def bowl_depth_grid(eps_range=(0.01, 0.5), theta_range=(0.0, 2.0 * math.pi), resolution=(50, 200)) -> BowlDepthGrid:
    """Bowl constant and the depth ``sqrt(c) - eps`` over a grid of ``(eps, theta)``."""
    if np.isscalar(resolution):
        resolution = (int(resolution), int(resolution))
    n_e, n_t = resolution
    if n_e < 1 or n_t < 1:
        raise DomainError("resolution must be positive")
    eps = np.linspace(eps_range[0], eps_range[1], n_e)
    theta = np.linspace(theta_range[0], theta_range[1], n_t)
    if eps[0] <= 0.0 or eps[-1] > 0.5 or theta[0] < 0.0 or theta[-1] > 2.0 * math.pi:
        raise DomainError("grid ranges must lie within eps in (0, 0.5] and theta in [0, 2*pi]")
    E, TH = np.meshgrid(eps, theta, indexing="ij")
    phi = 0.5 * (TH - E * np.pi)
    c = E * E / (np.cos(phi) ** 2 + E * E * np.sin(phi) ** 2)
    return BowlDepthGrid(eps, theta, c, np.sqrt(c) - E, eps * np.pi, (1.0 + eps) * np.pi)
