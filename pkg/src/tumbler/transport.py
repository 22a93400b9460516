"""Radial transport analysis, Poincare sections and KAM island boundaries.

Bulk arcs rotate rigidly about the active axis, so a tracer keeps its bulk
radius while it stays on one streamline. For a layer point the bulk radius of
its streamline about an axis is ``sqrt((1 - eps^2)(x^2 + z^2 + w^2) + eps^2)``
with ``w = (y + delta)/eps``. Radial drift therefore needs a switch of axis
while the tracer is in a flowing layer, and different depths for the two axes.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NoEllipticPoint, NonSymmetricParams
from .geometry import Axis, Point3, ProtocolParams, RegionTag, classify_region, sanitize_points, to_frame
from .period_one import Stability, shell_fixed_points
from .trajectory import EventKind, advance_points, trajectory_events
from .twistmap import MapOrder, map_points

log = logging.getLogger(__name__)


def layer_coordinate(eps: float, axis: Axis, pt) -> float:
    """Scaled height above the interface, ``(y + delta)/eps``, about ``axis``."""
    u, y, h = to_frame(axis, float(pt[0]), float(pt[1]), float(pt[2]))
    delta = eps * math.sqrt(max(1.0 - u * u - h * h, 0.0))
    return (y + delta) / eps


def in_layer(p: ProtocolParams, axis: Axis, pt) -> bool:
    return layer_coordinate(p.eps(axis), axis, pt) >= 0.0


def streamline_bulk_radius(p: ProtocolParams, axis: Axis, pt) -> float:
    """Radius of the bulk arc of the streamline through ``pt`` about ``axis``."""
    x, y, z = (float(c) for c in pt)
    eps = p.eps(axis)
    w = layer_coordinate(eps, axis, pt)
    if w < 0.0:
        return math.sqrt(x * x + y * y + z * z)
    return math.sqrt((1.0 - eps * eps) * (x * x + z * z + w * w) + eps * eps)


def streamline_constant(p: ProtocolParams, axis: Axis, pt) -> float:
    """Layer streamfunction about ``axis`` at ``pt``, continued past the interface."""
    eps = p.eps(axis)
    u, y, h = to_frame(axis, float(pt[0]), float(pt[1]), float(pt[2]))
    delta = eps * math.sqrt(max(1.0 - u * u - h * h, 0.0))
    return (delta * y + 0.5 * y * y) / (eps * eps)


@dataclass(frozen=True)
class SwitchAnalysis:
    """Radial bookkeeping at the instant the rotation axis changes.

    ``in_layer`` is true when the switch point lies in the flowing layer of
    either axis. ``derivation_applies`` is true when it lies in the layer of
    both, which is where the closed-form exit radius holds without caveats.
    """

    switch_point: Point3
    in_layer: bool
    kappa: float
    r_initial: float
    r_exit_predicted: float
    derivation_applies: bool

    @property
    def radius_changes(self) -> bool:
        return abs(self.r_exit_predicted - self.r_initial) > 1e-12


def analyze_switch(p: ProtocolParams, pt, order: MapOrder = MapOrder.Z_FIRST) -> SwitchAnalysis:
    """Predict the bulk radius after the switch from the first to the second axis."""
    first, second = order.axes
    q = sanitize_points(np.asarray(pt, dtype=float).reshape(3))
    in1 = in_layer(p, first, q)
    in2 = in_layer(p, second, q)
    kappa = streamline_constant(p, second, q)
    r_now = math.sqrt(float(q @ q))
    r_initial = streamline_bulk_radius(p, first, q) if in1 else r_now
    if in2:
        e2 = p.eps(second) ** 2
        r_exit = math.sqrt(max(1.0 + 2.0 * kappa * (1.0 - e2), 0.0))
    else:
        r_exit = r_now
    if p.symmetric() and in1:
        r_exit = r_initial
    return SwitchAnalysis(Point3.from_array(q), bool(in1 or in2), kappa, r_initial, r_exit, bool(in1 and in2))


def measured_exit_radius(p: ProtocolParams, pt, order: MapOrder = MapOrder.Z_FIRST) -> float | None:
    """Distance from the origin at the first layer exit during the second stage.

    Returns ``None`` if the tracer does not leave the layer within the stage.
    """
    _, second = order.axes
    for ev in trajectory_events(p, second, pt, p.theta(second)):
        if ev.kind is EventKind.EXIT_LAYER:
            pos = ev.position.to_point(second)
            return pos.r
        if ev.kind is EventKind.ENTER_LAYER:
            return None
    return None


def switch_point(p: ProtocolParams, order: MapOrder, pt) -> Point3:
    """Tracer position after the first stage of one period."""
    first, _ = order.axes
    q = sanitize_points(np.asarray(pt, dtype=float).reshape(1, 3), reject_rim=True)
    return Point3.from_array(advance_points(p, first, q, p.theta(first))[0])


# seeding and sections ----------------------------------------------------------


def seed_transect(p: ProtocolParams, count: int, R_min: float, R_max: float,
                  margin: float = 1e-3) -> list[Point3]:
    """Bulk seeds on the transect ``z = -x``.

    Seeds are ``(s, -sqrt(R^2 - 2 s^2), -s)``. With ``R_min < R_max`` the radii
    are uniformly spaced and ``s`` is placed midway through the bulk part of
    each shell's transect arc. With ``R_min == R_max`` the seeds are spread
    uniformly in ``s`` along the bulk part of that single arc.
    """
    if count < 1:
        raise DomainError("count must be at least 1")
    e = p.eps_max
    if not (e < R_min <= R_max <= 1.0):
        raise DomainError(f"radii must satisfy {e!r} < R_min <= R_max <= 1")

    def s_limit(R):
        return math.sqrt(max((R * R - e * e) / (2.0 * (1.0 - e * e)), 0.0)) * (1.0 - margin)

    seeds = []
    if R_min == R_max or count == 1:
        R = 0.5 * (R_min + R_max)
        smax = s_limit(R)
        ss = [0.0] if count == 1 else np.linspace(-smax, smax, count + 2)[1:-1]
        for s in ss:
            seeds.append(Point3(float(s), -math.sqrt(R * R - 2.0 * s * s), float(-s)))
    else:
        for R in np.linspace(R_min, R_max, count):
            s = 0.5 * s_limit(R)
            seeds.append(Point3(s, -math.sqrt(R * R - 2.0 * s * s), -s))
    return seeds


@dataclass(frozen=True)
class PoincareRecord:
    seed_id: int
    n: int
    position: Point3
    r: float
    region: RegionTag


def _orbit_block(args):
    p, order, seeds, n_periods = args
    out = np.empty((n_periods + 1,) + seeds.shape)
    out[0] = seeds
    for k in range(n_periods):
        out[k + 1] = map_points(p, order, out[k])
    return out


def orbits(p: ProtocolParams, order: MapOrder, seeds, n_periods: int, jobs: int | None = None) -> np.ndarray:
    """Per-period positions, shape ``(n_periods + 1, N, 3)``.

    Seeds are sharded across ``jobs`` worker processes and merged in seed order,
    so the result does not depend on the worker count.
    """
    if n_periods < 0:
        raise DomainError("n_periods must be non-negative")
    pts = sanitize_points(np.atleast_2d(np.asarray(seeds, dtype=float)), reject_rim=True)
    jobs = resolve_jobs(jobs)
    if jobs <= 1 or len(pts) < 2:
        return _orbit_block((p, order, pts, n_periods))
    chunks = [c for c in np.array_split(pts, min(jobs, len(pts))) if len(c)]
    with ProcessPoolExecutor(max_workers=len(chunks)) as ex:
        parts = list(ex.map(_orbit_block, [(p, order, c, n_periods) for c in chunks]))
    return np.concatenate(parts, axis=1)


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        env = os.environ.get("TUMBLER_JOBS")
        jobs = int(env) if env else 1
    return max(1, int(jobs))


def run_poincare(p: ProtocolParams, order: MapOrder, seeds, n_periods: int,
                 jobs: int | None = None) -> list[PoincareRecord]:
    """One record per seed per period, including the seed itself at ``n = 0``.

    The region tag is taken about the first axis of the protocol, which is
    the stage the recorded point is about to undergo.
    """
    if n_periods < 1:
        raise DomainError("n_periods must be at least 1")
    orb = orbits(p, order, seeds, n_periods, jobs)
    first, _ = order.axes
    recs = []
    for i in range(orb.shape[1]):
        for n in range(orb.shape[0]):
            pt = Point3.from_array(orb[n, i])
            recs.append(PoincareRecord(i, n, pt, pt.r, classify_region(p, first, pt)))
    return recs


def bulk_radius_drift(records: list[PoincareRecord]) -> dict[int, float]:
    """Max deviation of bulk-tagged radii from the first bulk-tagged radius, per seed."""
    first: dict[int, float] = {}
    drift: dict[int, float] = {}
    for rec in records:
        if rec.region is not RegionTag.BULK:
            continue
        r0 = first.setdefault(rec.seed_id, rec.r)
        drift[rec.seed_id] = max(drift.get(rec.seed_id, 0.0), abs(rec.r - r0))
    return drift


@dataclass
class RadialHistory:
    n: np.ndarray
    r: np.ndarray
    bulk: np.ndarray
    floor: float

    @property
    def mean_abs_slope(self) -> float:
        """Mean absolute change of bulk radius per period over bulk-tagged samples."""
        idx = np.nonzero(self.bulk)[0]
        if len(idx) < 2:
            return 0.0
        dr = np.abs(np.diff(self.r[idx]))
        dn = np.diff(self.n[idx])
        return float(dr.sum() / dn.sum())

    @property
    def max_drift(self) -> float:
        rb = self.r[self.bulk]
        return float(np.max(np.abs(rb - rb[0]))) if len(rb) else 0.0


def radial_history(p: ProtocolParams, order: MapOrder, seed, n: int) -> RadialHistory:
    """Distance from the origin once per period, with bulk tags about the first axis."""
    orb = orbits(p, order, [seed], n, jobs=1)[:, 0, :]
    first, _ = order.axes
    r = np.sqrt(np.einsum("ij,ij->i", orb, orb))
    bulk = np.array([classify_region(p, first, q) is RegionTag.BULK for q in orb])
    return RadialHistory(np.arange(n + 1), r, bulk, p.eps_max)


# KAM islands ----------------------------------------------------------------------


@dataclass
class KamRing:
    """Estimated edge of the island around an elliptic point on a shell."""

    R_bar: float
    center: Point3 | None
    boundary_points: np.ndarray
    converged: bool
    radii: np.ndarray = field(default_factory=lambda: np.zeros(0))
    empty: bool = False

    @property
    def diameter(self) -> float:
        pts = self.boundary_points
        if len(pts) < 2:
            return 0.0
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        return float(d.max())


def _tangent_basis(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = c / np.linalg.norm(c)
    trial = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u1 = trial - (trial @ n) * n
    u1 /= np.linalg.norm(u1)
    u2 = np.cross(n, u1)
    return u1, u2


def _shell_points(c: np.ndarray, u1, u2, angles: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Points at geodesic distance ``s`` from ``c`` on its sphere, along ``angles``."""
    R = np.linalg.norm(c)
    dirs = np.cos(angles)[:, None] * u1 + np.sin(angles)[:, None] * u2
    g = s / R
    return np.cos(g)[:, None] * c + R * np.sin(g)[:, None] * dirs


def orbit_distance_stats(p: ProtocolParams, order: MapOrder, seeds: np.ndarray, center,
                         n_periods: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and maximum distance from ``center`` over ``n_periods`` iterates, per seed."""
    c = np.asarray(center, dtype=float)
    q = np.array(seeds, dtype=float)
    total = np.zeros(len(q))
    peak = np.zeros(len(q))
    for _ in range(n_periods):
        q = map_points(p, order, q)
        d = np.linalg.norm(q - c, axis=1)
        total += d
        np.maximum(peak, d, out=peak)
    return total / n_periods, peak


def mean_orbit_distance(p: ProtocolParams, order: MapOrder, seeds: np.ndarray, center, n_periods: int) -> np.ndarray:
    """Mean distance from ``center`` over ``n_periods`` iterates, per seed."""
    return orbit_distance_stats(p, order, seeds, center, n_periods)[0]


def kam_island_boundary(p: ProtocolParams, order: MapOrder, R_bar: float, elliptic_pt=None,
                        n_periods: int = 200, divergence_radius: float | None = None,
                        n_rays: int = 16, tol: float = 1e-4, ratio_factor: float = 1.5,
                        s_inner: float = 1e-3, ds: float = 0.01, statistic: str = "max") -> KamRing:
    """Island edge around an elliptic point, by bisection along geodesic rays.

    A seed at geodesic distance ``s`` from the elliptic point counts as inside
    while its distance to the point over ``n_periods`` stays bounded. The
    distance statistic is the orbit maximum (``statistic="max"``) or the orbit
    mean (``"mean"``). With ``divergence_radius`` given, bounded means below
    that radius. By default it means that the statistic divided by ``s`` stays
    below ``ratio_factor`` times the same ratio for the innermost seed at
    ``s_inner`` on that ray. Each boundary point is localized to ``tol``.

    Raises
    ------
    NoEllipticPoint
        If the shell carries no elliptic fixed point.
    """
    if not p.symmetric():
        raise NonSymmetricParams("island rings need invariant shells (eps_z == eps_x)")
    if elliptic_pt is None:
        ell = shell_fixed_points(p, R_bar).of_kind(Stability.ELLIPTIC)
        if not ell:
            raise NoEllipticPoint(f"no elliptic point on the shell R={R_bar!r}")
        elliptic_pt = ell[0]
    c = np.asarray(elliptic_pt, dtype=float)
    u1, u2 = _tangent_basis(c)
    ang = np.linspace(0.0, 2.0 * np.pi, n_rays, endpoint=False)
    first, second = order.axes
    e = p.eps_max

    def bulk_ok(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        return y < -e * np.sqrt(np.clip(1.0 - x * x - z * z, 0.0, None))

    k_stat = 0 if statistic == "mean" else 1
    inner = _shell_points(c, u1, u2, ang, np.full(n_rays, s_inner))
    base_ratio = orbit_distance_stats(p, order, inner, c, n_periods)[k_stat] / s_inner

    def inside(s, idx):
        pts = _shell_points(c, u1, u2, ang[idx], s)
        m = orbit_distance_stats(p, order, pts, c, n_periods)[k_stat]
        if divergence_radius is not None:
            return m < divergence_radius
        return m / s < ratio_factor * base_ratio[idx]

    # bracket along each ray with fixed outward steps
    s_in = np.full(n_rays, s_inner)
    s_out = np.full(n_rays, np.nan)
    limit_hit = np.zeros(n_rays, dtype=bool)
    active = np.arange(n_rays)
    s = s_inner
    s_cap = math.pi * R_bar
    while len(active):
        s = s + ds
        if s >= s_cap:
            limit_hit[active] = True
            break
        pts = _shell_points(c, u1, u2, ang[active], np.full(len(active), s))
        ok = bulk_ok(pts)
        limit_hit[active[~ok]] = True
        act = active[ok]
        if len(act) == 0:
            break
        res = inside(np.full(len(act), s), act)
        s_in[act[res]] = s
        s_out[act[~res]] = s
        active = act[res]
    # bisection on bracketed rays
    todo = np.nonzero(np.isfinite(s_out))[0]
    while len(todo):
        mid = 0.5 * (s_in[todo] + s_out[todo])
        res = inside(mid, todo)
        s_in[todo[res]] = mid[res]
        s_out[todo[~res]] = mid[~res]
        todo = todo[(s_out[todo] - s_in[todo]) > tol]
    radii = np.where(np.isfinite(s_out), 0.5 * (s_in + np.nan_to_num(s_out, nan=0.0)), s_in)
    radii = np.where(np.isfinite(s_out), radii, s_in)
    pts = _shell_points(c, u1, u2, ang, radii)
    converged = bool(np.all(np.isfinite(s_out)) and not np.any(limit_hit & ~np.isfinite(s_out)))
    log.debug("kam ring R=%.6f converged=%s radii=%s", R_bar, converged, radii)
    return KamRing(R_bar, Point3.from_array(c), pts, converged, radii)


def kam_tube_cloud(p: ProtocolParams, order: MapOrder, R_bar_list, tube: int = 0, **kwargs) -> list[KamRing]:
    """Stack of island rings, one per shell radius, for one of the two tubes.

    ``tube = 0`` follows the elliptic points with ``x > 0``; ``tube = 1`` their
    mirror images across the plane ``x = z``. Shells without an elliptic point
    yield an empty ring flagged with ``empty = True``.
    """
    rings = []
    for R in R_bar_list:
        try:
            ell = shell_fixed_points(p, R).of_kind(Stability.ELLIPTIC)
        except DomainError:
            ell = []
        if not ell:
            rings.append(KamRing(float(R), None, np.zeros((0, 3)), False, empty=True))
            continue
        ell.sort(key=lambda q: -q.x)
        center = ell[min(tube, len(ell) - 1)]
        rings.append(kam_island_boundary(p, order, R, center, **kwargs))
    return rings
