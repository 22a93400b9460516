"""Stable and unstable manifolds of hyperbolic fixed points.

A short segment along an eigenvector next to a hyperbolic fixed point (a
fundamental domain) is iterated forward for the unstable manifold or
backward for the stable one. Successive images tile a branch of the
manifold. Gaps opened by stretching are filled by subdividing the domain and
re-iterating the new points from scratch. The map is continuous but not
differentiable at the layer interface, so refinement is driven by point
density only, never by curvature.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlphaTooLarge, DomainError, NotHyperbolic
from .geometry import Axis, Point3, ProtocolParams
from .period_one import Stability, shell_existence_window, shell_fixed_points
from .trajectory import advance_points, streamline_period
from .twistmap import (MapOrder, StabilityClass, eigen_3x3, fixed_point_residual, jacobian_fd,
                       map_points, polish_fixed_point)

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 1e-4
DEFAULT_N_POINTS = 64
DEFAULT_MAX_GAP = 5e-3


class ManifoldKind(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"


class BranchSign(enum.Enum):
    PLUS = "Plus"
    MINUS = "Minus"

    @property
    def sign(self) -> float:
        return 1.0 if self is BranchSign.PLUS else -1.0


class ConnectionKind(enum.Enum):
    HETEROCLINIC = "Heteroclinic"
    HOMOCLINIC = "Homoclinic"
    NONE = "None"


@dataclass
class FundamentalDomain:
    """Segment ``X* + alpha * mu**(s - 1) * E`` for ``s`` in ``[0, 1]``.

    ``mu`` is the expansion factor of the map used for tracing, so the image
    of the inner end ``s = 0`` is (to first order) the outer end ``s = 1``.
    """

    fixed_point: Point3
    direction: np.ndarray
    alpha: float
    points: np.ndarray
    params: np.ndarray
    multiplier: float
    kind: ManifoldKind
    branch: BranchSign

    def at(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        r = self.alpha * np.abs(self.multiplier) ** (s - 1.0)
        return np.asarray(self.fixed_point)[None, :] + r[:, None] * self.direction[None, :]


@dataclass
class ManifoldTrace:
    kind: ManifoldKind
    branch: BranchSign
    polyline: np.ndarray
    periods_traced: int
    image_index: np.ndarray
    fixed_point: Point3
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.polyline)


@dataclass
class ConnectionResult:
    kind: ConnectionKind
    source: Point3
    target: Point3 | None
    closest_approach: float
    periods_used: int
    diagnostics: dict = field(default_factory=dict)


def _step(p, order, kind):
    inverse = kind is ManifoldKind.STABLE

    def f(pts):
        return map_points(p, order, pts, inverse=inverse)

    return f


def hyperbolic_directions(p: ProtocolParams, order: MapOrder, fixed_pt, h: float = 1e-6):
    """Unstable and stable eigenpairs ``((lam_u, E_u), (lam_s, E_s))`` of the forward map."""
    eig = eigen_3x3(jacobian_fd(p, order, fixed_pt, h=h))
    if eig.classification is not StabilityClass.NORMALLY_HYPERBOLIC:
        raise NotHyperbolic(f"point {tuple(fixed_pt)} is {eig.classification.value}")
    vals = eig.values[1:].real
    vecs = np.real(eig.vectors[:, 1:])
    iu = int(np.argmax(np.abs(vals)))
    is_ = 1 - iu
    return (float(vals[iu]), vecs[:, iu]), (float(vals[is_]), vecs[:, is_])


def make_fundamental_domain(p: ProtocolParams, order: MapOrder, fixed_pt, kind: ManifoldKind,
                            branch: BranchSign = BranchSign.PLUS, alpha: float = DEFAULT_ALPHA,
                            n_points: int = DEFAULT_N_POINTS, curvature_tol: float = 1e-2,
                            polish: bool = True) -> FundamentalDomain:
    """Fundamental domain next to a hyperbolic fixed point.

    Raises
    ------
    DomainError
        If the point is not a fixed point to 1e-8.
    NotHyperbolic
        If the point is not normally hyperbolic.
    AlphaTooLarge
        If the first image of the outer end misses its linear prediction by
        more than ``curvature_tol * alpha``.
    """
    if n_points < 2:
        raise DomainError("n_points must be at least 2")
    x = np.asarray(fixed_pt, dtype=float)
    if polish:
        x = np.asarray(polish_fixed_point(p, order, x))
    if fixed_point_residual(p, order, x) >= 1e-8:
        raise DomainError(f"{tuple(x)} is not a fixed point of the map")
    (lam_u, e_u), (lam_s, e_s) = hyperbolic_directions(p, order, x)
    if kind is ManifoldKind.UNSTABLE:
        mu, E, lam = lam_u, e_u, lam_u
    else:
        mu, E, lam = 1.0 / lam_s, e_s, 1.0 / lam_s
    E = branch.sign * E / np.linalg.norm(E)
    outer = x + alpha * E
    image = _step(p, order, kind)(outer[None, :])[0]
    miss = np.linalg.norm(image - (x + lam * alpha * E))
    if miss >= curvature_tol * alpha:
        raise AlphaTooLarge(f"alpha={alpha:g}: linearization error {miss:.3g} exceeds {curvature_tol * alpha:.3g}")
    s = np.linspace(0.0, 1.0, n_points)
    dom = FundamentalDomain(Point3.from_array(x), E, alpha, np.empty((0, 3)), s, mu, kind, branch)
    dom.points = dom.at(s)
    return dom


def trace_manifold(p: ProtocolParams, order: MapOrder, domain: FundamentalDomain, n_periods: int,
                   max_gap: float = DEFAULT_MAX_GAP, max_points: int = 400_000) -> ManifoldTrace:
    """Concatenate the first ``n_periods`` images of a fundamental domain.

    Image ``k`` is the k-th iterate of the domain under the map (unstable) or
    its inverse (stable). Wherever adjacent image points are more than
    ``max_gap`` apart the domain parameter is bisected and the new point is
    iterated from scratch. If the point budget runs out the partial trace is
    returned with ``truncated = True``.
    """
    f = _step(p, order, domain.kind)
    s = np.array(domain.params, dtype=float)
    cur = domain.at(s)
    pieces = [cur.copy()]
    idx = [np.zeros(len(cur), dtype=int)]
    total = len(cur)
    truncated = False
    done = 0
    for k in range(1, n_periods + 1):
        cur = f(cur)
        for _ in range(60):
            gaps = np.linalg.norm(np.diff(cur, axis=0), axis=1)
            bad = np.nonzero(gaps > max_gap)[0]
            if len(bad) == 0:
                break
            if total + len(cur) + len(bad) > max_points:
                truncated = True
                break
            s_new = 0.5 * (s[bad] + s[bad + 1])
            if np.any(s[bad + 1] - s[bad] < 1e-15):
                log.debug("domain parameter underflow while refining image %d", k)
                break
            q = domain.at(s_new)
            for _ in range(k):
                q = f(q)
            s = np.insert(s, bad + 1, s_new)
            cur = np.insert(cur, bad + 1, q, axis=0)
        if truncated or total + len(cur) > max_points:
            truncated = True
            break
        pieces.append(cur.copy())
        idx.append(np.full(len(cur), k))
        total += len(cur)
        done = k
    poly = np.vstack(pieces)
    return ManifoldTrace(domain.kind, domain.branch, poly, done, np.concatenate(idx),
                         domain.fixed_point, truncated)


def _single_axis_limit(p: ProtocolParams) -> Axis | None:
    if p.theta_x == 0.0 and p.theta_z > 0.0:
        return Axis.Z
    if p.theta_z == 0.0 and p.theta_x > 0.0:
        return Axis.X
    return None


def detect_connection(p: ProtocolParams, order: MapOrder, source_fixed_pt, candidate_targets,
                      tol: float = 1e-4, n_periods: int = 100, kind: ManifoldKind = ManifoldKind.STABLE,
                      branches=(BranchSign.PLUS, BranchSign.MINUS), alpha: float = DEFAULT_ALPHA,
                      max_gap: float = DEFAULT_MAX_GAP, leave_radius: float = 1e-2,
                      max_points: int = 400_000) -> ConnectionResult:
    """Trace a manifold branch of ``source`` and look for a fixed point it reaches.

    Approaches to the source itself only count after the trace has left the
    ball of radius ``leave_radius`` around it. The first candidate within
    ``tol`` (in polyline order) decides the result; otherwise the closest
    approach over all candidates is reported with kind ``NONE``.

    In the single-axis limit (one angle zero) the flow is integrable: the
    seed's streamline closes after one streamline period, which is reported
    as a trivial homoclinic return.
    """
    src = np.asarray(source_fixed_pt, dtype=float)
    axis = _single_axis_limit(p)
    if axis is not None:
        T = streamline_period(p, axis, src)
        back = advance_points(p, axis, src[None, :], T)[0]
        d = float(np.linalg.norm(back - src))
        return ConnectionResult(ConnectionKind.HOMOCLINIC, Point3.from_array(src), Point3.from_array(src), d, 1,
                                {"integrable_axis": axis.value, "streamline_period": T})
    targets = [np.asarray(t, dtype=float) for t in candidate_targets]
    if not targets:
        raise DomainError("no candidate targets")
    best = (math.inf, None, 0, None)
    diag: dict = {"branches": {}}
    hit = None
    for br in branches:
        dom = make_fundamental_domain(p, order, src, kind, br, alpha=alpha)
        tr = trace_manifold(p, order, dom, n_periods, max_gap=max_gap, max_points=max_points)
        src_p = np.asarray(dom.fixed_point)
        away = np.linalg.norm(tr.polyline - src_p, axis=1) > leave_radius
        start = int(np.argmax(away)) if np.any(away) else len(tr.polyline)
        br_best = (math.inf, None, 0)
        for j, t in enumerate(targets):
            same = np.linalg.norm(t - src_p) <= 10.0 * tol
            seg = tr.polyline[start:] if same else tr.polyline
            offs = start if same else 0
            if len(seg) == 0:
                continue
            d = np.linalg.norm(seg - t, axis=1)
            i = int(np.argmin(d))
            if d[i] < br_best[0]:
                br_best = (float(d[i]), j, int(tr.image_index[offs + i]))
            within = np.nonzero(d <= tol)[0]
            if len(within):
                first = offs + int(within[0])
                if hit is None or first < hit[1]:
                    hit = (br, first, j, float(d[within].min()), int(tr.image_index[first]))
        diag["branches"][br.value] = {"closest": br_best[0], "target_index": br_best[1],
                                      "points": len(tr.polyline), "periods": tr.periods_traced,
                                      "truncated": tr.truncated}
        if br_best[0] < best[0]:
            best = (br_best[0], br_best[1], br_best[2], br)
        if hit is not None:
            break
    src_pt = Point3.from_array(src)
    if hit is not None:
        br, _, j, d, per = hit
        t = targets[j]
        same = np.linalg.norm(t - src) <= 10.0 * tol
        kind_out = ConnectionKind.HOMOCLINIC if same else ConnectionKind.HETEROCLINIC
        diag["branch"] = br.value
        return ConnectionResult(kind_out, src_pt, Point3.from_array(t), d, per, diag)
    j = best[1]
    return ConnectionResult(ConnectionKind.NONE, src_pt, None if j is None else Point3.from_array(targets[j]),
                            best[0], best[2], diag)


@dataclass
class SweepEntry:
    R_bar: float
    source: Point3
    result: ConnectionResult


def hyperbolic_shell_points(p: ProtocolParams, R_bar: float) -> list[Point3]:
    """Hyperbolic shell fixed points ordered by decreasing ``x + z`` (forward point first)."""
    pts = shell_fixed_points(p, R_bar).of_kind(Stability.HYPERBOLIC)
    return sorted(pts, key=lambda q: -(q.x + q.z))


def connection_sweep(p: ProtocolParams, order: MapOrder, R_bar_list=None, n_shells: int = 8,
                     **kwargs) -> list[SweepEntry]:
    """Connection type of the forward hyperbolic point on a sequence of shells.

    The forward point traces its manifold and both hyperbolic points on the
    same shell are candidate targets. Shells default to an even spread across
    the interior of the existence window.
    """
    if R_bar_list is None:
        lo, hi = shell_existence_window(p)
        R_bar_list = lo + (hi - lo) * (np.arange(n_shells) + 0.5) / n_shells
    out = []
    for R in R_bar_list:
        hyp = hyperbolic_shell_points(p, float(R))
        if not hyp:
            continue
        src = hyp[0]
        res = detect_connection(p, order, src, hyp, **kwargs)
        log.info("R=%.6f %s closest=%.3g", R, res.kind.value, res.closest_approach)
        out.append(SweepEntry(float(R), src, res))
    return out


def homoclinic_cessation(entries: list[SweepEntry]) -> float | None:
    """First shell radius, in sweep order, after which no homoclinic connection is found."""
    last = None
    for e in entries:
        if e.result.kind is ConnectionKind.HOMOCLINIC:
            last = e.R_bar
    if last is None:
        return None
    later = [e.R_bar for e in entries if e.R_bar > last]
    return min(later) if later else None
