"""Command-line front end: ``tumbler <subcommand> [options]``.

Tabular results go to CSV (stdout unless ``-o`` is given). Run metadata,
including the full configuration, goes to JSON. Numbers are written with 17
significant digits so that they round-trip exactly.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import TumblerError
from .geometry import Point3, ProtocolParams
from .manifolds import (BranchSign, ManifoldKind, connection_sweep, detect_connection, homoclinic_cessation,
                        hyperbolic_shell_points, make_fundamental_domain, trace_manifold)
from .period_one import (Branch, BowlCapConstants, Stability, bowl_depth_grid, optimal_angles,
                         sample_period_one_curves, shell_existence_window, shell_fixed_points)
from .svg import PROJECTIONS, emit_svg
from .trajectory import advance_points, trajectory_events
from .transport import (analyze_switch, kam_tube_cloud, measured_exit_radius,
                        radial_history, resolve_jobs, run_poincare, seed_transect, switch_point)
from .twistmap import MapOrder, eigen_3x3, jacobian_fd, polish_fixed_point

log = logging.getLogger("tumbler")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

_ANGLE_RE = re.compile(r"^\s*(?P<num>[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)?\s*\*?\s*(?P<pi>pi|π)?"
                       r"\s*(/\s*(?P<den>(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?))?\s*$")


class UsageError(ValueError):
    pass


def fmt(v) -> str:
    """Full-precision decimal representation of a number."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def parse_angle(text: str) -> float:
    """Parse ``pi``, ``12pi/11``, ``3*pi/4``, ``1.5`` and the like into radians."""
    m = _ANGLE_RE.match(text)
    if not m or (m.group("num") is None and m.group("pi") is None):
        raise argparse.ArgumentTypeError(f"cannot parse angle {text!r}; use e.g. pi, 12pi/11 or 3.14")
    val = float(m.group("num")) if m.group("num") else 1.0
    if m.group("pi"):
        val *= math.pi
    if m.group("den"):
        den = float(m.group("den"))
        if den == 0.0:
            raise argparse.ArgumentTypeError("zero denominator in angle")
        val /= den
    return val


def parse_point(text: str) -> Point3:
    try:
        parts = [float(s) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}")
    return Point3(*parts)


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}") from None


@dataclass
class RunConfig:
    command: str
    protocol: dict
    map_order: str
    options: dict
    rng_seed: int
    output: str | None
    metadata: str | None


@dataclass
class RunMetadata:
    tool: str
    version: str
    config: dict
    wall_time_s: float
    counts: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    determinism_seed: int = 0


# output helpers --------------------------------------------------------------------


class Output:
    def __init__(self, args):
        self.path = args.output
        self.meta_path = args.metadata
        if self.meta_path is None and self.path:
            self.meta_path = self.path + ".meta.json"
        self._buf = io.StringIO()

    def table(self, header, rows):
        w = csv.writer(self._buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])

    def flush(self):
        text = self._buf.getvalue()
        if self.path:
            Path(self.path).write_text(text)
        else:
            sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if hasattr(obj, "value") and hasattr(obj, "name"):
        return obj.value
    return obj


def _write_metadata(out: Output, meta: RunMetadata):
    text = json.dumps(_jsonable(asdict(meta)), indent=2, sort_keys=True) + "\n"
    if out.meta_path:
        Path(out.meta_path).write_text(text)
    else:
        sys.stderr.write(text)


# parameter handling ---------------------------------------------------------------------


def _eps(v: str) -> float:
    x = float(v)
    if not (0.0 < x <= 0.5):
        raise argparse.ArgumentTypeError(f"eps={v} outside the valid range (0, 0.5]")
    return x


def _theta(v: str) -> float:
    x = parse_angle(v)
    if not (0.0 < x <= 2.0 * math.pi + 1e-15):
        raise argparse.ArgumentTypeError(f"theta={v} outside the valid range (0, 2*pi]")
    return min(x, 2.0 * math.pi)


def _positive_int(v: str) -> int:
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"{v} must be a positive integer")
    return n


def _protocol(args) -> ProtocolParams:
    eps_z = args.eps if args.eps is not None else args.eps_z
    eps_x = args.eps if args.eps is not None else args.eps_x
    if getattr(args, "perturb", None) is not None:
        eps_x = eps_z * args.perturb
        if not (0.0 < eps_x <= 0.5):
            raise UsageError(f"perturbed eps_x={eps_x} outside the valid range (0, 0.5]")
    th_z = args.theta if args.theta is not None else args.theta_z
    th_x = args.theta if args.theta is not None else args.theta_x
    return ProtocolParams(eps_z, eps_x, th_z, th_x)


def _order(args) -> MapOrder:
    return MapOrder(args.order)


def _seeds(args, p: ProtocolParams):
    if args.seed_points:
        return list(args.seed_points)
    if args.rbar is not None:
        return seed_transect(p, args.count, args.rbar, args.rbar)
    return seed_transect(p, args.count, args.rmin, args.rmax)


# subcommands ------------------------------------------------------------------------


def cmd_trajectory(args, out, meta):
    p, order = _protocol(args), _order(args)
    q = np.asarray(args.seed, dtype=float)[None, :]
    rows = [(0, "start", *q[0], float(np.linalg.norm(q)))]
    events = []
    for n in range(1, args.periods + 1):
        for axis in order.axes:
            if args.events:
                for ev in trajectory_events(p, axis, q[0], p.theta(axis)):
                    pos = ev.position.to_point(axis)
                    events.append((n, axis.value, ev.time, ev.kind.value, *pos))
            q = advance_points(p, axis, q, p.theta(axis))
            rows.append((n, axis.value, *q[0], float(np.linalg.norm(q))))
    out.table(["n", "stage", "x", "y", "z", "r"], rows)
    if args.events:
        ev_out = io.StringIO()
        w = csv.writer(ev_out, lineterminator="\n")
        w.writerow(["n", "stage", "time", "kind", "x", "y", "z"])
        for row in events:
            w.writerow([fmt(v) for v in row])
        Path(args.events).write_text(ev_out.getvalue())
    meta.counts.update(periods=args.periods, rows=len(rows), events=len(events))


def cmd_poincare(args, out, meta):
    p, order = _protocol(args), _order(args)
    seeds = _seeds(args, p)
    recs = run_poincare(p, order, seeds, args.periods, jobs=resolve_jobs(args.jobs))
    out.table(["seed_id", "n", "x", "y", "z", "r", "region"],
              ((r.seed_id, r.n, *r.position, r.r, r.region.value) for r in recs))
    meta.counts.update(seeds=len(seeds), periods=args.periods, records=len(recs))
    if args.svg:
        Path(args.svg).write_text(emit_svg(recs, args.view))


def cmd_radial_history(args, out, meta):
    p, order = _protocol(args), _order(args)
    seeds = _seeds(args, p)
    rows, slopes = [], []
    for i, s in enumerate(seeds):
        h = radial_history(p, order, s, args.periods)
        slopes.append(h.mean_abs_slope)
        rows.extend((i, int(n), r, bool(b)) for n, r, b in zip(h.n, h.r, h.bulk))
    out.table(["seed_id", "n", "r", "bulk"], rows)
    meta.counts.update(seeds=len(seeds), periods=args.periods)
    meta.results.update(mean_abs_slope=slopes, median_mean_abs_slope=float(np.median(slopes)),
                        floor=p.eps_max)


def cmd_switch_analyze(args, out, meta):
    p, order = _protocol(args), _order(args)
    sw = switch_point(p, order, args.seed)
    a = analyze_switch(p, sw, order)
    measured = measured_exit_radius(p, sw, order)
    out.table(["x", "y", "z", "in_layer", "kappa", "r_initial", "r_exit_predicted", "r_exit_measured",
               "derivation_applies"],
              [(*a.switch_point, a.in_layer, a.kappa, a.r_initial, a.r_exit_predicted,
                "" if measured is None else measured, a.derivation_applies)])
    meta.results.update(in_layer=a.in_layer, radius_changes=a.radius_changes)


def cmd_period_one(args, out, meta):
    p = _protocol(args)
    samples = sample_period_one_curves(p, args.samples)
    out.table(["branch", "stability", "component", "x", "y", "z"],
              ((s.branch.value, s.stability.value, s.component, *s.position) for s in samples))
    k = BowlCapConstants.from_params(p)
    meta.counts.update(samples=len(samples), components=len({s.component for s in samples}))
    meta.results.update(asdict(k))
    if args.svg:
        Path(args.svg).write_text(emit_svg([(s.component, *s.position) for s in samples], args.view))


def cmd_shell_points(args, out, meta):
    p = _protocol(args)
    res = shell_fixed_points(p, args.rbar)
    out.table(["stability", "x", "y", "z"], ((s.value, *pt) for pt, s in zip(res.points, res.stability)))
    meta.counts.update(points=len(res))
    meta.results.update(R_bar=res.R_bar, requested_R_bar=res.requested_R_bar, window=list(res.window))


def cmd_window(args, out, meta):
    p = _protocol(args)
    lo, hi = shell_existence_window(p)
    out.table(["R_lo", "R_hi"], [(lo, hi)])
    meta.results.update(R_lo=lo, R_hi=hi)


def cmd_optimal_angles(args, out, meta):
    tz, tx = optimal_angles(args.eps if args.eps is not None else args.eps_z,
                            args.eps if args.eps is not None else args.eps_x)
    p = ProtocolParams(args.eps or args.eps_z, args.eps or args.eps_x, tz, tx)
    k = BowlCapConstants.from_params(p)
    out.table(["theta_z", "theta_x", "c_z", "c_x"], [(tz, tx, k.c1, k.c3)])


def cmd_bowl_grid(args, out, meta):
    g = bowl_depth_grid((args.eps_min, args.eps_max), (args.theta_min, args.theta_max),
                        (args.n_eps, args.n_theta))
    out.table(["eps", "theta", "c", "depth_below_layer"], g.rows())
    meta.counts.update(rows=len(g.eps) * len(g.theta))
    meta.results.update(theta_min_locus=g.theta_min_locus, theta_max_locus=g.theta_max_locus)


def _ring_rows(rings):
    for i, ring in enumerate(rings):
        for q in ring.boundary_points:
            yield (ring.R_bar, i, *q)


def cmd_kam_ring(args, out, meta):
    p, order = _protocol(args), _order(args)
    ring = kam_tube_cloud(p, order, [args.rbar], tube=args.tube, n_rays=args.rays, n_periods=args.periods)[0]
    out.table(["R_bar", "ring_index", "x", "y", "z"], _ring_rows([ring]))
    meta.results.update(diameter=ring.diameter, converged=ring.converged, empty=ring.empty,
                        center=None if ring.center is None else list(ring.center))


def cmd_kam_tube(args, out, meta):
    p, order = _protocol(args), _order(args)
    radii = args.rbar_list or list(np.linspace(args.rbar_min, args.rbar_max, args.shells))
    rings = kam_tube_cloud(p, order, radii, tube=args.tube, n_rays=args.rays, n_periods=args.periods)
    out.table(["R_bar", "ring_index", "x", "y", "z"], _ring_rows(rings))
    meta.counts.update(shells=len(rings), points=sum(len(r.boundary_points) for r in rings))
    meta.results.update(diameters=[r.diameter for r in rings], empty=[r.empty for r in rings],
                        converged=[r.converged for r in rings])


def _auto_fixed_point(p: ProtocolParams, order: MapOrder, t: float) -> Point3:
    samples = [s for s in sample_period_one_curves(p, 200, branches=(Branch.BULK_BOWL,))
               if s.stability is Stability.HYPERBOLIC]
    if not samples:
        raise UsageError("no hyperbolic bulk period-one points for these parameters")
    comp = max({s.component for s in samples}, key=lambda c: max(s.position.x + s.position.z
                                                                  for s in samples if s.component == c))
    pts = np.array([s.position for s in samples if s.component == comp])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    target = min(max(t, 0.0), 1.0) * arc[-1]
    k = min(int(np.searchsorted(arc, target, side="right")) - 1, len(pts) - 2)
    f = 0.0 if seg[k] == 0 else (target - arc[k]) / seg[k]
    return polish_fixed_point(p, order, pts[k] + f * (pts[k + 1] - pts[k]))


def cmd_manifold(args, out, meta):
    p, order = _protocol(args), _order(args)
    if args.fixed_point is not None:
        src = args.fixed_point
    elif args.fixed_point_file is not None:
        src = parse_point(Path(args.fixed_point_file).read_text().strip().splitlines()[0])
    else:
        src = _auto_fixed_point(p, order, args.auto)
    kind = ManifoldKind(args.kind.capitalize())
    branch = BranchSign(args.branch.capitalize())
    dom = make_fundamental_domain(p, order, src, kind, branch, alpha=args.alpha, n_points=args.n_points)
    tr = trace_manifold(p, order, dom, args.periods, max_gap=args.max_gap)
    out.table(["image", "x", "y", "z"], ((int(i), *q) for i, q in zip(tr.image_index, tr.polyline)))
    targets = [dom.fixed_point]
    if p.symmetric():
        R = float(np.linalg.norm(np.asarray(dom.fixed_point)))
        try:
            targets += hyperbolic_shell_points(p, R)
        except TumblerError:
            pass
    conn = detect_connection(p, order, dom.fixed_point, targets, tol=args.tol, n_periods=args.periods,
                             kind=kind, branches=(branch,), alpha=args.alpha, max_gap=args.max_gap)
    meta.counts.update(points=len(tr), periods=tr.periods_traced)
    meta.results.update(fixed_point=list(dom.fixed_point), multiplier=dom.multiplier, truncated=tr.truncated,
                        connection={"kind": conn.kind.value, "source": list(conn.source),
                                    "target": None if conn.target is None else list(conn.target),
                                    "closest_approach": conn.closest_approach,
                                    "periods_used": conn.periods_used})
    if args.svg:
        Path(args.svg).write_text(emit_svg([(0, *q) for q in tr.polyline], args.view))


def cmd_connections(args, out, meta):
    p, order = _protocol(args), _order(args)
    entries = connection_sweep(p, order, R_bar_list=args.rbar_list, n_shells=args.shells,
                               tol=args.tol, n_periods=args.periods)
    out.table(["R_bar", "x", "y", "z", "kind", "closest_approach", "periods_used"],
              ((e.R_bar, *e.source, e.result.kind.value, e.result.closest_approach, e.result.periods_used)
               for e in entries))
    meta.counts.update(shells=len(entries))
    meta.results.update(homoclinic_ceases_at=homoclinic_cessation(entries))


def cmd_jacobian(args, out, meta):
    p, order = _protocol(args), _order(args)
    J = jacobian_fd(p, order, args.point, h=args.h)
    eig = eigen_3x3(J)
    res = {"point": list(args.point), "h": J.h, "matrix": J.matrix.tolist(), "det": J.det,
           "eigenvalues": [[v.real, v.imag] for v in eig.values],
           "eigenvectors_real": np.real(eig.vectors).tolist(), "eigenvectors_imag": np.imag(eig.vectors).tolist(),
           "classification": eig.classification.value}
    text = json.dumps(_jsonable(res), indent=2) + "\n"
    out._buf.write(text)
    meta.results.update(classification=eig.classification.value)


# parser --------------------------------------------------------------------------------


def _common(sp, *, protocol=True, order=True, svg=False):
    if protocol:
        sp.add_argument("--eps-z", type=_eps, default=0.15, help="layer depth for z rotation, in (0, 0.5]")
        sp.add_argument("--eps-x", type=_eps, default=0.15, help="layer depth for x rotation, in (0, 0.5]")
        sp.add_argument("--theta-z", type=_theta, default=math.pi, help="angle about z, in (0, 2pi]")
        sp.add_argument("--theta-x", type=_theta, default=math.pi, help="angle about x, in (0, 2pi]")
        sp.add_argument("--eps", type=_eps, default=None, help="set both layer depths")
        sp.add_argument("--theta", type=_theta, default=None, help="set both angles")
    if order:
        sp.add_argument("--order", choices=[m.value for m in MapOrder], default=MapOrder.Z_FIRST.value)
    sp.add_argument("-o", "--output", default=None, help="CSV output path (default stdout)")
    sp.add_argument("--metadata", default=None, help="JSON metadata path (default OUTPUT.meta.json or stderr)")
    sp.add_argument("--rng-seed", type=int, default=0, help="determinism seed recorded in metadata")
    sp.add_argument("--jobs", type=int, default=None, help="worker processes (default $TUMBLER_JOBS or 1)")
    if svg:
        sp.add_argument("--svg", default=None, help="also write an SVG scatter plot")
        sp.add_argument("--view", choices=sorted(PROJECTIONS), default="y", help="view axis for the SVG")


def _seeding(sp, periods):
    sp.add_argument("--rbar", type=float, default=None, help="seed on a single shell radius")
    sp.add_argument("--rmin", type=float, default=0.3)
    sp.add_argument("--rmax", type=float, default=0.9)
    sp.add_argument("--count", type=_positive_int, default=20)
    sp.add_argument("--seed-point", dest="seed_points", type=parse_point, action="append", default=None,
                    help="explicit seed x,y,z (repeatable)")
    sp.add_argument("--periods", type=_positive_int, default=periods)
    sp.add_argument("--perturb", type=float, default=None, help="set eps_x = PERTURB * eps_z")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tumbler", description="Blinking spherical tumbler flow as a linked twist map.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("trajectory", help="exact trajectory of one tracer")
    _common(sp)
    sp.add_argument("--seed", type=parse_point, default=Point3(-0.25, -0.5, -0.1), help="x,y,z")
    sp.add_argument("--periods", type=_positive_int, default=1)
    sp.add_argument("--events", default=None, help="write the layer entry/exit event log to this CSV")
    sp.set_defaults(func=cmd_trajectory)

    sp = sub.add_parser("poincare", help="once-per-period section")
    _common(sp, svg=True)
    _seeding(sp, 500)
    sp.set_defaults(func=cmd_poincare)

    sp = sub.add_parser("radial-history", help="bulk radius per period")
    _common(sp)
    _seeding(sp, 500)
    sp.set_defaults(func=cmd_radial_history)

    sp = sub.add_parser("switch-analyze", help="radial bookkeeping at the axis switch")
    _common(sp)
    sp.add_argument("--seed", type=parse_point, default=Point3(-0.25, -0.5, -0.1), help="x,y,z before the first stage")
    sp.set_defaults(func=cmd_switch_analyze)

    sp = sub.add_parser("period-one", help="sample the curves of period-one points")
    _common(sp, order=False, svg=True)
    sp.add_argument("--samples", type=_positive_int, default=100)
    sp.set_defaults(func=cmd_period_one)

    sp = sub.add_parser("shell-points", help="period-one points on a bulk shell")
    _common(sp, order=False)
    sp.add_argument("--rbar", type=float, default=0.62)
    sp.set_defaults(func=cmd_shell_points)

    sp = sub.add_parser("window", help="shell radii that carry period-one points")
    _common(sp, order=False)
    sp.set_defaults(func=cmd_window)

    sp = sub.add_parser("optimal-angles", help="angles minimising the bowl depth")
    _common(sp, order=False)
    sp.set_defaults(func=cmd_optimal_angles)

    sp = sub.add_parser("bowl-grid", help="bowl constant over a grid of eps and theta")
    _common(sp, protocol=False, order=False)
    sp.add_argument("--eps-min", type=_eps, default=0.01)
    sp.add_argument("--eps-max", type=_eps, default=0.5)
    sp.add_argument("--theta-min", type=parse_angle, default=0.0)
    sp.add_argument("--theta-max", type=parse_angle, default=2.0 * math.pi)
    sp.add_argument("--n-eps", type=_positive_int, default=50)
    sp.add_argument("--n-theta", type=_positive_int, default=200)
    sp.set_defaults(func=cmd_bowl_grid)

    for name, fn in (("kam-ring", cmd_kam_ring), ("kam-tube", cmd_kam_tube)):
        sp = sub.add_parser(name, help="island boundary ring" if name == "kam-ring" else "stack of island rings")
        _common(sp)
        if name == "kam-ring":
            sp.add_argument("--rbar", type=float, default=0.62)
        else:
            sp.add_argument("--rbar-list", type=parse_float_list, default=None)
            sp.add_argument("--rbar-min", type=float, default=0.547)
            sp.add_argument("--rbar-max", type=float, default=0.62)
            sp.add_argument("--shells", type=_positive_int, default=5)
        sp.add_argument("--rays", type=_positive_int, default=16)
        sp.add_argument("--periods", type=_positive_int, default=200)
        sp.add_argument("--tube", type=int, choices=(0, 1), default=0)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("manifold", help="trace a stable or unstable manifold")
    _common(sp, svg=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--fixed-point", type=parse_point, default=None)
    g.add_argument("--fixed-point-file", default=None, help="file whose first line is x,y,z")
    g.add_argument("--auto", type=float, default=0.5, help="arc-length fraction along the hyperbolic bulk curve")
    sp.add_argument("--kind", choices=("stable", "unstable"), default="stable")
    sp.add_argument("--branch", choices=("plus", "minus"), default="plus")
    sp.add_argument("--periods", type=_positive_int, default=27)
    sp.add_argument("--alpha", type=float, default=1e-4)
    sp.add_argument("--n-points", type=_positive_int, default=64)
    sp.add_argument("--max-gap", type=float, default=5e-3)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.set_defaults(func=cmd_manifold)

    sp = sub.add_parser("connections", help="sweep hyperbolic points for manifold connections")
    _common(sp)
    sp.add_argument("--rbar-list", type=parse_float_list, default=None)
    sp.add_argument("--shells", type=_positive_int, default=8)
    sp.add_argument("--periods", type=_positive_int, default=100)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.set_defaults(func=cmd_connections)

    sp = sub.add_parser("jacobian", help="finite-difference Jacobian and its spectrum")
    _common(sp)
    sp.add_argument("--point", type=parse_point, required=True)
    sp.add_argument("--h", type=float, default=1e-6)
    sp.set_defaults(func=cmd_jacobian)
    return ap


def _config(args) -> RunConfig:
    skip = {"func", "output", "metadata", "rng_seed", "command", "verbose"}
    opts = {k: v for k, v in vars(args).items() if k not in skip}
    proto = {}
    if hasattr(args, "eps_z"):
        try:
            proto = _protocol(args).as_dict()
        except (TumblerError, UsageError):
            proto = {}
    return RunConfig(args.command, proto, getattr(args, "order", MapOrder.Z_FIRST.value), opts,
                     args.rng_seed, args.output, args.metadata)


def parse_and_dispatch(argv=None) -> int:
    """Run one subcommand; returns 0 on success, 1 on a domain error, 2 on a usage error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    out = Output(args)
    t0 = time.perf_counter()
    cfg = _config(args)
    meta = RunMetadata("tumbler", __version__, asdict(cfg), 0.0, determinism_seed=args.rng_seed)
    try:
        np.random.seed(args.rng_seed)
        args.func(args, out, meta)
    except TumblerError as exc:
        print(f"tumbler: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (UsageError, ValueError) as exc:
        print(f"tumbler: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out.flush()
    meta.wall_time_s = time.perf_counter() - t0
    _write_metadata(out, meta)
    return EXIT_OK


def main(argv=None):
    sys.exit(parse_and_dispatch(argv))


if __name__ == "__main__":
    main()
