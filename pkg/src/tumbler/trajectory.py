"""Closed-form evolution of a tracer under rotation about a single axis.

Within a cross-section at fixed held coordinate every streamline is closed.
It consists of a bulk arc of solid-body rotation and a transit through the
flowing layer. In the layer, with ``w = (y + delta(x)) / eps``, the pair
``(-x, w)`` rotates uniformly at rate ``1/eps`` on a circle of radius ``A``,
so each transit lasts exactly ``eps*pi``. In the bulk the point rotates on a
circle of radius ``rho`` with ``rho^2 = (1 - eps^2) A^2 + eps^2 L^2``.

A streamline is therefore labelled by its amplitude ``A`` (the magnitude of
its layer entry abscissa) and a point on it by a phase in ``[0, T)``: phase 0
is the layer entry, ``eps*pi`` the layer exit, and the remainder is the bulk
arc back to the entry. Advancing by an angle is phase addition modulo ``T``.
Stitching through the interface is exact because both branches share the
entry and exit points analytically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoBulkEntry
from .geometry import Axis, Point3, ProtocolParams, from_frame, sanitize_points, to_frame

ASIN_CLAMP = 1e-12


class EventKind(enum.Enum):
    ENTER_LAYER = "EnterLayer"
    EXIT_LAYER = "ExitLayer"
    ROTATION_END = "RotationEnd"


@dataclass(frozen=True)
class CrossSectionState:
    """In-plane state of a tracer in the cross-section of the active axis.

    ``x`` is the horizontal in-plane coordinate (``z`` of the full point for
    rotation about x), ``fixed_coord`` the held coordinate.
    """

    x: float
    y: float
    fixed_coord: float
    eps: float

    @property
    def L(self) -> float:
        return math.sqrt(max(1.0 - self.fixed_coord ** 2, 0.0))

    def depth(self, x: float | None = None) -> float:
        x = self.x if x is None else x
        return self.eps * math.sqrt(max(self.L ** 2 - x * x, 0.0))

    @classmethod
    def from_point(cls, p: ProtocolParams, a: Axis, pt) -> "CrossSectionState":
        u, y, h = to_frame(a, float(pt[0]), float(pt[1]), float(pt[2]))
        return cls(u, y, h, p.eps(a))

    def to_point(self, a: Axis) -> Point3:
        return Point3(*from_frame(a, self.x, self.y, self.fixed_coord))


@dataclass(frozen=True)
class TrajectoryEvent:
    time: float
    kind: EventKind
    position: CrossSectionState


def _clamped_asin(s: float) -> float:
    if abs(s) > 1.0:
        if abs(s) - 1.0 > ASIN_CLAMP:
            raise DomainError(f"asin argument {s!r} outside [-1, 1]")
        s = math.copysign(1.0, s)
    return math.asin(s)


def entry_point_from_bulk(s: CrossSectionState) -> tuple[float, float]:
    """Layer entry point ``(x1, y1)`` of the streamline through a bulk point.

    The entry point has the same bulk radius and lies on the interface, on the
    upstream (negative ``x``) side.
    """
    L2 = s.L ** 2
    eps2 = s.eps ** 2
    num = s.x * s.x + s.y * s.y - eps2 * L2
    if num < 0.0:
        raise NoBulkEntry("streamline lies entirely inside the layer footprint")
    x1 = -math.sqrt(min(num / (1.0 - eps2), L2))
    y1 = -s.eps * math.sqrt(max(L2 - x1 * x1, 0.0))
    return x1, y1


def entry_point_from_layer(s: CrossSectionState) -> tuple[float, float]:
    """Virtual layer entry abscissa and time already spent in the layer.

    Returns ``(x1, elapsed)`` where ``x1 < 0`` is the entry abscissa of the
    layer streamline through ``s`` and ``elapsed`` is the time since entry.
    """
    L2 = s.L ** 2
    delta = s.depth()
    arg = L2 + 2.0 * (delta * s.y + 0.5 * s.y * s.y) / s.eps ** 2
    if arg <= 0.0:
        raise NoBulkEntry("degenerate layer streamline (stagnation point)")
    x1 = -math.sqrt(min(arg, L2))
    elapsed = s.eps * (_clamped_asin(s.x / abs(x1)) + 0.5 * math.pi)
    return x1, elapsed


# vectorized core --------------------------------------------------------------


def _phase_state(u, y, h, eps):
    """Streamline amplitude, phase and period for in-frame coordinates."""
    L2 = np.clip(1.0 - h * h, 0.0, None)
    eps2 = eps * eps
    S = np.sqrt(np.clip(L2 - u * u, 0.0, None))
    layer = y >= -eps * S
    # layer branch
    w = np.where(layer, (y + eps * S) / eps, 0.0)
    w = np.clip(w, 0.0, None)
    A_layer = np.hypot(u, w)
    phi_layer = eps * np.arctan2(w, -u)
    # bulk branch
    rho2 = u * u + y * y
    A2_bulk = np.clip((rho2 - eps2 * L2) / (1.0 - eps2), 0.0, None)
    A = np.where(layer, A_layer, np.sqrt(A2_bulk))
    A = np.minimum(A, np.sqrt(L2))
    d1 = eps * np.sqrt(np.clip(L2 - A * A, 0.0, None))
    alpha_exit = np.arctan2(A, d1)
    alpha = np.clip(np.arctan2(u, -y), -alpha_exit, alpha_exit)
    phi_bulk = eps * np.pi + alpha_exit - alpha
    phi = np.where(layer, phi_layer, phi_bulk)
    T = eps * np.pi + 2.0 * alpha_exit
    return A, phi, T, L2, alpha_exit, d1


def _position(A, phi, L2, alpha_exit, d1, eps):
    """In-frame position ``(u, y)`` on the streamline ``A`` at phase ``phi``."""
    in_layer = phi <= eps * np.pi
    uang = phi / eps
    u_l = -A * np.cos(uang)
    w_l = A * np.sin(uang)
    y_l = eps * w_l - eps * np.sqrt(np.clip(L2 - u_l * u_l, 0.0, None))
    alpha = eps * np.pi + alpha_exit - phi
    rho = np.sqrt(A * A + d1 * d1)
    u_b = rho * np.sin(alpha)
    y_b = -rho * np.cos(alpha)
    u = np.where(in_layer, u_l, u_b)
    y = np.where(in_layer, np.minimum(y_l, 0.0), y_b)
    return u, y


def advance_points(p: ProtocolParams, a: Axis, pts: np.ndarray, angle) -> np.ndarray:
    """Advance an ``(N, 3)`` array by a signed rotation angle about ``a``.

    ``angle`` may be a scalar or an array of length ``N``; negative values run
    the flow backwards. The held coordinate is copied unchanged. No domain
    checks are made here.
    """
    pts = np.asarray(pts, dtype=float)
    out = pts.copy()
    tau = np.broadcast_to(np.asarray(angle, dtype=float), pts.shape[:1])
    move = tau != 0.0
    if not np.any(move):
        return out
    eps = p.eps(a)
    u, y, h = to_frame(a, pts[move, 0], pts[move, 1], pts[move, 2])
    A, phi, T, L2, alpha_exit, d1 = _phase_state(u, y, h, eps)
    new_phi = np.mod(phi + tau[move], T)
    new_phi = np.where(new_phi >= T, 0.0, new_phi)
    nu, ny = _position(A, new_phi, L2, alpha_exit, d1, eps)
    iu = 0 if a is Axis.Z else 2
    out[move, iu] = nu
    out[move, 1] = ny
    return out


# scalar public API -------------------------------------------------------------


def _checked(pt) -> np.ndarray:
    return sanitize_points(np.asarray(pt, dtype=float).reshape(3), reject_rim=True)


def advance_single_axis(p: ProtocolParams, a: Axis, pt, angle: float) -> Point3:
    """Exact position after rotating the tumbler by ``angle`` about ``a``."""
    if angle < 0.0:
        raise DomainError("angle must be non-negative; use advance_single_axis_backward")
    q = _checked(pt)
    return Point3.from_array(advance_points(p, a, q[None, :], angle)[0])


def advance_single_axis_backward(p: ProtocolParams, a: Axis, pt, angle: float) -> Point3:
    """Exact inverse of :func:`advance_single_axis`."""
    if angle < 0.0:
        raise DomainError("angle must be non-negative")
    q = _checked(pt)
    return Point3.from_array(advance_points(p, a, q[None, :], -angle)[0])


def streamline_phase(p: ProtocolParams, a: Axis, pt) -> tuple[float, float, float]:
    """Return ``(amplitude, phase, period)`` of the streamline through ``pt``."""
    q = _checked(pt)
    u, y, h = to_frame(a, q[0:1], q[1:2], q[2:3])
    A, phi, T, *_ = _phase_state(u, y, h, p.eps(a))
    return float(A[0]), float(phi[0]), float(T[0])


def streamline_period(p: ProtocolParams, a: Axis, pt) -> float:
    """Period of the closed streamline through ``pt``.

    Equals ``eps*pi`` of layer transit plus the bulk arc time
    ``-2*asin(x1/sqrt(x1^2+y1^2))``. Raises :class:`NoBulkEntry` at the
    stagnation point, whose streamline is degenerate.
    """
    q = _checked(pt)
    s = CrossSectionState.from_point(p, a, q)
    if s.y < -s.depth():
        x1, y1 = entry_point_from_bulk(s)
    else:
        x1, _ = entry_point_from_layer(s)
        y1 = -s.depth(x1)
    rho = math.hypot(x1, y1)
    if rho == 0.0:
        raise NoBulkEntry("degenerate streamline")
    return -2.0 * _clamped_asin(x1 / rho) + s.eps * math.pi


def layer_time_per_period(p: ProtocolParams, a: Axis, pt) -> float:
    """Time spent in the layer during one full period of the streamline."""
    streamline_period(p, a, pt)
    return p.eps(a) * math.pi


def trajectory_events(p: ProtocolParams, a: Axis, pt, angle: float) -> list[TrajectoryEvent]:
    """Time-ordered layer entry/exit events during a rotation, ending with RotationEnd."""
    if angle < 0.0:
        raise DomainError("angle must be non-negative")
    q = _checked(pt)
    eps = p.eps(a)
    u, y, h = to_frame(a, q[0:1], q[1:2], q[2:3])
    A, phi, T, *_ = _phase_state(u, y, h, eps)
    phi0, period = float(phi[0]), float(T[0])
    events: list[tuple[float, EventKind]] = []
    degenerate = float(A[0]) == 0.0
    if not degenerate:
        for target, kind in ((0.0, EventKind.ENTER_LAYER), (eps * math.pi, EventKind.EXIT_LAYER)):
            t = (target - phi0) % period
            if t == 0.0:
                t = period
            while t <= angle:
                events.append((t, kind))
                t += period
    events.sort(key=lambda e: e[0])
    out = []
    for t, kind in events:
        pos = advance_points(p, a, q[None, :], t)[0]
        out.append(TrajectoryEvent(t, kind, CrossSectionState.from_point(p, a, pos)))
    end = advance_points(p, a, q[None, :], angle)[0]
    out.append(TrajectoryEvent(angle, EventKind.ROTATION_END, CrossSectionState.from_point(p, a, end)))
    return out
