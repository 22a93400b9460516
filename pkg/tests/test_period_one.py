from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from window_oracle import bulk_period, scan_window, shell_roots
from tumbler import (Axis, EmptyIntersection, MapOrder, NonSymmetricParams, ProtocolParams, apply_map,
                     bowl_constant, bowl_depth_grid, cap_constant, optimal_angles, sample_period_one_curves,
                     shell_existence_window, shell_fixed_points, streamline_period)
from tumbler.geometry import RegionTag, classify_region
from tumbler.period_one import Branch, BowlCapConstants, Stability, stability_from_sign

PI = math.pi
P = ProtocolParams(0.15, 0.15, PI, PI)
SQRT_C = 0.5449303627002884
R_HI = 0.6716175487583406


def _bisect(f, a, b, n=100):
    fa = f(a)
    for _ in range(n):
        m = 0.5 * (a + b)
        if (f(m) > 0) == (fa > 0):
            a, fa = m, f(m)
        else:
            b = m
    return 0.5 * (a + b)


def test_bowl_constant_examples():
    assert bowl_constant(0.15, 0.15 * PI) == pytest.approx(0.0225, abs=1e-15)
    assert bowl_constant(0.15, 1.15 * PI) == pytest.approx(1.0, abs=1e-15)
    assert bowl_constant(0.15, PI) == pytest.approx(0.2969491001926679, abs=1e-15)
    assert math.sqrt(bowl_constant(0.15, PI)) == pytest.approx(0.5449, abs=5e-4)


def test_bowl_constant_matches_streamline_period_oracle():
    # the bowl bottom (0, -sqrt(c), 0) is the bulk point whose period equals theta
    for eps, th in ((0.15, PI), (0.1, 2.0), (0.3, 3.5), (0.45, 1.8)):
        y = _bisect(lambda yy: streamline_period(ProtocolParams(eps, eps), Axis.Z, (0.0, yy, 0.0)) - th,
                    -1.0 + 1e-12, -eps - 1e-9)
        assert math.sqrt(bowl_constant(eps, th)) == pytest.approx(-y, abs=1e-10)


def test_cap_constant_examples():
    assert cap_constant(0.15, 0.15 * PI) == pytest.approx(1.0, abs=1e-15)
    assert cap_constant(0.15, 1.15 * PI) == pytest.approx(0.0, abs=1e-12)
    d = cap_constant(0.15, PI)
    assert d == pytest.approx(0.4701261065988436, abs=1e-15)
    assert streamline_period(P, Axis.Z, (0.0, -d * 0.15, 0.0)) == pytest.approx(PI, abs=1e-9)


def test_constants_relation_and_bounds():
    for eps in (0.05, 0.15, 0.3, 0.5):
        for th in np.linspace(0, 2 * PI, 37):
            c, d = bowl_constant(eps, th), cap_constant(eps, th)
            assert eps * eps - 1e-15 <= c <= 1 + 1e-15
            assert -1e-15 <= d <= 1 + 1e-15
            assert c == pytest.approx((1 - eps * eps) * (1 - d) ** 2 + eps * eps, abs=1e-14)


@pytest.mark.parametrize("eps", [0.1, 0.15, 0.3])
def test_extrema_on_grid(eps):
    th = np.arange(0.0, 2 * PI, 1e-4)
    c = np.array([bowl_constant(eps, t) for t in th])
    assert th[np.argmin(c)] == pytest.approx(eps * PI, abs=1e-4)
    assert th[np.argmax(c)] == pytest.approx((1 + eps) * PI, abs=1e-4)
    assert bowl_constant(eps, eps * PI) == pytest.approx(eps * eps, abs=1e-9)
    assert bowl_constant(eps, (1 + eps) * PI) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("eps", [0.05, 0.15, 0.3, 0.5])
def test_monotone_branches(eps):
    # decreasing up to eps*pi, increasing up to (1+eps)*pi, decreasing after
    th = np.linspace(0, 2 * PI, 4001)
    c = np.array([bowl_constant(eps, t) for t in th])
    dc = np.diff(c)
    mid = 0.5 * (th[1:] + th[:-1])
    assert np.all(dc[mid < eps * PI] <= 1e-15)
    assert np.all(dc[(mid > eps * PI) & (mid < (1 + eps) * PI)] >= -1e-15)
    assert np.all(dc[mid > (1 + eps) * PI] <= 1e-15)


def test_optimal_angles():
    tz, tx = optimal_angles(0.15, 0.15)
    assert (tz, tx) == pytest.approx((0.471239, 0.471239), abs=1e-6)
    assert bowl_constant(0.15, tz) == pytest.approx(0.0225, abs=1e-15)
    tz, tx = optimal_angles(0.1, 0.4)
    assert (tz, tx) == pytest.approx((0.1 * PI, 0.4 * PI))


def test_bowl_depth_grid():
    g = bowl_depth_grid((0.05, 0.5), (0.0, 2 * PI), (10, 400))
    assert g.c.shape == (10, 400)
    assert np.all(g.depth_below_layer >= -1e-15)
    for i, e in enumerate(g.eps):
        for j, t in enumerate(g.theta[::37]):
            assert g.c[i, j * 37] == pytest.approx(bowl_constant(e, t), abs=1e-14)
    assert g.theta_min_locus == pytest.approx(g.eps * PI)
    assert len(list(g.rows())) == 4000


def test_stability_rule():
    assert stability_from_sign(0.1, 0.2) is Stability.HYPERBOLIC
    assert stability_from_sign(0.1, -0.2) is Stability.ELLIPTIC
    assert stability_from_sign(0.0, 0.3) is Stability.PARABOLIC


def test_symmetric_curve_crossings():
    s = sample_period_one_curves(P, 101)
    bulk = np.array([x.position for x in s if x.branch is Branch.BULK_BOWL])
    cap = np.array([x.position for x in s if x.branch is Branch.LAYER_CAP])
    k = np.argmin(np.abs(bulk[:, 0]) + np.abs(bulk[:, 2]))
    assert bulk[k] == pytest.approx([0.0, -SQRT_C, 0.0], abs=1e-12)
    k = np.argmin(np.abs(cap[:, 0]) + np.abs(cap[:, 2]))
    assert np.abs(cap[k, [0, 2]]).max() < 1e-2
    # the cap curves cross at the cap apex
    d = cap_constant(0.15, PI)
    near = cap[np.abs(cap[:, 0]) + np.abs(cap[:, 2]) < 0.03]
    assert near.size and np.min(np.abs(near[:, 1] + d * 0.15)) < 1e-3


def test_curves_separate_for_unequal_angles():
    p = ProtocolParams(0.15, 0.15, 12 * PI / 11, PI)
    s = sample_period_one_curves(p, 200)
    pts = np.array([x.position for x in s])
    assert np.min(np.hypot(pts[:, 0], pts[:, 2])) > 1e-3


@pytest.mark.parametrize("p", [P, ProtocolParams(0.15, 0.15, 12 * PI / 11, PI), ProtocolParams(0.1, 0.2, 2.5, 3.0),
                               ProtocolParams(0.3, 0.15, PI, 0.9 * PI)])
@pytest.mark.parametrize("order", list(MapOrder))
def test_samples_are_fixed_points(p, order):
    samples = sample_period_one_curves(p, 60)
    for s in samples:
        q = np.asarray(s.position)
        assert np.linalg.norm(np.asarray(apply_map(p, order, q)) - q) < 1e-7
        tag_z = classify_region(p, Axis.Z, q)
        if s.branch is Branch.BULK_BOWL:
            assert tag_z in (RegionTag.BULK, RegionTag.INTERFACE_BOUNDARY)


def test_bulk_samples_on_both_bowls():
    p = ProtocolParams(0.15, 0.15, 12 * PI / 11, PI)
    for s in sample_period_one_curves(p, 50, branches=(Branch.BULK_BOWL,)):
        q = s.position
        assert bulk_period(np.array([q.x]), np.array([q.y]), np.array([q.z]), 0.15)[0] == pytest.approx(
            p.theta_z, abs=1e-10)
        assert bulk_period(np.array([q.z]), np.array([q.y]), np.array([q.x]), 0.15)[0] == pytest.approx(
            p.theta_x, abs=1e-10)


def test_empty_intersection_outside_angle_range():
    with pytest.raises(EmptyIntersection):
        sample_period_one_curves(ProtocolParams(0.15, 0.15, 0.1, PI))


def test_shell_points_example():
    res = shell_fixed_points(P, 0.62)
    assert len(res) == 4
    for q, s in zip(res.points, res.stability):
        assert abs(q.x) == pytest.approx(0.3526864356631631, abs=1e-13)
        assert q.y == pytest.approx(-0.368272394021636, abs=1e-13)
        assert math.sqrt(q.x ** 2 + q.y ** 2 + q.z ** 2) == pytest.approx(0.62, abs=1e-12)
        assert s is stability_from_sign(q.x, q.z)
        assert np.linalg.norm(np.asarray(apply_map(P, MapOrder.Z_FIRST, q)) - np.asarray(q)) < 1e-7
    # the defining system: on both bowls and on the shell
    k = BowlCapConstants.from_params(P)
    for q in res.points:
        assert q.x ** 2 + q.y ** 2 + k.c1 * q.z ** 2 - k.c1 == pytest.approx(0.0, abs=1e-12)
        assert q.z ** 2 + q.y ** 2 + k.c3 * q.x ** 2 - k.c3 == pytest.approx(0.0, abs=1e-12)
    assert sorted(s.value for s in res.stability) == ["Elliptic", "Elliptic", "Hyperbolic", "Hyperbolic"]
    # oracle: the brute-force shell search finds the same arc parameter
    assert shell_roots(0.62, 0.15, PI) == pytest.approx([0.3526864356631631], abs=1e-12)


@pytest.mark.parametrize("R,count", [(0.35, 0), (SQRT_C, 1), (0.544929, 1), (0.62, 4), (0.9, 0)])
def test_shell_counts(R, count):
    res = shell_fixed_points(P, R)
    assert len(res) == count
    if count == 1:
        assert res.stability == [Stability.PARABOLIC]
        assert res.points[0] == pytest.approx((0.0, -SQRT_C, 0.0), abs=1e-15)


def test_shell_points_unequal_angles_edge():
    p = ProtocolParams(0.15, 0.15, 12 * PI / 11, PI)
    lo, hi = shell_existence_window(p)
    res = shell_fixed_points(p, lo)
    assert len(res) == 2 and all(s is Stability.PARABOLIC for s in res.stability)
    mid = shell_fixed_points(p, 0.5 * (lo + hi))
    assert len(mid) == 4
    for q in mid.points:
        assert np.linalg.norm(np.asarray(apply_map(p, MapOrder.Z_FIRST, q)) - np.asarray(q)) < 1e-7
    assert len(shell_fixed_points(p, hi + 1e-4)) == 0


def test_shell_requires_symmetric():
    with pytest.raises(NonSymmetricParams):
        shell_fixed_points(ProtocolParams(0.15, 0.16), 0.6)
    with pytest.raises(NonSymmetricParams):
        shell_existence_window(ProtocolParams(0.15, 0.16))


def test_window_formula():
    lo, hi = shell_existence_window(P)
    assert lo == pytest.approx(SQRT_C, abs=1e-15)
    assert hi == pytest.approx(R_HI, abs=1e-15)


def test_window_brute_force_scan():
    lo, hi = scan_window(0.15, PI)
    wlo, whi = shell_existence_window(P)
    assert lo == pytest.approx(wlo, abs=1e-9)
    assert hi == pytest.approx(whi, abs=1e-9)


def test_window_edges_consistent():
    lo, hi = shell_existence_window(P)
    assert len(shell_fixed_points(P, lo)) == 1
    assert len(shell_fixed_points(P, hi - 1e-6)) == 4
    assert len(shell_fixed_points(P, hi + 1e-6)) == 0


@settings(max_examples=150, deadline=None)
@given(st.floats(0.02, 0.5), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.01, 0.99))
def test_shell_points_invariants(eps, tz, tx, frac):
    lo_t, hi_t = eps * PI, (1 + eps) * PI
    p = ProtocolParams(eps, eps, lo_t + tz * (hi_t - lo_t), lo_t + tx * (hi_t - lo_t))
    lo, hi = shell_existence_window(p)
    if hi <= lo + 1e-6:
        return
    R = lo + frac * (hi - lo)
    if R <= eps:
        return
    res = shell_fixed_points(p, R)
    k = BowlCapConstants.from_params(p)
    assert len(res) in (1, 2, 4)
    for q in res.points:
        assert math.sqrt(q.x ** 2 + q.y ** 2 + q.z ** 2) == pytest.approx(res.R_bar, abs=1e-12)
        for a in Axis:
            assert classify_region(p, a, q) is RegionTag.BULK
        assert q.x ** 2 + q.y ** 2 + k.c1 * q.z ** 2 == pytest.approx(k.c1, abs=1e-12)
        assert q.z ** 2 + q.y ** 2 + k.c3 * q.x ** 2 == pytest.approx(k.c3, abs=1e-12)
        # on the bowl of each axis: (1-c) x_u^2 + ... fixed by the period condition
        tz_ = bulk_period(np.array([q.x]), np.array([q.y]), np.array([q.z]), eps)[0]
        tx_ = bulk_period(np.array([q.z]), np.array([q.y]), np.array([q.x]), eps)[0]
        assert tz_ == pytest.approx(p.theta_z, abs=1e-8)
        assert tx_ == pytest.approx(p.theta_x, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.02, 0.5), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_no_assumed_angle_ordering(eps, a, b):
    # larger angle does not imply the deeper bowl outside the monotone range
    tz, tx = 2 * PI * a, 2 * PI * b
    c1, c3 = bowl_constant(eps, tz), bowl_constant(eps, tx)
    k = BowlCapConstants.from_params(ProtocolParams(eps, eps, tz, tx))
    assert (k.c1, k.c3) == (c1, c3)


def test_angle_ordering_counterexample_exists():
    eps = 0.15
    assert bowl_constant(eps, 1.9 * PI) < bowl_constant(eps, PI)
