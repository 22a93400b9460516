from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import random_hemisphere
from switch_oracle import switch_property_check
from tumbler import (MapOrder, NoEllipticPoint, ProtocolParams, RegionTag, analyze_switch, kam_island_boundary,
                     kam_tube_cloud, radial_history, run_poincare, seed_transect)
from tumbler.geometry import Axis, classify_region
from tumbler.transport import (bulk_radius_drift, measured_exit_radius, orbits, resolve_jobs,
                               streamline_bulk_radius, switch_point)
from tumbler.twistmap import map_points

PI = math.pi
P = ProtocolParams(0.15, 0.15, PI, PI)
Z = MapOrder.Z_FIRST


def test_fig3_switch_example():
    p = ProtocolParams(0.15, 0.165, 5 * PI / 12, 5 * PI / 12)
    sw = switch_point(p, Z, (-0.25, -0.5, -0.1))
    a = analyze_switch(p, sw, Z)
    assert a.in_layer and a.derivation_applies
    assert a.r_initial == pytest.approx(0.5678908345800274, abs=1e-13)
    assert a.r_exit_predicted == pytest.approx(0.5906366359621315, abs=1e-13)
    assert a.radius_changes
    measured = measured_exit_radius(p, sw, Z)
    assert measured == pytest.approx(a.r_exit_predicted, abs=1e-8)


def test_symmetric_layer_switch_keeps_radius(rng):
    for q in random_hemisphere(rng, 300):
        a = analyze_switch(P, q, Z)
        assert a.r_exit_predicted == pytest.approx(a.r_initial, abs=1e-10)


def test_bulk_switch_keeps_radius(rng):
    p = ProtocolParams(0.1, 0.3, 2.0, 4.0)
    for q in random_hemisphere(rng, 300):
        a = analyze_switch(p, q, Z)
        if not a.in_layer:
            assert a.r_exit_predicted == pytest.approx(math.sqrt(q @ q), abs=1e-10)
            assert not a.radius_changes


def test_streamline_bulk_radius_continuity():
    # a layer point and the bulk arc of its streamline share the radius
    p = ProtocolParams(0.2, 0.2)
    from tumbler import advance_single_axis, streamline_period
    q = (0.3, -0.05, 0.1)
    rb = streamline_bulk_radius(p, Axis.Z, q)
    T = streamline_period(p, Axis.Z, q)
    for t in np.linspace(0, T, 50):
        r = advance_single_axis(p, Axis.Z, q, t)
        if classify_region(p, Axis.Z, r) is RegionTag.BULK:
            assert math.sqrt(sum(c * c for c in r)) == pytest.approx(rb, abs=1e-12)


def test_switch_property_suite_small(rng):
    s = switch_property_check(rng, n_draws=20, per_draw=100)
    assert s["seeds"] > 1500
    assert s["changes"] > 100
    assert s["violations"] == 0
    assert s["predicted"] > 100 and s["max_pred_err"] < 1e-8


def test_seed_transect():
    one = seed_transect(P, 1, 0.6, 0.6)
    assert len(one) == 1 and one[0].z == -one[0].x
    seeds = seed_transect(P, 20, 0.3, 0.9)
    r = [q.r for q in seeds]
    assert r == pytest.approx(np.linspace(0.3, 0.9, 20), abs=1e-12)
    for q in seeds + seed_transect(P, 20, 0.62, 0.62):
        assert q.z == -q.x
        for a in Axis:
            assert classify_region(P, a, q) is RegionTag.BULK


def test_poincare_records_and_determinism():
    seeds = seed_transect(P, 3, 0.4, 0.8)
    a = run_poincare(P, Z, seeds, 10)
    b = run_poincare(P, Z, seeds, 10, jobs=2)
    assert len(a) == 3 * 11
    assert [(r.seed_id, r.n) for r in a] == sorted((r.seed_id, r.n) for r in a)
    assert all(r.r <= 1.0 for r in a)
    assert [tuple(r.position) for r in a] == [tuple(r.position) for r in b]


def test_orbits_sharding_bitwise(rng):
    seeds = random_hemisphere(rng, 17)
    assert np.array_equal(orbits(P, Z, seeds, 20, jobs=1), orbits(P, Z, seeds, 20, jobs=3))


def test_resolve_jobs_env(monkeypatch):
    monkeypatch.setenv("TUMBLER_JOBS", "3")
    assert resolve_jobs(None) == 3
    assert resolve_jobs(2) == 2
    monkeypatch.delenv("TUMBLER_JOBS")
    assert resolve_jobs(None) == 1


def test_symmetric_section_confined():
    seeds = seed_transect(P, 5, 0.35, 0.35)
    recs = run_poincare(P, Z, seeds, 500)
    for rec in recs:
        if rec.region is RegionTag.BULK:
            assert rec.r == pytest.approx(0.35, abs=1e-9)


def test_drift_ordering():
    drifts = {}
    for f in (1.0, 1.01, 1.10):
        p = ProtocolParams(0.15, 0.15 * f, PI, PI)
        seeds = seed_transect(p, 5, 0.9, 0.9)
        d = bulk_radius_drift(run_poincare(p, Z, seeds, 200))
        drifts[f] = max(d.values())
    assert drifts[1.0] < 1e-9
    assert drifts[1.10] > drifts[1.01] > drifts[1.0]
    assert drifts[1.01] < 0.05


def test_radial_history_floor_and_slope():
    p = ProtocolParams(0.15, 0.165, PI, PI)
    seed = seed_transect(p, 1, 0.9, 0.9)[0]
    h = radial_history(p, Z, seed, 300)
    assert len(h.n) == 301
    assert np.all(h.r[h.bulk] >= h.floor)
    assert 1e-4 < h.mean_abs_slope < 1e-2
    h0 = radial_history(P, Z, seed, 100)
    assert h0.mean_abs_slope < 1e-12 and h0.max_drift < 1e-9


def test_kam_ring_at_062():
    ring = kam_island_boundary(P, Z, 0.62, n_periods=200, n_rays=8)
    assert ring.converged
    r = np.linalg.norm(ring.boundary_points, axis=1)
    assert np.max(np.abs(r - 0.62)) < 1e-9
    assert 0.05 < ring.diameter < 0.8


def test_kam_center_inside():
    from tumbler.transport import orbit_distance_stats
    from tumbler import shell_fixed_points
    from tumbler.period_one import Stability
    c = shell_fixed_points(P, 0.62).of_kind(Stability.ELLIPTIC)[0]
    mean, peak = orbit_distance_stats(P, Z, np.array([c]), c, 200)
    assert peak[0] < 1e-8


def test_kam_no_elliptic():
    with pytest.raises(NoEllipticPoint):
        kam_island_boundary(P, Z, 0.4)


def test_kam_tube_empty_and_mirror():
    rings = kam_tube_cloud(P, Z, [0.5, 0.56], n_rays=6, n_periods=100)
    assert rings[0].empty and not rings[1].empty
    mirror = kam_tube_cloud(P, Z, [0.56], tube=1, n_rays=6, n_periods=100)[0]
    c0, c1 = np.asarray(rings[1].center), np.asarray(mirror.center)
    assert c1 == pytest.approx([c0[2], c0[1], c0[0]], abs=1e-12)
    assert mirror.diameter == pytest.approx(rings[1].diameter, rel=0.2)


def test_map_points_stays_in_domain(rng):
    p = ProtocolParams(0.15, 0.165, PI, PI)
    q = random_hemisphere(rng, 200)
    for _ in range(50):
        q = map_points(p, Z, q)
        assert np.all(np.linalg.norm(q, axis=1) <= 1 + 1e-12)
        assert np.all(q[:, 1] <= 0)
