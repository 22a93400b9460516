from __future__ import annotations

import csv
import json
import math
import subprocess
import sys

import pytest

from tumbler.cli import build_parser, fmt, parse_and_dispatch, parse_angle


def run(tmp_path, *args):
    out = tmp_path / "out.csv"
    meta = tmp_path / "meta.json"
    code = parse_and_dispatch([*args, "-o", str(out), "--metadata", str(meta)])
    rows = list(csv.reader(out.open())) if out.exists() else None
    info = json.loads(meta.read_text()) if meta.exists() else None
    return code, rows, info


@pytest.mark.parametrize("text,value", [("pi", math.pi), ("12pi/11", 12 * math.pi / 11), ("2*pi/3", 2 * math.pi / 3),
                                        ("19pi/20", 19 * math.pi / 20), ("1.5", 1.5), ("0.5pi", 0.5 * math.pi),
                                        ("π", math.pi)])
def test_parse_angle(text, value):
    assert parse_angle(text) == value


def test_parse_angle_rejects():
    import argparse
    for bad in ("", "pie", "1/0", "abc"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_angle(bad)


def test_fmt_roundtrip():
    for v in (math.pi, 0.1, 1e-300, -2.5e17):
        assert float(fmt(v)) == v


def test_window(tmp_path):
    code, rows, meta = run(tmp_path, "window", "--eps", "0.15", "--theta", "pi")
    assert code == 0
    assert rows[0] == ["R_lo", "R_hi"]
    lo, hi = map(float, rows[1])
    assert lo == pytest.approx(0.5449303627002884, abs=1e-15)
    assert hi == pytest.approx(0.6716175487583406, abs=1e-15)
    assert meta["config"]["protocol"]["theta_z"] == math.pi
    assert meta["version"] and meta["wall_time_s"] >= 0
    assert meta["config"]["map_order"] == "ZFirst"


def test_optimal_angles(tmp_path):
    code, rows, _ = run(tmp_path, "optimal-angles", "--eps-z", "0.15", "--eps-x", "0.15")
    assert code == 0
    tz, tx = float(rows[1][0]), float(rows[1][1])
    assert tz == pytest.approx(0.471239, abs=1e-6) and tx == pytest.approx(0.471239, abs=1e-6)
    assert float(rows[1][2]) == pytest.approx(0.0225, abs=1e-15)


def test_angle_roundtrip_through_metadata(tmp_path):
    code, _, meta = run(tmp_path, "window", "--eps", "0.15", "--theta-z", "12pi/11", "--theta-x", "pi")
    assert code == 0
    assert meta["config"]["protocol"]["theta_z"] == 12 * math.pi / 11


@pytest.mark.parametrize("args", [["window", "--eps", "0.7"], ["window", "--eps-z", "0"],
                                  ["window", "--theta", "7"], ["window", "--theta-x", "0"],
                                  ["window", "--bogus"], ["nosuchcommand"]])
def test_usage_errors(tmp_path, capsys, args):
    code, _, _ = run(tmp_path, *args)
    assert code == 2
    err = capsys.readouterr().err
    if "--eps" in args[1:2] or "--eps-z" in args[1:2]:
        assert "(0, 0.5]" in err
    if "--theta" in args[1:2] or "--theta-x" in args[1:2]:
        assert "(0, 2*pi]" in err


def test_domain_error_exit_1(tmp_path, capsys):
    code, _, _ = run(tmp_path, "shell-points", "--eps-z", "0.15", "--eps-x", "0.2")
    assert code == 1
    assert "eps_z == eps_x" in capsys.readouterr().err


def test_shell_points(tmp_path):
    code, rows, meta = run(tmp_path, "shell-points", "--rbar", "0.62")
    assert code == 0 and rows[0] == ["stability", "x", "y", "z"]
    assert len(rows) == 5 and meta["counts"]["points"] == 4


def test_trajectory_and_events(tmp_path):
    ev = tmp_path / "ev.csv"
    code, rows, _ = run(tmp_path, "trajectory", "--seed=-0.25,-0.5,-0.1", "--periods", "2",
                        "--theta", "5pi/12", "--events", str(ev))
    assert code == 0
    assert rows[0] == ["n", "stage", "x", "y", "z", "r"]
    assert len(rows) == 1 + 1 + 4
    assert float(rows[1][2]) == -0.25
    events = list(csv.reader(ev.open()))
    assert events[0] == ["n", "stage", "time", "kind", "x", "y", "z"]
    assert {"EnterLayer", "ExitLayer", "RotationEnd"} >= {r[3] for r in events[1:]}


def test_poincare_with_svg(tmp_path):
    svg = tmp_path / "s.svg"
    code, rows, meta = run(tmp_path, "poincare", "--rbar", "0.62", "--periods", "5", "--count", "4",
                           "--perturb", "1.10", "--svg", str(svg))
    assert code == 0
    assert rows[0] == ["seed_id", "n", "x", "y", "z", "r", "region"]
    assert len(rows) == 1 + 4 * 6
    assert meta["counts"] == {"seeds": 4, "periods": 5, "records": 24}
    assert meta["config"]["protocol"]["eps_x"] == pytest.approx(0.165)
    assert svg.read_text().startswith("<svg")


def test_poincare_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    args = ["poincare", "--rmin", "0.3", "--rmax", "0.9", "--periods", "20", "--count", "3", "--perturb", "1.1"]
    run(a, *args)
    run(b, *args, "--jobs", "2")
    assert (a / "out.csv").read_bytes() == (b / "out.csv").read_bytes()


def test_radial_history_and_switch(tmp_path):
    code, rows, meta = run(tmp_path, "radial-history", "--rbar", "0.9", "--count", "2", "--periods", "10")
    assert code == 0 and rows[0] == ["seed_id", "n", "r", "bulk"] and len(rows) == 1 + 22
    assert meta["results"]["floor"] == 0.15
    code, rows, meta = run(tmp_path, "switch-analyze", "--eps-x", "0.165", "--theta", "5pi/12")
    assert code == 0
    assert float(rows[1][5]) == pytest.approx(0.5678908345800274, abs=1e-15)
    assert float(rows[1][6]) == pytest.approx(float(rows[1][7]), abs=1e-8)


def test_period_one_and_grid(tmp_path):
    code, rows, meta = run(tmp_path, "period-one", "--samples", "10")
    assert code == 0 and rows[0] == ["branch", "stability", "component", "x", "y", "z"]
    assert meta["results"]["c1"] == pytest.approx(0.2969491001926679)
    code, rows, _ = run(tmp_path, "bowl-grid", "--n-eps", "3", "--n-theta", "4")
    assert code == 0 and rows[0] == ["eps", "theta", "c", "depth_below_layer"] and len(rows) == 13


def test_kam_commands(tmp_path):
    code, rows, meta = run(tmp_path, "kam-ring", "--rbar", "0.56", "--rays", "4", "--periods", "50")
    assert code == 0 and rows[0] == ["R_bar", "ring_index", "x", "y", "z"] and len(rows) == 5
    code, rows, meta = run(tmp_path, "kam-tube", "--rbar-list", "0.5,0.56", "--rays", "4", "--periods", "50")
    assert code == 0 and meta["results"]["empty"] == [True, False]


def test_manifold_and_jacobian(tmp_path):
    code, rows, meta = run(tmp_path, "manifold", "--fixed-point", "0.3526864356631631,-0.368272394021636,0.3526864356631631",
                           "--kind", "stable", "--branch", "minus", "--periods", "100")
    assert code == 0 and rows[0] == ["image", "x", "y", "z"]
    assert meta["results"]["connection"]["kind"] == "Heteroclinic"
    code, rows, meta = run(tmp_path, "manifold", "--auto", "0.3", "--periods", "3")
    assert code == 0
    jac = tmp_path / "j.json"
    code = parse_and_dispatch(["jacobian", "--point", "0.3526864356631631,-0.368272394021636,0.3526864356631631",
                               "-o", str(jac), "--metadata", str(tmp_path / "jm.json")])
    data = json.loads(jac.read_text())
    assert code == 0 and data["classification"] == "NormallyHyperbolic"
    assert abs(data["det"] - 1) < 1e-6


def test_connections(tmp_path):
    code, rows, meta = run(tmp_path, "connections", "--theta-x", "19pi/20", "--rbar-list", "0.5599", "--periods", "100")
    assert code == 0 and rows[0] == ["R_bar", "x", "y", "z", "kind", "closest_approach", "periods_used"]
    assert rows[1][4] == "Homoclinic"


def test_parser_lists_all_subcommands():
    p = build_parser()
    sub = next(a for a in p._actions if a.dest == "command")
    assert set(sub.choices) == {"trajectory", "poincare", "radial-history", "switch-analyze", "period-one",
                                "shell-points", "window", "optimal-angles", "bowl-grid", "kam-ring", "kam-tube",
                                "manifold", "connections", "jacobian"}


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "tumbler", "window"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "R_lo,R_hi"
