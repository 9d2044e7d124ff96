"""End-to-end coverage of the command-line front end.

Every test drives main(argv) in-process and inspects the exit code, the
summary lines on stdout and the CSV artifact.  Numeric oracles are either
exact closed forms (polytrope zeros, series coefficients) or values the
library itself must reproduce independently of the CLI plumbing.
"""
from __future__ import annotations

import csv
import math
import os

import pytest

from impasse import cli
from impasse.thomas_fermi import SLOPE_FACTOR, majorana_coeffs, slope_from_series

SQRT6 = math.sqrt(6.0)


def run_cli(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def summary_value(out: str, name: str) -> float:
    for line in out.splitlines():
        if line.startswith(f"{name} = "):
            return float(line.split(" = ", 1)[1])
    raise AssertionError(f"{name!r} not in summary:\n{out}")


# -- write_csv ---------------------------------------------------------------


def test_write_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    cli.write_csv(str(path), ["a", "b"], [])
    assert path.read_text() == "a,b\n"


def test_write_csv_round_trip(tmp_path):
    path = tmp_path / "one.csv"
    cli.write_csv(str(path), ["x", "u"], [(0.1, -1.5880710226113753)])
    rows = read_rows(path)
    assert rows[0] == ["x", "u"]
    assert float(rows[1][0]) == 0.1
    assert float(rows[1][1]) == -1.5880710226113753


def test_write_csv_rejects_ragged_rows(tmp_path):
    with pytest.raises(ValueError):
        cli.write_csv(str(tmp_path / "bad.csv"), ["a", "b"], [(1.0,)])


def test_write_csv_no_partial_file_on_failure(tmp_path):
    target = tmp_path / "missing-dir" / "out.csv"
    with pytest.raises(OSError):
        cli.write_csv(str(target), ["a"], [(1.0,)])
    assert not target.exists()
    # no stray temp files either
    assert list(tmp_path.iterdir()) == []


def test_write_csv_uses_lf_line_endings(tmp_path):
    path = tmp_path / "lf.csv"
    cli.write_csv(str(path), ["a"], [(1.0,), (2.0,)])
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.endswith(b"\n")


# -- invocation parsing ------------------------------------------------------


def test_tf_bvp_requires_exactly_one_side(tmp_path, capsys):
    code, _, err = run_cli(["tf-bvp", "--out", str(tmp_path / "x.csv")], capsys)
    assert code == 2
    assert "--ion-a" in err and "--crystal-b" in err
    code, _, _ = run_cli(
        ["tf-bvp", "--ion-a", "1", "--crystal-b", "1", "--out", str(tmp_path / "x.csv")],
        capsys,
    )
    assert code == 2


def test_unknown_command_exits_2(capsys):
    code, _, _ = run_cli(["does-not-exist"], capsys)
    assert code == 2


def test_oxygen_flag_conflicts(tmp_path, capsys):
    out = str(tmp_path / "o.csv")
    assert run_cli(["oxygen", "--set", "1", "--a", "2", "--out", out], capsys)[0] == 2
    assert run_cli(["oxygen", "--a", "2", "--out", out], capsys)[0] == 2
    assert run_cli(["oxygen", "--out", out], capsys)[0] == 2


def test_biocatalyst_flag_conflicts(tmp_path, capsys):
    out = str(tmp_path / "b.csv")
    base = ["biocatalyst", "--out", out]
    assert run_cli(base + ["--K", "1"], capsys)[0] == 2
    assert run_cli(base + ["--phi2", "1"], capsys)[0] == 2
    assert run_cli(base + ["--phi2", "1", "--phi2-grid", "1:2:2", "--K", "1"], capsys)[0] == 2


def test_grid_syntax_errors(tmp_path, capsys):
    out = str(tmp_path / "b.csv")
    base = ["biocatalyst", "--K", "1", "--out", out]
    assert run_cli(base + ["--phi2-grid", "1:2"], capsys)[0] == 2
    assert run_cli(base + ["--phi2-grid", "1:2:0"], capsys)[0] == 2
    assert run_cli(base + ["--phi2-grid", "a:b:3"], capsys)[0] == 2


def test_usage_error_goes_to_stderr_not_csv(tmp_path, capsys):
    out = tmp_path / "never.csv"
    code, stdout, err = run_cli(["tf-bvp", "--out", str(out)], capsys)
    assert code == 2
    assert stdout == ""
    assert "usage error" in err
    assert not out.exists()


# -- polytrope ---------------------------------------------------------------


def test_polytrope_n0_matches_exact_zero(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code, stdout, _ = run_cli(
        ["polytrope", "--N", "3", "--n", "0", "--out", str(out)], capsys
    )
    assert code == 0
    xi1 = summary_value(stdout, "xi1")
    r = summary_value(stdout, "r")
    assert abs(xi1 - SQRT6) / SQRT6 <= 1e-5
    assert abs(r - 1.0) <= 1e-5
    rows = read_rows(out)
    assert rows[0] == ["x", "u", "uprime"]
    assert [float(v) for v in rows[1]] == [0.0, 1.0, 0.0]
    assert len(rows) == 1 + 201
    xs = [float(r_[0]) for r_ in rows[1:]]
    assert xs == sorted(xs)


def test_polytrope_n5_reports_no_zero(tmp_path, capsys):
    out = tmp_path / "p5.csv"
    code, stdout, _ = run_cli(
        ["polytrope", "--N", "3", "--n", "5", "--x-max", "20", "--out", str(out)],
        capsys,
    )
    assert code == 0
    assert "no zero within" in stdout
    rows = read_rows(out)
    assert float(rows[-1][1]) > 0.0


def test_polytrope_rejects_bad_index(tmp_path, capsys):
    code, _, _ = run_cli(
        ["polytrope", "--N", "3", "--n", "-1", "--out", str(tmp_path / "x.csv")],
        capsys,
    )
    assert code == 2


# -- le-bvp ------------------------------------------------------------------


def test_le_bvp_power_one_center_value(tmp_path, capsys):
    # exact solution sin(x)/(x sin 1) has center value 1/sin(1)
    out = tmp_path / "l.csv"
    code, stdout, _ = run_cli(
        ["le-bvp", "--N", "3", "--model", "power:1", "--out", str(out)], capsys
    )
    assert code == 0
    u0 = summary_value(stdout, "u0")
    assert abs(u0 - 1.0 / math.sin(1.0)) <= 1e-5
    assert abs(summary_value(stdout, "boundary_residual")) <= 1e-6


def test_le_bvp_custom_expression_matches_power(tmp_path, capsys):
    code_p, out_p, _ = run_cli(
        ["le-bvp", "--N", "3", "--model", "power:1", "--out", str(tmp_path / "a.csv")],
        capsys,
    )
    code_c, out_c, _ = run_cli(
        ["le-bvp", "--N", "3", "--model", "custom:-u", "--out", str(tmp_path / "b.csv")],
        capsys,
    )
    assert code_p == 0 and code_c == 0
    assert abs(summary_value(out_p, "u0") - summary_value(out_c, "u0")) <= 1e-9


def test_le_bvp_custom_expression_rejections(tmp_path, capsys):
    out = str(tmp_path / "x.csv")
    base = ["le-bvp", "--N", "3", "--out", out]
    assert run_cli(base + ["--model", "custom:import os"], capsys)[0] == 2
    assert run_cli(base + ["--model", "custom:__import__('os')"], capsys)[0] == 2
    assert run_cli(base + ["--model", "banana"], capsys)[0] == 2
    assert run_cli(base + ["--model", "power:x"], capsys)[0] == 2


def test_le_bvp_degenerate_bc_is_usage_error(tmp_path, capsys):
    code, _, _ = run_cli(
        ["le-bvp", "--N", "3", "--model", "power:1", "--alpha", "0", "--beta", "0",
         "--out", str(tmp_path / "x.csv")],
        capsys,
    )
    assert code == 2


def test_le_bvp_solver_failure_exits_1(tmp_path, capsys):
    # an unreachable boundary target makes the shot diverge
    code, _, err = run_cli(
        ["le-bvp", "--N", "3", "--model", "power:3", "--gamma", "1e9",
         "--out", str(tmp_path / "x.csv")],
        capsys,
    )
    assert code == 1
    assert "solver failure in boundary-value shooting" in err


# -- biocatalyst -------------------------------------------------------------


def test_biocatalyst_single_cell(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, stdout, _ = run_cli(
        ["biocatalyst", "--phi2", "1", "--K", "1", "--out", str(out)], capsys
    )
    assert code == 0
    eta = summary_value(stdout, "eta")
    assert 0.0 < eta < 1.01
    rows = read_rows(out)
    assert rows[0] == ["phi2", "K", "eta"]
    assert len(rows) == 2
    assert float(rows[1][2]) == eta


def test_biocatalyst_grid_row_major(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, stdout, _ = run_cli(
        ["biocatalyst", "--phi2-grid", "0.5:2:3", "--K-grid", "1:2:2",
         "--out", str(out)],
        capsys,
    )
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 1 + 6
    phi2s = [float(r_[0]) for r_ in rows[1:]]
    ks = [float(r_[1]) for r_ in rows[1:]]
    assert phi2s == [0.5, 0.5, 1.25, 1.25, 2.0, 2.0]
    assert ks == [1.0, 2.0] * 3
    # effectiveness drops with phi2 at fixed K
    assert float(rows[1][2]) > float(rows[5][2])
    assert "cells = 6" in stdout


# -- oxygen ------------------------------------------------------------------


def test_oxygen_set_matches_explicit_parameters(tmp_path, capsys):
    code_s, out_s, _ = run_cli(
        ["oxygen", "--set", "1", "--out", str(tmp_path / "a.csv")], capsys
    )
    code_e, out_e, _ = run_cli(
        ["oxygen", "--a", "0.38065", "--K", "0.03119", "--alpha", "5",
         "--out", str(tmp_path / "b.csv")],
        capsys,
    )
    assert code_s == 0 and code_e == 0
    assert summary_value(out_s, "u0") == summary_value(out_e, "u0")
    assert abs(summary_value(out_s, "boundary_residual")) <= 1e-7


# -- catalyst-system ---------------------------------------------------------


def test_catalyst_system_default_parameters(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, stdout, _ = run_cli(["catalyst-system", "--out", str(out)], capsys)
    assert code == 0
    assert abs(summary_value(stdout, "boundary_residual")) <= 1e-6
    rows = read_rows(out)
    assert rows[0] == ["x", "u", "v", "w", "uprime", "vprime", "wprime"]
    assert [float(v) for v in rows[1][4:]] == [0.0, 0.0, 0.0]
    # all three species pinned to 1 at the surface
    assert all(abs(float(v) - 1.0) <= 1e-5 for v in rows[-1][1:4])


# -- thomas-fermi commands ---------------------------------------------------


def test_tf_slope_summary_and_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, stdout, _ = run_cli(["tf-slope", "--tol", "1e-8", "--out", str(out)], capsys)
    assert code == 0
    omega = summary_value(stdout, "omega")
    assert abs(omega + 1.5880710226113753) / 1.588 <= 1e-8
    rows = read_rows(out)
    assert rows[0] == ["tol", "omega"]
    assert len(rows) == 2
    assert float(rows[1][1]) == omega


def test_tf_slope_rejects_sub_double_tolerance(tmp_path, capsys):
    code, _, _ = run_cli(
        ["tf-slope", "--tol", "1e-15", "--out", str(tmp_path / "x.csv")], capsys
    )
    assert code == 2


def test_tf_series_table(tmp_path, capsys):
    out = tmp_path / "m.csv"
    code, stdout, _ = run_cli(["tf-series", "--terms", "10", "--out", str(out)], capsys)
    assert code == 0
    rows = read_rows(out)
    assert rows[0] == ["i", "a_i", "slope"]
    assert len(rows) == 1 + 11
    assert float(rows[1][1]) == 1.0
    assert float(rows[2][1]) == 9.0 - math.sqrt(73.0)
    coeffs = majorana_coeffs(10).coeffs
    for k, row in enumerate(rows[1:]):
        assert float(row[1]) == coeffs[k]
    assert float(rows[-1][2]) == slope_from_series(10)
    assert summary_value(stdout, "rel_gap") < 0.1


def test_tf_solution_points(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, stdout, _ = run_cli(
        ["tf-solution", "--points", "10,0,1", "--out", str(out)], capsys
    )
    assert code == 0
    rows = read_rows(out)
    assert [float(r_[0]) for r_ in rows[1:]] == [0.0, 1.0, 10.0]
    assert float(rows[1][1]) == 1.0
    assert float(rows[1][2]) == summary_value(stdout, "omega")
    # decaying branch: u positive and decreasing, slopes negative
    us = [float(r_[1]) for r_ in rows[1:]]
    assert us[0] > us[1] > us[2] > 0.0
    assert all(float(r_[2]) < 0.0 for r_ in rows[1:])


def test_tf_solution_rejects_negative_point(tmp_path, capsys):
    code, _, _ = run_cli(
        ["tf-solution", "--points", "-1,2", "--out", str(tmp_path / "x.csv")], capsys
    )
    assert code == 2


def test_tf_phase_count_sweep(tmp_path, capsys):
    out = tmp_path / "ph.csv"
    code, stdout, _ = run_cli(
        ["tf-phase", "--count", "2", "--x-max", "20", "--out", str(out)], capsys
    )
    assert code == 0
    assert "v_critical = " in stdout
    assert stdout.count("termination = ") == 2
    rows = read_rows(out)
    assert rows[0] == ["v0", "t", "v", "x", "u", "uprime"]
    assert len({r_[0] for r_ in rows[1:]}) == 2
    # curves start on the t = 0 axis with u = 1
    first = rows[1]
    assert float(first[1]) == 0.0
    assert float(first[4]) == 1.0


def test_tf_phase_flag_conflict(tmp_path, capsys):
    code, _, _ = run_cli(
        ["tf-phase", "--count", "2", "--v0-list", "2.5", "--out", str(tmp_path / "x.csv")],
        capsys,
    )
    assert code == 2


def test_tf_bvp_ion(tmp_path, capsys):
    out = tmp_path / "i.csv"
    code, stdout, _ = run_cli(["tf-bvp", "--ion-a", "1", "--out", str(out)], capsys)
    assert code == 0
    assert abs(summary_value(stdout, "residual")) <= 1e-6
    assert summary_value(stdout, "uprime0") < 0.0
    rows = read_rows(out)
    assert rows[0] == ["x", "u", "uprime"]
    assert [float(v) for v in rows[1][:2]] == [0.0, 1.0]


def test_tf_bvp_crystal(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, stdout, _ = run_cli(["tf-bvp", "--crystal-b", "1", "--out", str(out)], capsys)
    assert code == 0
    assert abs(summary_value(stdout, "residual")) <= 1e-6
    rows = read_rows(out)
    assert float(rows[1][1]) == 1.0


def test_tf_bvp_range_validation(tmp_path, capsys):
    out = str(tmp_path / "x.csv")
    assert run_cli(["tf-bvp", "--ion-a", "28", "--out", out], capsys)[0] == 2
    assert run_cli(["tf-bvp", "--crystal-b", "31", "--out", out], capsys)[0] == 2
    assert run_cli(["tf-bvp", "--ion-a", "0", "--out", out], capsys)[0] == 2


# -- classify ----------------------------------------------------------------


def test_classify_catalog(tmp_path, capsys):
    out = tmp_path / "k.csv"
    code, stdout, _ = run_cli(["classify", "--out", str(out)], capsys)
    assert code == 0
    rows = read_rows(out)
    header = rows[0]
    assert header[:4] == ["model", "kind", "delta", "gamma"]
    assert len(rows) > 4
    for row in rows[1:]:
        assert row[1] == "proper_impasse"
        assert float(row[2]) == 1.0
        assert float(row[3]) < 0.0
        assert row[-1] == "1"
        assert float(row[4]) == 1.0  # x-fiber eigenvalue of g(x) = x


def test_classify_user_model(tmp_path, capsys):
    out = tmp_path / "k.csv"
    code, _, _ = run_cli(
        ["classify", "--N", "3", "--model", "power:1", "--out", str(out)], capsys
    )
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 2
    assert rows[1][0] == "user-3"
    assert rows[1][1] == "proper_impasse"


def test_classify_model_requires_N(tmp_path, capsys):
    code, _, _ = run_cli(
        ["classify", "--model", "power:1", "--out", str(tmp_path / "x.csv")], capsys
    )
    assert code == 2
    code, _, _ = run_cli(["classify", "--N", "3", "--out", str(tmp_path / "x.csv")], capsys)
    assert code == 2


# -- artifact contract -------------------------------------------------------


def test_repeated_runs_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["tf-series", "--terms", "30"]
    assert run_cli(argv + ["--out", str(a)], capsys)[0] == 0
    assert run_cli(argv + ["--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_default_output_name_is_command_csv(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, stdout, _ = run_cli(["tf-series", "--terms", "5"], capsys)
    assert code == 0
    assert (tmp_path / "tf-series.csv").exists()
    assert "csv = tf-series.csv" in stdout


def test_unwritable_output_exits_3(tmp_path, capsys):
    target = os.path.join(str(tmp_path), "no-such-dir", "x.csv")
    code, _, err = run_cli(["tf-series", "--terms", "5", "--out", target], capsys)
    assert code == 3
    assert "i/o error" in err


def test_tolerance_flags_are_accepted(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code, stdout, _ = run_cli(
        ["polytrope", "--N", "3", "--n", "0", "--tol-rel", "1e-10",
         "--tol-abs", "1e-12", "--out", str(out)],
        capsys,
    )
    assert code == 0
    assert abs(summary_value(stdout, "xi1") - SQRT6) / SQRT6 <= 1e-7


def test_csv_floats_round_trip_shortest_repr(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert run_cli(["tf-slope", "--tol", "1e-8", "--out", str(out)], capsys)[0] == 0
    text = out.read_text()
    value = text.splitlines()[1].split(",")[1]
    assert repr(float(value)) == value
