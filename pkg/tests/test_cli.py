import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from growmix import ConservationClass, GrowthMixingSystem, conservation_class
from growmix.cli import EXIT_OK, EXIT_USAGE, SWEEP_COLUMNS, main, parse_grid

from oracles import closed_form_spab


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def two_site_file(tmp_path):
    path = tmp_path / "two_site.json"
    path.write_text(json.dumps({"D": [1.0, -1.0], "A": [[-1.0, 1.0], [1.0, -1.0]]}))
    return path


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_grid():
    assert parse_grid("0:0.5:2") == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert len(parse_grid("0:0.1:10")) == 101
    assert parse_grid("geom:1:10:3") == [1.0, 10.0, 100.0]


@pytest.mark.parametrize("spec", ["0:1", "a:b:c", "1:0:2", "2:1:1", "geom:0:10:3", "geom:1:10"])
def test_bad_grid_exits_2(spec, two_site_file, capsys):
    code, _, err = run(["sweep", "--system", two_site_file, "--grid", spec], capsys)
    assert code == EXIT_USAGE and "grid" in err


def test_model_diffusion(capsys):
    code, out, _ = run(["model", "diffusion1d", "--n", 3, "--h", 1, "--boundary", "dirichlet"], capsys)
    assert code == EXIT_OK
    sys_ = GrowthMixingSystem.from_json(out)
    np.testing.assert_array_equal(sys_.A.entries, [[-2, 1, 0], [1, -2, 1], [0, 1, -2]])


def test_model_markov_from_file(tmp_path, capsys):
    P = tmp_path / "P.json"
    P.write_text(json.dumps([[0.9, 0.5], [0.1, 0.5]]))
    code, out, _ = run(["model", "markov", "--P", P, "--d", "1,-1"], capsys)
    assert code == EXIT_OK
    assert conservation_class(GrowthMixingSystem.from_json(out).A) is ConservationClass.CONSERVATIVE


def test_model_row_stochastic_needs_transpose(tmp_path, capsys):
    P = tmp_path / "P.json"
    P.write_text(json.dumps([[0.9, 0.1], [0.5, 0.5]]))
    code, _, err = run(["model", "markov", "--P", P], capsys)
    assert code == EXIT_USAGE and "columns" in err
    code, _, _ = run(["model", "markov", "--P", P, "--transpose"], capsys)
    assert code == EXIT_OK


def test_model_scenario(tmp_path, capsys):
    scen = tmp_path / "scenario.json"
    scen.write_text(json.dumps({"model": "limit", "alpha": [0.25, 0.75], "d": [1, -1]}))
    code, out, _ = run(["model", "--scenario", scen], capsys)
    assert code == EXIT_OK
    assert GrowthMixingSystem.from_json(out).n == 2


def test_bad_kind_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["model", "laplace2d"])
    assert exc.value.code == 2
    scen_code, _, _ = run(["model"], capsys)
    assert scen_code == EXIT_USAGE


def test_bad_scenario_kind(tmp_path, capsys):
    scen = tmp_path / "s.json"
    scen.write_text(json.dumps({"model": "quantum"}))
    code, _, err = run(["model", "--scenario", scen], capsys)
    assert code == EXIT_USAGE and "quantum" in err


def test_json_errors_report_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"D": [1, 2],\n "A": [[0, 1] [1, 0]]}')
    code, _, err = run(["sweep", "--system", bad, "--grid", "0:1:1"], capsys)
    assert code == EXIT_USAGE and "line 2" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(["structure", "--system", tmp_path / "nope.json"], capsys)
    assert code == EXIT_USAGE and "cannot read" in err


def test_invalid_matrix_exits_2(tmp_path, capsys):
    bad = tmp_path / "neg.json"
    bad.write_text(json.dumps({"D": [1, 2], "A": [[0, -1], [1, 0]]}))
    code, _, err = run(["sweep", "--system", bad, "--grid", "0:1:1"], capsys)
    assert code == EXIT_USAGE and "off-diagonal" in err


@pytest.mark.parametrize("kind, extra", [
    ("diffusion1d", ["--n", 4, "--h", 0.5, "--boundary", "neumann", "--g", "0.1,0.2,0.3,0.4"]),
    ("random", ["--n", 5, "--style", "Reducible", "--seed", 9]),
    ("limit", ["--alpha", "0.2,0.3,0.5", "--d", "1,2,3"]),
])
def test_model_round_trip(kind, extra, capsys):
    code, out, _ = run(["model", kind] + extra, capsys)
    assert code == EXIT_OK
    sys_ = GrowthMixingSystem.from_json(out)
    assert GrowthMixingSystem.from_json(sys_.to_json()) == sys_
    assert sys_.to_json() + "\n" == out


def test_sweep_two_site(two_site_file, capsys):
    code, out, _ = run(["sweep", "--system", two_site_file, "--grid", "0:0.1:10"], capsys)
    assert code == EXIT_OK
    assert out.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    rows = read_csv(out)
    assert len(rows) == 101
    spabs = [float(r["spab"]) for r in rows]
    assert all(b < a for a, b in zip(spabs, spabs[1:]))
    for r in rows:
        assert abs(float(r["spab"]) - closed_form_spab(float(r["m"]))) <= 1e-10
    # F(0) = D is reducible: no two-sided derivative, one-sided slope reported.
    assert rows[0]["derivative"] == "" and float(rows[0]["d_right"]) == pytest.approx(-1.0, abs=1e-12)
    assert rows[5]["derivative"] != ""


def test_sweep_uniform_is_affine(tmp_path, capsys):
    path = tmp_path / "u.json"
    A = [[-2.0, 0.5], [1.0, -1.0]]
    path.write_text(json.dumps({"D": [0.3, 0.3], "A": A}))
    code, out, _ = run(["sweep", "--system", path, "--grid", "0:0.5:3"], capsys)
    rows = read_csv(out)
    spab_A = float(rows[0]["bound_spabA"])
    for r in rows:
        assert float(r["spab"]) == pytest.approx(0.3 + float(r["m"]) * spab_A, abs=1e-12)


def test_sweep_limit_geometric(tmp_path, capsys):
    sys_file = tmp_path / "lim.json"
    code, out, _ = run(["model", "limit", "--alpha", "0.25,0.75", "--d", "1,-1", "--out", sys_file], capsys)
    assert code == EXIT_OK and out == ""
    code, out, _ = run(["sweep", "--system", sys_file, "--grid", "geom:1:10:5"], capsys)
    assert abs(float(read_csv(out)[-1]["spab"]) + 0.5) <= 1e-3


def test_sweep_is_byte_identical(two_site_file, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run(["sweep", "--system", two_site_file, "--grid", "0:0.25:5", "--out", out], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_small_run(capsys):
    code, out, _ = run(["verify", "--count", 12, "--seed", 5], capsys)
    assert code == EXIT_OK
    lines = [json.loads(s) for s in out.splitlines()]
    summary = lines[-1]["summary"]
    assert summary["count"] == 12 and summary["all_hold"]
    records = lines[:-1]
    assert {"check", "holds", "lhs", "rhs", "gap", "equality_expected", "seed"} <= set(records[0])
    assert {r["check"] for r in records} >= {"basic_inequality", "flip", "main_derivative_bound", "limit"}
    assert summary["min_gap"]["flip"] == min(r["gap"] for r in records if r["check"] == "flip")


def test_verify_is_deterministic_and_order_stable(capsys):
    _, serial, _ = run(["verify", "--count", 8, "--seed", 11], capsys)
    _, again, _ = run(["verify", "--count", 8, "--seed", 11], capsys)
    _, parallel, _ = run(["verify", "--count", 8, "--seed", 11, "--jobs", 2], capsys)
    assert serial == again == parallel
    _, other, _ = run(["verify", "--count", 8, "--seed", 12], capsys)
    assert other != serial


def test_verify_count_zero(capsys):
    code, out, _ = run(["verify", "--count", 0], capsys)
    assert code == EXIT_OK
    assert json.loads(out) == {"summary": {"count": 0, "all_hold": True, "min_gap": {}}}


@pytest.mark.parametrize("argv", [["--n-range", "1:4"], ["--n-range", "x"], ["--count", "-1"], ["--style", "odd"]])
def test_verify_usage_errors(argv, capsys):
    code, _, _ = run(["verify"] + argv, capsys)
    assert code == EXIT_USAGE


def test_structure(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"D": [0, 0, 0], "A": [[1, 0, 0], [0, 2, 0], [1, 1, 3]]}))
    code, out, _ = run(["structure", "--system", path], capsys)
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["blocks"] == [[0], [1], [2]] and doc["isolated"] == [0, 1]
    assert doc["conservation"] == "Neither"


def test_trajectory(two_site_file, capsys):
    code, out, _ = run(["trajectory", "--system", two_site_file, "--m", 1, "--x0", "1,0", "--times", "0:0.5:1"],
                       capsys)
    assert code == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == ["t", "x1", "x2"] and len(rows) == 3
    assert float(rows[0]["x1"]) == 1.0
    assert all(float(r["x2"]) > 0 for r in rows[1:])
    assert math.isfinite(float(rows[-1]["x1"]))


def test_console_entry_point(two_site_file):
    proc = subprocess.run([sys.executable, "-m", "growmix.cli", "structure", "--system", str(two_site_file)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["blocks"] == [[0, 1]]
