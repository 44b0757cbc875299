import json

import numpy as np
import pytest

from gkcascade.cli import OUTPUT_DIR_ENV, main
from gkcascade.degree_model import model_to_dict, validate_consistency
from gkcascade.experiment import (
    ExperimentSpec,
    build_model,
    columns,
    frange,
    parse_range,
    run_experiment,
    table_text,
)
from gkcascade.networks import four_class, simplex_grid, two_class
from gkcascade.skeleton import read_graph

STAMP = "2000-01-01T00:00:00+00:00"


# --- ranges -------------------------------------------------------------------

def test_frange_is_inclusive_and_drift_free():
    grid = frange(0.0, 0.1, 0.001)
    assert len(grid) == 101 and grid[-1] == 0.1 and grid[37] == 0.037


def test_parse_range_forms():
    assert parse_range("0.02:0.08:0.02") == [0.02, 0.04, 0.06, 0.08]
    assert parse_range("0.1, 0.3") == [0.1, 0.3]
    with pytest.raises(ValueError):
        frange(0, 1, 0)


# --- builtin families ----------------------------------------------------------

def test_sec61_parameters():
    m = two_class(0.5, 0.16)
    assert m.P.tolist() == [[0.0, 0.5], [0.5, 0.0]]
    assert np.allclose(m.Q, [[0.04, 0.16], [0.16, 0.64]], atol=1e-15)
    assert two_class(0.0, 0.19).P.tolist() == [[0.5, 0.0], [0.0, 0.5]]
    with pytest.raises(ValueError):
        two_class(0.6, 0.1)
    with pytest.raises(ValueError):
        two_class(0.1, 0.25)


def test_sec62_parameters():
    from gkcascade.degree_model import edge_assortativity
    assert edge_assortativity(four_class((1, 0, 0, 0))) == pytest.approx(1.0, abs=1e-12)
    assert abs(edge_assortativity(four_class((0.25,) * 4))) < 1e-12
    assert edge_assortativity(four_class((0, 0, 1, 0))) < 0
    with pytest.raises(ValueError):
        four_class((0.5, 0.5, 0.5, -0.5))
    with pytest.raises(ValueError):
        four_class((0.5, 0.5, 0.5))


def test_simplex_grid():
    pts = simplex_grid(21)
    assert len(pts) == 21 * 22 * 23 // 6
    assert all(abs(sum(p) - 1) < 1e-12 and min(p) >= 0 for p in pts)
    face = simplex_grid(5, face=4)
    assert len(face) == 15 and all(p[3] == 0 for p in face)
    with pytest.raises(ValueError):
        simplex_grid(1)


def test_every_grid_model_is_consistent():
    spec = ExperimentSpec(a_values=frange(0, 0.5, 0.05), b_values=frange(0, 0.2, 0.02))
    for p in spec.points():
        assert validate_consistency(build_model(spec, p)) == []
    spec = ExperimentSpec(builtin="sec62", q_points=simplex_grid(6))
    for p in spec.points():
        assert validate_consistency(build_model(spec, p)) == []


# --- experiments ----------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(outputs=["size", "nonsense"])
    with pytest.raises(ValueError):
        ExperimentSpec(builtin="sec99")
    with pytest.raises(ValueError):
        ExperimentSpec(builtin=None)


def test_gamma_sweep_shape():
    spec = ExperimentSpec(gammas=frange(0.005, 0.1, 0.005), outputs=["size", "frequency", "gamma_c", "radius"])
    rows = run_experiment(spec)
    assert all(r["error"] == "" for r in rows)
    sizes = [r["size"] for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(sizes, sizes[1:]))
    assert {r["gamma_c"] for r in rows} == {1 / 15}
    # sharp transition across the critical buffer
    below = [r for r in rows if r["gamma"] < 1 / 15]
    above = [r for r in rows if r["gamma"] > 1 / 15]
    assert min(r["size"] for r in below) > 0.99 and max(r["size"] for r in above) < 1e-3
    assert all(r["frequency"] > 0 for r in below) and all(r["frequency"] == 0 for r in above)


def test_ab_grid_gamma_c_takes_weight_values():
    spec = ExperimentSpec(a_values=[0.0, 0.25, 0.5], b_values=frange(0, 0.2, 0.05), outputs=["gamma_c", "r"])
    rows = run_experiment(spec)
    assert {r["gamma_c"] for r in rows} <= {1 / 15, 1 / 60, 0.0}
    assert all(-1 <= r["r"] <= 1 for r in rows)


def test_simplex_face_scan():
    spec = ExperimentSpec(builtin="sec62", q_points=simplex_grid(4, face=4), gammas=[0.0375],
                          outputs=["gamma_c", "size", "r", "frequency"])
    rows = run_experiment(spec)
    assert len(rows) == 10
    assert {r["gamma_c"] for r in rows} <= {0.1, 0.05, 0.025, 0.0125, 0.0}
    assert all(r["error"] == "" for r in rows)


def test_point_errors_are_recorded_and_run_continues():
    spec = ExperimentSpec(a_values=[0.5, 0.7], b_values=[0.16], outputs=["radius"])
    rows = run_experiment(spec)
    assert rows[0]["error"] == "" and rows[0]["radius"] == pytest.approx(2.4)
    assert rows[1]["error"].startswith("ParameterOutOfRange")


def test_output_reproducible_byte_for_byte():
    spec = ExperimentSpec(gammas=[0.03, 0.05, 0.09], outputs=["size", "mc_frequency", "mc_global_size"],
                          n=500, realizations=4, seed=17)
    a = table_text(spec, run_experiment(spec), timestamp=STAMP)
    b = table_text(spec, run_experiment(spec), timestamp=STAMP)
    assert a == b
    strip = lambda text: [ln for ln in text.splitlines() if not ln.startswith("# generated=")]
    c = table_text(spec, run_experiment(spec))
    assert strip(a) == strip(c)


def test_worker_pool_keeps_grid_order():
    spec = ExperimentSpec(gammas=frange(0.01, 0.09, 0.02), outputs=["radius", "size"])
    serial = run_experiment(spec)
    spec.workers = 2
    assert run_experiment(spec) == serial


def test_table_header_and_formats():
    spec = ExperimentSpec(gammas=[0.05], outputs=["radius", "r_q"], seed=3)
    rows = run_experiment(spec)
    text = table_text(spec, rows, timestamp=STAMP)
    lines = text.splitlines()
    assert lines[0].startswith("# tool=gkcascade ")
    assert lines[1] == f"# spec_sha256={spec.digest()}"
    assert lines[2] == "# seed=3"
    assert lines[4] == ",".join(columns(spec)) == "a,b,gamma,radius,r_q,error"
    assert "np.float64" not in text
    doc = json.loads(table_text(spec, rows, "json", timestamp=STAMP))
    assert doc["rows"][0]["radius"] == pytest.approx(2.4)
    long = table_text(spec, rows, layout="long", timestamp=STAMP).splitlines()
    assert long[4] == "a,b,gamma,quantity,value,error"
    assert len(long) == 5 + 2


# --- CLI ------------------------------------------------------------------------

def test_cli_validate_ok(capsys):
    assert main(["validate", "--builtin", "sec62", "--q", "1,0,0,0"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["violations"] == [] and report["r_q"] == pytest.approx(1.0)


def test_cli_validate_inconsistent_file(tmp_path, capsys):
    doc = model_to_dict(two_class(0.5, 0.16))
    doc["Q"] = [{"k": 3, "j": 3, "q": "0.3"}, {"k": 12, "j": 12, "q": "0.7"}]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--model", str(path)]) != 0
    assert "violation" in capsys.readouterr().err


def test_cli_analyze_out_of_range(capsys):
    assert main(["analyze", "--a", "0.7"]) != 0
    assert "ParameterOutOfRange" in capsys.readouterr().err


def test_cli_bad_outputs_flag():
    with pytest.raises(SystemExit) as info:
        main(["analyze", "--outputs", "size,bogus"])
    assert info.value.code != 0


def test_cli_analyze_with_trajectory(tmp_path):
    out, traj = tmp_path / "a.csv", tmp_path / "t.csv"
    assert main(["analyze", "--gamma", "0.05", "--out", str(out), "--trajectory", str(traj)]) == 0
    assert "a,b,gamma,radius" in out.read_text()
    assert traj.read_text().startswith("step,index,quantity,value")


def test_cli_sweep_to_env_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert main(["sweep", "--gamma-range", "0.02:0.08:0.02", "--outputs", "size,gamma_c"]) == 0
    rows = [ln for ln in (tmp_path / "sweep.csv").read_text().splitlines() if not ln.startswith("#")]
    assert rows[0] == "a,b,gamma,gamma_c,size,error" and len(rows) == 5


def test_cli_sweep_simplex_json(tmp_path):
    out = tmp_path / "s.json"
    assert main(["sweep", "--builtin", "sec62", "--simplex-face", "1", "--resolution", "3",
                 "--gamma", "0.0375", "--outputs", "gamma_c,r", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["columns"][:5] == ["q1", "q2", "q3", "q4", "gamma"]
    assert len(doc["rows"]) == 6 and all(r["q1"] == 0 for r in doc["rows"])


def test_cli_sweep_model_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(model_to_dict(two_class(0.5, 0.16))))
    out = tmp_path / "s.csv"
    assert main(["sweep", "--model", str(path), "--gamma-range", "0.05,0.09", "--outputs", "radius",
                 "--out", str(out)]) == 0
    body = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    assert body[0] == "gamma,radius,error" and body[1].startswith("0.05,2.4")


def test_cli_generate_and_simulate(tmp_path):
    g = tmp_path / "g.txt"
    assert main(["generate", "--n", "400", "--seed", "2", "--out", str(g)]) == 0
    with open(g) as fh:
        assert read_graph(fh).n_nodes == 400
    e = tmp_path / "e.csv"
    assert main(["simulate", "--n", "400", "--realizations", "3", "--gamma", "0.05", "--seed", "9",
                 "--out", str(e)]) == 0
    text = e.read_text()
    assert text.startswith("# master_seed=9") and text.count("\nrun,") == 3
