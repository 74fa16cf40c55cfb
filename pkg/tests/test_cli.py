import json

import pytest

from feederflow.cli import run

from test_io import minimal


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def test_validate_ok(capsys):
    assert run(["validate", "simple5km.json"]) == 0
    assert json.loads(capsys.readouterr().out) == {"valid": True, "violations": []}


def test_solve_outputs(out):
    assert run(["solve", "simple5km.json", "--out", str(out), "--grid-h-km", "0.01"]) == 0
    header = (out / "profile.csv").read_text().splitlines()[0]
    assert header == "segment_id,x_km,theta_rad,v_pu,s_pu,w_pu_per_km"
    report = json.loads((out / "solve_report.json").read_text())
    assert report["residual"] <= 1e-10 and report["iterations"] >= 1
    assert set(report["residuals"]) == {"ode", "boundary", "junction", "svr"}
    assert "created" in report["metadata"]


def test_expand_outputs(out):
    assert run(["expand", "branched.json", "--order", "5", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["assembled.csv"] + [f"order_{n}.csv" for n in range(1, 6)]
    row = (out / "order_5.csv").read_text().splitlines()[1].split(",")
    assert row[2] == "" and row[4] == "" and row[3] != ""


def test_impact_outputs(out):
    assert run(["impact", "simple5km.json", "--eps-ev-fraction", "0.3", "--out", str(out)]) == 0
    summary = json.loads((out / "impact_summary.json").read_text())
    assert summary["eps_ev"] == pytest.approx(0.03)
    assert summary["location"]["segment"] == "feeder"
    assert summary["max_abs"] > 0
    assert (out / "impact.csv").read_text().startswith("segment_id,x_km,delta_v_pu\n")


def test_sweep_and_compare(out, capsys):
    assert run(["sweep", "simple5km.json", "--fractions", "0.3,0.6", "--out", str(out)]) == 0
    assert len((out / "sweep.csv").read_text().splitlines()) == 3
    assert run(["compare", "simple5km.json", "--orders", "1,2,3,4", "--out", str(out)]) == 0
    lines = (out / "compare.csv").read_text().splitlines()
    assert lines[0] == "order,dw_root,dv_far_leaf,dtheta_far_leaf,l2_v,linf_v"
    assert len(lines) == 5
    assert "dv_far_leaf" in capsys.readouterr().out


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["compare", "branched.json", "--out", str(d)]) == 0
        assert run(["solve", "branched.json", "--out", str(d)]) == 0
    for name in ("compare.csv", "compare.txt", "profile.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ra, rb = (json.loads((d / "solve_report.json").read_text()) for d in (a, b))
    ra.pop("metadata"), rb.pop("metadata")
    assert ra == rb


def test_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"segments": [\n  {"id": "a",,}\n]}')
    assert run(["solve", str(bad), "--out", str(tmp_path / "o")]) == 1
    err = json.loads(capsys.readouterr().out)["error"]
    assert err["code"] == "config_parse"
    assert err["location"]["line"] == 2 and err["location"]["column"] == 14
    assert not (tmp_path / "o").exists()


def test_invalid_network(tmp_path, capsys):
    doc = minimal()
    doc["nodes"][1]["kind"] = "junction"
    path = tmp_path / "net.json"
    path.write_text(json.dumps(doc))
    assert run(["validate", str(path)]) == 1
    assert json.loads(capsys.readouterr().out)["violations"][0]["kind"] == "JunctionDegree"
    assert run(["solve", str(path), "--out", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().out)["error"]
    assert err["code"] == "validation" and err["violations"][0]["entity"] == "e"


def test_solver_failure_reported(tmp_path, capsys):
    doc = minimal(sigma_km=0.05)
    doc["segments"][0].update(length_km=20.0, G=0.3, B=0.5)
    doc["injections"][0].update(xi_km=10.0, P_pu=-50.0)
    path = tmp_path / "heavy.json"
    path.write_text(json.dumps(doc))
    assert run(["solve", str(path), "--grid-h-km", "0.02", "--out", str(tmp_path / "o")]) == 1
    err = json.loads(capsys.readouterr().out)["error"]
    assert err["code"] in ("voltage_collapse", "non_convergence")


def test_bad_grid_spacing(capsys):
    assert run(["solve", "simple5km.json", "--grid-h-km", "0.1", "--out", "unused"]) == 1
    assert json.loads(capsys.readouterr().out)["error"]["code"] == "invalid_argument"


def test_missing_file(capsys):
    assert run(["validate", "/nonexistent.json"]) == 1
    assert json.loads(capsys.readouterr().out)["error"]["code"] == "io"


def test_argument_errors():
    with pytest.raises(SystemExit) as info:
        run(["solve", "simple5km.json", "--epsilon", "-1"])
    assert info.value.code == 2
