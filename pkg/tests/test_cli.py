import json

import numpy as np
import pytest

from ihcp import bench
from ihcp.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_presets_list_and_dump(capsys, tmp_path):
    code, out, _ = run(capsys, "presets")
    assert code == 0 and out.split() == list(bench.PRESETS)
    code, out, _ = run(capsys, "presets", "silicon-stability")
    assert bench.load_config(out) == bench.preset("silicon-stability")
    run(capsys, "presets", "silicon-stability", "--out", str(tmp_path))
    assert bench.load_config(tmp_path / "silicon-stability.yaml") == \
        bench.preset("silicon-stability")


def test_direct_csv_and_files(capsys, tmp_path):
    code, out, _ = run(capsys, "direct", "--preset", "steel-triangular")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("time,T0,T1")
    assert len(lines) == 1 + 271
    cfg_path = tmp_path / "c.yaml"
    cfg_path.write_text(bench.dump_config(bench.preset("steel-triangular")))
    code, _, _ = run(capsys, "direct", "--config", str(cfg_path),
                     "--out", str(tmp_path / "o"))
    assert code == 0
    assert (tmp_path / "o" / "temperature.csv").read_text() == out
    flux = np.loadtxt(tmp_path / "o" / "flux.csv", delimiter=",", skiprows=1)
    assert flux[:, 1].max() == pytest.approx(5.0)


def test_direct_json(capsys):
    code, out, _ = run(capsys, "direct", "--preset", "silicon-stability",
                       "--format", "json")
    d = json.loads(out)
    assert code == 0 and len(d["time"]) == len(d["temperature"]) == 271


def test_inverse_synthetic_and_from_file(capsys, tmp_path):
    code, out, _ = run(capsys, "inverse", "--preset", "steel-triangular",
                       "--alpha", "1e-3")
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert header == ["time", "q1", "q1_true", "T_sensor1"]
    cfg = bench.preset("steel-triangular")
    series = bench.synthesize_measurements(cfg)
    meas = tmp_path / "y.csv"
    meas.write_text(bench.array_to_csv(series.times[1:],
                                       {"y1": series.values[:, 0]}))
    code, out2, _ = run(capsys, "inverse", "--preset", "steel-triangular",
                        "--alpha", "1e-3", "--measurements", str(meas),
                        "--format", "json")
    d = json.loads(out2)
    ref = np.loadtxt(out.splitlines(), delimiter=",", skiprows=1)
    np.testing.assert_allclose(d["q1"], ref[:, 1], rtol=1e-10)
    np.testing.assert_allclose(d["time"], ref[:, 0], atol=1e-12)


@pytest.mark.parametrize("method", ["fast", "morozov", "reference"])
def test_select_alpha(capsys, method):
    code, out, _ = run(capsys, "select-alpha", "--preset",
                       "steel-triangular", "--method", method)
    d = json.loads(out)
    assert code == 0 and d["method"] == method and d["alpha"] >= 0


def test_select_beta(capsys):
    code, out, _ = run(capsys, "select-beta", "--preset", "silicon-stability",
                       "--alpha", "0")
    d = json.loads(out)
    assert code == 0 and d["exit_reason"] == "unstable"
    assert d["beta"] == pytest.approx(0.46)
    code, out, _ = run(capsys, "select-beta", "--preset", "silicon-stability",
                       "--alpha", "0", "--format", "csv")
    assert out.splitlines()[0] == "beta,gain_norm,rho_EA,rho_EU"


def test_hybrid_and_bench(capsys, tmp_path):
    code, out, _ = run(capsys, "hybrid", "--preset", "steel-triangular")
    d = json.loads(out)
    assert code == 0 and {"alpha", "beta", "trace"} <= set(d)
    code, out, _ = run(capsys, "bench", "--preset", "steel-triangular",
                       "--methods", "morozov,hybrid", "--seeds", "2",
                       "--out", str(tmp_path))
    assert code == 0
    rows = json.loads((tmp_path / "bench.json").read_text())
    assert [(r["method"], r["seed"]) for r in rows] == [
        ("morozov", 0), ("hybrid", 0), ("morozov", 1), ("hybrid", 1)]
    summary = (tmp_path / "bench_summary.csv").read_text().splitlines()
    assert len(summary) == 3
    hyb = [r for r in rows if r["method"] == "hybrid" and r["seed"] == 0][0]
    assert hyb["alpha"] == d["alpha"] and hyb["beta"] == d["beta"]


def test_config_errors_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "direct", "--preset", "nope")
    assert code == 2 and "unknown preset" in err
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nmesh: [1\n")
    code, _, err = run(capsys, "direct", "--config", str(bad))
    assert code == 2 and "line" in err
    code, _, err = run(capsys, "direct")
    assert code == 2
    code, _, _ = run(capsys, "bench", "--preset", "silicon-stability",
                     "--methods", "guess")
    assert code == 2
    meas = tmp_path / "y.csv"
    meas.write_text("time,a,b\n0.1,1,2\n")
    code, _, err = run(capsys, "inverse", "--preset", "silicon-stability",
                       "--alpha", "0", "--measurements", str(meas))
    assert code == 2 and "sensor columns" in err


def test_numerical_failure_exit_3(capsys):
    code, _, err = run(capsys, "inverse", "--preset", "silicon-stability",
                       "--alpha", "0", "--beta", "0.3")
    assert code == 3 and "numerical failure" in err
