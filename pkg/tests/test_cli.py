import json
import subprocess
import sys

import numpy as np
import pytest

from rcdyn import experiments
from rcdyn import reservoir as res
from rcdyn.analysis import Histogram, read_section_csv
from rcdyn.cli import IDENTIFIERS, main
from rcdyn.timeseries import TimeSeries, read_csv, write_csv


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def short_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("gen")
    assert run("generate", "--T", 80, "--out", d, "--name", "train.csv", "--seed", 2) == 0
    return d / "train.csv"


def test_generate_training_length(tmp_path):
    assert run("generate", "--system", "lorenz28", "--T", 5000, "--out", tmp_path) == 0
    ts = read_csv(tmp_path / "lorenz28.csv")
    assert len(ts) == 500_000 and ts.dt == 0.01


def test_generate_zero_length_is_usage_error(tmp_path, capsys):
    assert run("generate", "--T", 0, "--out", tmp_path) == 2
    assert "positive" in capsys.readouterr().err


def test_generate_is_byte_reproducible(tmp_path):
    run("--seed", 5, "generate", "--T", 30, "--out", tmp_path / "a", "--system", "rossler")
    run("generate", "--T", 30, "--out", tmp_path / "b", "--system", "rossler", "--seed", 5)
    a = (tmp_path / "a" / "rossler.csv").read_bytes()
    assert a == (tmp_path / "b" / "rossler.csv").read_bytes()
    run("generate", "--T", 30, "--out", tmp_path / "c", "--system", "rossler", "--seed", 6)
    assert a != (tmp_path / "c" / "rossler.csv").read_bytes()


def test_train_missing_csv(tmp_path, capsys):
    assert run("train", "--input", tmp_path / "nope.csv", "--out", tmp_path) == 2
    assert "not found" in capsys.readouterr().err


def test_train_table1_bundle(short_csv, tmp_path):
    args = ("train", "--input", short_csv, "--preset", "table1-lorenz28", "--seed", 1)
    assert run(*args, "--out", tmp_path / "a") == 0
    model = res.load_model(tmp_path / "a" / "model")
    assert model.config == res.TABLE1_LORENZ28.replace(seed=1)
    assert abs(res.spectral_radius(model.A) - 0.99) < 1e-6
    report = json.loads((tmp_path / "a" / "model" / "train.json").read_text())
    assert abs(report["spectral_radius"] - 0.99) < 1e-6
    assert run(*args, "--out", tmp_path / "b") == 0
    meta_a = json.loads((tmp_path / "a" / "model" / "meta.json").read_text())
    meta_b = json.loads((tmp_path / "b" / "model" / "meta.json").read_text())
    assert meta_a["checksums"] == meta_b["checksums"]


def test_train_config_file_and_predict(short_csv, tmp_path):
    cfg = res.load_preset("lorenz28").replace(N=200)
    cfg.save(tmp_path / "cfg.json")
    assert run("--config", tmp_path / "cfg.json", "train", "--input", short_csv,
               "--noise", 0.003, "--out", tmp_path) == 0
    assert res.load_model(tmp_path / "model").config.N == 200
    assert run("predict", "--model", tmp_path / "model", "--input", short_csv, "--T", 5,
               "--out", tmp_path) == 0
    pred = read_csv(tmp_path / "prediction.csv")
    assert len(pred) == 500 and pred.dim == 3


def test_bad_config_is_usage_error(short_csv, tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"N": 10}))
    assert run("train", "--config", tmp_path / "cfg.json", "--input", short_csv,
               "--out", tmp_path) == 2


def test_analyze_lyapunov_actual(tmp_path):
    assert run("analyze", "--system", "lorenz28", "--T", 1e5, "--lyapunov",
               "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())["lyapunov"]
    assert rep["exponents"][0] == pytest.approx(0.902, rel=0.01)


def test_analyze_fixed_points_actual(tmp_path):
    assert run("analyze", "--system", "lorenz28", "--T", 10, "--fixed-points",
               "--guess", "8.5,8.5,27", "--guess=-8.5,-8.5,27", "--guess", "0,0,0",
               "--out", tmp_path) == 0
    lines = (tmp_path / "fixed_points.csv").read_text().splitlines()
    assert lines[0].startswith("name,x,y,z,l1_re") and len(lines) == 4
    rows = np.loadtxt(tmp_path / "fixed_points.csv", delimiter=",", skiprows=1,
                      usecols=range(1, 10))
    c = np.sqrt(72.0)
    assert np.allclose(rows[:, :3], [[c, c, 27], [-c, -c, 27], [0, 0, 0]], atol=1e-9)
    assert rows[2, 3] == pytest.approx(11.83, abs=0.01)


def test_analyze_laminar_scalar_csv(tmp_path, rng):
    path = write_csv(TimeSeries(0.1, rng.normal(size=5000)), tmp_path / "e.csv")
    assert run("analyze", "--input", path, "--laminar", "--threshold", 1.8,
               "--out", tmp_path) == 0
    h = Histogram.from_csv(tmp_path / "laminar.csv")
    assert abs(h.integral() - 1) < 1e-9
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["laminar"]["threshold"] == 1.8 and rep["laminar"]["count"] > 0


def test_analyze_csv_outputs_round_trip(tmp_path):
    data = experiments.generate("lorenz28", 300.0, seed=1)
    path = write_csv(data, tmp_path / "in.csv")
    assert run("analyze", "--input", path, "--poincare", "--density", "--clv-angles",
               "--out", tmp_path) == 0
    sec = read_section_csv(tmp_path / "section.csv")
    assert len(sec) == json.loads((tmp_path / "report.json").read_text())["poincare"]["count"]
    for name in ("density.csv", "angles.csv"):
        h = Histogram.from_csv(tmp_path / name)
        h.to_csv(tmp_path / ("again_" + name))
        assert (tmp_path / name).read_bytes() == (tmp_path / ("again_" + name)).read_bytes()


def test_analyze_usage_errors(tmp_path):
    assert run("analyze", "--system", "lorenz28", "--out", tmp_path) == 2
    assert run("analyze", "--system", "lorenz28", "--upo-shadow", "--out", tmp_path) == 2
    assert run("analyze", "--lyapunov", "--out", tmp_path) == 2


def test_numerical_failure_exit_code(small_model, short_csv, tmp_path):
    res.save_model(small_model, tmp_path / "m")
    code = run("analyze", "--model", tmp_path / "m", "--input", short_csv, "--T", 50,
               "--fixed-points", "--guess", "30,30,80", "--eps0", 1e-15, "--n0", 10,
               "--out", tmp_path)
    assert code == 3


def test_reproduce_unknown_identifier(capsys):
    assert run("reproduce", "table9") == 2
    err = capsys.readouterr().err
    assert all(i in err for i in IDENTIFIERS)


def test_reproduce_exit_status_tracks_checks(tmp_path, monkeypatch):
    def good(ctx, d, m):
        m["orbit.period"] = experiments.FIG6_PERIOD

    def bad(ctx, d, m):
        m["orbit.period"] = 30.0

    monkeypatch.setitem(experiments.RECIPES, "fig6", good)
    assert run("reproduce", "fig6", "--out", tmp_path) == 0
    monkeypatch.setitem(experiments.RECIPES, "fig6", bad)
    assert run("reproduce", "fig6", "--out", tmp_path) == 1
    text = (tmp_path / "fig6" / "summary.txt").read_text()
    assert text.startswith("FAIL orbit.period")


def test_threads_flag_in_subprocess(tmp_path):
    out = subprocess.run([sys.executable, "-m", "rcdyn.cli", "--threads", "1", "generate",
                          "--T", "1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "lorenz28.csv").exists()
