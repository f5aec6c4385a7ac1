import json

import numpy as np
import pytest

from rcdyn import experiments as ex
from rcdyn.systems import get_system


def test_check_rules():
    assert ex.check({"name": "a", "expected": 1.0, "rel_tol": 0.1}, {"a": 1.09})["passed"]
    assert not ex.check({"name": "a", "expected": 1.0, "rel_tol": 0.1}, {"a": 1.11})["passed"]
    assert ex.check({"name": "a", "expected": -2.0, "abs_tol": 0.5}, {"a": -1.6})["passed"]
    assert not ex.check({"name": "a", "upper": 0.2}, {"a": 0.2})["passed"]
    assert ex.check({"name": "a", "max": 0.2}, {"a": 0.2})["passed"]
    assert not ex.check({"name": "a", "lower": 3}, {"a": 3})["passed"]
    assert ex.check({"name": "a", "min": 3}, {"a": 3})["passed"]
    rec = ex.check({"name": "a", "min": 3}, {"a": float("nan")})
    assert not rec["passed"] and rec["note"] == "not measured"
    with pytest.raises(ValueError):
        ex.check({"name": "a"}, {"a": 1})


def test_fixture_names_are_known():
    expected = ex.load_json("expected.json")
    assert set(expected) == set(ex.IDENTIFIERS) == set(ex.RECIPES)
    for rules in expected.values():
        for rule in rules:
            ex.check(rule, {rule["name"]: 0.0})


@pytest.mark.parametrize("kw", [
    {"system": "duffing"},
    {"system": "external-csv"},
    {"system": "external-csv", "input_csv": "/nonexistent.csv"},
    {"system": "lorenz28", "train_T": 0},
    {"system": "lorenz28", "free_T": -1},
])
def test_experiment_spec_validation(kw):
    with pytest.raises((ValueError, FileNotFoundError)):
        ex.ExperimentSpec(**kw)


def test_initial_state_reproducible():
    a = ex.initial_state(get_system("lorenz28"), 3)
    assert np.array_equal(a, ex.initial_state(get_system("lorenz28"), 3))
    assert not np.array_equal(a, ex.initial_state(get_system("lorenz28"), 4))


def test_failed_stage_is_reported(tmp_path, monkeypatch):
    def broken(ctx, d, m):
        m["orbit.period"] = ex.FIG6_PERIOD
        raise RuntimeError("boom")

    monkeypatch.setitem(ex.RECIPES, "fig6", broken)
    summary = ex.reproduce("fig6", tmp_path)
    assert not summary["passed"] and "boom" in summary["error"]
    on_disk = json.loads((tmp_path / "fig6" / "summary.json").read_text())
    assert on_disk["error"] == summary["error"]
    assert "ERROR" in (tmp_path / "fig6" / "summary.txt").read_text()


def test_quick_fig5_outputs(tmp_path):
    ctx = ex.Context(tmp_path, seed=0, quick=True)
    summary = ex.reproduce("fig5", tmp_path, ctx=ctx)
    d = tmp_path / "fig5"
    assert len(list(d.glob("*angles*.csv"))) >= 2
    line = (d / "l1_distance.txt").read_text().strip()
    assert float(line.split()[-1]) >= 0
    assert {c["name"] for c in summary["checks"]} >= {"r28.l1_model_actual"}
