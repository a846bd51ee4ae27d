"""Scenario runner: configs, demos, exit codes, and serialization round-trips."""

import json
import os

import numpy as np
import pytest

from confspec import (
    ConfigError,
    load_metric,
    load_operator,
    make_circle_metric,
    make_torus_metric,
    metric_from_dict,
    metric_to_dict,
    save_metric,
    save_operator,
)
from confspec.cli import EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK, main

from conftest import circle_theta

TWO_PI = 2.0 * np.pi


def _write_config(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return str(path)


def _circle_record(n=32, amplitude=0.0, band=1):
    theta = circle_theta(n)
    metric = make_circle_metric(TWO_PI, amplitude * np.sin(theta), band)
    return metric_to_dict(metric)


# ------------------------------------------------------------------ exit codes

def test_detect_scenario_decides_conformal(tmp_path, capsys):
    config = _write_config(tmp_path, {
        "scenario": "detect",
        "metric_a": _circle_record(amplitude=0.0, band=0),
        "metric_b": _circle_record(amplitude=0.25, band=1),
        "spin": ["antiperiodic"],
    })
    code = main(["--config", config, "--out", str(tmp_path / "out")])
    assert code == EXIT_OK
    assert "decision: conformal" in capsys.readouterr().out
    record = json.loads((tmp_path / "out" / "result.json").read_text())
    assert record["outputs"]["decision"] == "conformal"
    assert record["scenario"]["scenario"] == "detect"
    assert isinstance(record["input_hash"], str) and len(record["input_hash"]) == 64
    header = (tmp_path / "out" / "evidence.csv").read_text().splitlines()[0]
    assert header == "point_index,dir_x,dir_y,frequency,residual"


def test_bad_grid_size_names_the_field(tmp_path, capsys):
    bad = _circle_record()
    bad["N"] = 63
    bad["v_samples"] = [0.0] * 63
    config = _write_config(tmp_path, {
        "scenario": "detect",
        "metric_a": bad,
        "metric_b": _circle_record(),
    })
    code = main(["--config", config, "--out", str(tmp_path / "out")])
    assert code == EXIT_ERROR
    err = capsys.readouterr().err
    assert "config error" in err
    assert "metric_a.N" in err


def test_config_and_demo_are_exclusive(tmp_path, capsys):
    config = _write_config(tmp_path, {"scenario": "build",
                                      "metric": _circle_record()})
    assert main(["--config", config, "--demo", "projector-identity"]) == EXIT_ERROR
    assert main([]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert "exactly one of --config or --demo" in err


def test_invalid_json_reports_location(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"scenario": "build",,}')
    assert main(["--config", str(path)]) == EXIT_ERROR
    assert "not valid JSON" in capsys.readouterr().err


def test_unknown_scenario_kind(tmp_path, capsys):
    config = _write_config(tmp_path, {"scenario": "transmogrify"})
    assert main(["--config", config]) == EXIT_ERROR
    assert "scenario" in capsys.readouterr().err


def test_probe_on_unbounded_operator_is_inconclusive(tmp_path, capsys):
    config = _write_config(tmp_path, {
        "scenario": "probe",
        "metric": _circle_record(amplitude=0.3),
        "operator": "dirac",
        "point": [0.0],
        "direction": [1],
    })
    code = main(["--config", config, "--out", str(tmp_path / "out")])
    assert code == EXIT_INCONCLUSIVE
    record = json.loads((tmp_path / "out" / "result.json").read_text())
    assert record["outputs"]["converged"] is False


def test_probe_on_sign_converges(tmp_path, capsys):
    config = _write_config(tmp_path, {
        "scenario": "probe",
        "metric": _circle_record(amplitude=0.3),
        "point": [0.0],
        "direction": [1],
    })
    code = main(["--config", config, "--out", str(tmp_path / "out")])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "converged: True" in out


def test_build_scenario_writes_artifacts(tmp_path):
    config = _write_config(tmp_path, {
        "scenario": "build",
        "metric": _circle_record(amplitude=0.3),
        "spin": ["antiperiodic"],
    })
    out = tmp_path / "out"
    assert main(["--config", config, "--out", str(out)]) == EXIT_OK
    metric = load_metric(out / "metric.json")
    operator = load_operator(out / "operator.npz")
    assert metric.dim == 1
    assert operator.size == 32
    assert operator.hermitian


def test_seed_override_changes_the_hash(tmp_path):
    config = _write_config(tmp_path, {
        "scenario": "probe",
        "metric": _circle_record(),
        "point": [0.0],
        "direction": [1],
    })
    out_a, out_b, out_c = (str(tmp_path / d) for d in ("a", "b", "c"))
    main(["--config", config, "--out", out_a])
    main(["--config", config, "--out", out_b])
    main(["--config", config, "--out", out_c, "--seed", "7"])
    read = lambda d: json.loads((tmp_path / d / "result.json").read_text())
    assert read("a")["input_hash"] == read("b")["input_hash"]
    assert read("a")["input_hash"] != read("c")["input_hash"]


def test_threads_env_fallback(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CONFSPEC_THREADS", "2")
    config = _write_config(tmp_path, {
        "scenario": "probe",
        "metric": _circle_record(),
        "point": [0.0],
        "direction": [1],
    })
    assert main(["--config", config, "--out", str(tmp_path / "out")]) == EXIT_OK
    monkeypatch.setenv("CONFSPEC_THREADS", "many")
    assert main(["--config", config]) == EXIT_ERROR
    assert "CONFSPEC_THREADS" in capsys.readouterr().err


def test_recover_scenario(tmp_path):
    config = _write_config(tmp_path, {
        "scenario": "recover",
        "metric": _circle_record(n=64, amplitude=0.3),
        "spin": ["antiperiodic"],
        "points": [[1.5707963267948966]],
    })
    out = tmp_path / "out"
    assert main(["--config", config, "--out", str(out)]) == EXIT_OK
    record = json.loads((out / "result.json").read_text())
    recovered = record["outputs"]["recovered"][0]
    true_value = record["outputs"]["true_values"][0]
    assert recovered == pytest.approx(true_value, abs=0.01)


def test_projector_identity_demo(tmp_path, capsys):
    assert main(["--demo", "projector-identity",
                 "--out", str(tmp_path / "out")]) == EXIT_OK
    record = json.loads((tmp_path / "out" / "result.json").read_text())
    checks = record["outputs"]["checks"]
    assert checks and all(c["passed"] for c in checks)


# ------------------------------------------------------------- serialization

def test_metric_round_trip_is_bitwise(tmp_path):
    theta = circle_theta(64)
    metric = make_circle_metric(TWO_PI, 0.3 * np.sin(theta), 1)
    first = tmp_path / "m1.json"
    second = tmp_path / "m2.json"
    save_metric(metric, first)
    reloaded = load_metric(first)
    save_metric(reloaded, second)
    assert first.read_bytes() == second.read_bytes()
    assert np.array_equal(reloaded.factor.samples, metric.factor.samples)


def test_torus_metric_round_trip(tmp_path):
    xs = circle_theta(16)
    v = 0.2 * np.cos(xs)[:, None] * np.ones((1, 16))
    metric = make_torus_metric(2.0, v, 1)
    path = tmp_path / "torus.json"
    save_metric(metric, path)
    reloaded = load_metric(path)
    assert reloaded.background.modulus == 2.0
    assert np.array_equal(reloaded.factor.samples, metric.factor.samples)


def test_operator_round_trip(tmp_path, dirac_curved_s1):
    path = tmp_path / "op.npz"
    save_operator(dirac_curved_s1, path)
    reloaded = load_operator(path)
    assert np.array_equal(reloaded.matrix, dirac_curved_s1.matrix)
    assert reloaded.grid == dirac_curved_s1.grid
    assert reloaded.rank == dirac_curved_s1.rank
    assert reloaded.hermitian == dirac_curved_s1.hermitian
    assert reloaded.spin == dirac_curved_s1.spin


def test_metric_from_dict_names_missing_fields():
    with pytest.raises(ConfigError) as exc_info:
        metric_from_dict({"dim": 1}, field="metric_b")
    assert exc_info.value.field.startswith("metric_b.")


def test_metric_record_fields():
    record = metric_to_dict(make_circle_metric(TWO_PI, np.zeros(8), 0))
    assert set(record) == {"dim", "N", "period", "background",
                           "band_limit", "v_samples"}
    assert record["background"] == {"kind": "circle", "length": TWO_PI}
