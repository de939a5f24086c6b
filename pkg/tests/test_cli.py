import json

import pytest

from thermal_enclosure import cli, pipeline
from thermal_enclosure.errors import SolverFailure

SMALL = ["--n", "48"]


def _run(tmp_path, name, *args):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def _summary(out):
    return json.loads((out / "summary.json").read_text())


def test_reconstruct_writes_outputs(tmp_path):
    code, out = _run(tmp_path, "r", "reconstruct", *SMALL)
    assert code == 0
    s = _summary(out)
    ex = s["extractions"][0]
    assert ex["quantity"] == "depth" and ex["truth"] == 0.5
    assert abs(ex["estimate"] - 0.5) < 0.1
    assert ex["limit"] == pytest.approx(-ex["estimate"])
    for name in ("indicator_T1.1.csv", "indicator_T1.1.png", "run.log"):
        assert (out / name).exists()
    first = (out / "indicator_T1.1.csv").read_text().splitlines()[0]
    assert first == f"# config_hash: {s['config_hash']}"


def test_outputs_are_deterministic(tmp_path):
    _, a = _run(tmp_path, "a", "reconstruct", *SMALL)
    _, b = _run(tmp_path, "b", "reconstruct", *SMALL)
    for name in ("summary.json", "indicator_T1.1.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("flux: {variant: probe_flux}\ntheorem: {tag: T1.3, points: [[0.5, 0.0]]}\n")
    code, _ = _run(tmp_path, "x", "reconstruct", "--config", str(bad))
    assert code == 2
    bad.write_text("nonsense: 1\n")
    assert _run(tmp_path, "y", "oracle", "--config", str(bad))[0] == 2


def test_solver_failure_is_stage_tagged(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise SolverFailure("did not converge", residual=1.0)
    monkeypatch.setattr(pipeline, "fixed_flux_samples", boom)
    code, out = _run(tmp_path, "f", "reconstruct", *SMALL)
    assert code == 3
    s = _summary(out)
    assert s["errors"][0]["stage"] == "T1.1"
    assert s["errors"][0]["type"] == "SolverFailure"
    assert s["grid"]["n"] == 48  # partial results kept


def test_coarse_grid_is_degraded(tmp_path):
    cfg = tmp_path / "coarse.yaml"
    cfg.write_text("grid: {n: 16}\ntau: {min: 50.0, ratio: 1.2, count: 8, max: 200.0}\n")
    code, out = _run(tmp_path, "c", "reconstruct", "--config", str(cfg))
    s = _summary(out)
    assert s["degraded"]
    assert any("resolution guard" in m for m in s["messages"])
    assert s["extractions"][0]["status"] == "unreliable"

    # a sweep beyond 1/dt is a stage failure, not a crash
    code, out = _run(tmp_path, "d", "reconstruct", "--n", "16", "--tau-min", "200", "--tau-count", "4")
    assert _summary(out)["errors"][0]["stage"] == "T1.1"
    assert code == 2


def test_no_inclusion_detected(tmp_path):
    cfg = tmp_path / "ni.yaml"
    cfg.write_text("conductivity: {tensor: [1.0, 0.0, 0.0, 1.0], class: indefinite}\n")
    code, out = _run(tmp_path, "n", "reconstruct", "--config", str(cfg), *SMALL)
    assert code == 0
    s = _summary(out)
    assert any("no inclusion detected at this sensitivity" in m for m in s["messages"])


def test_paired_contrasts_give_opposite_signs(tmp_path):
    cfg = tmp_path / "a1.yaml"
    cfg.write_text("conductivity: {tensor: [0.5, 0.0, 0.0, 0.5], class: A1}\n")
    _, up = _run(tmp_path, "up", "reconstruct", *SMALL)
    _, down = _run(tmp_path, "down", "reconstruct", "--config", str(cfg), *SMALL)
    assert _summary(up)["extractions"][0]["sign"] == 1
    assert _summary(down)["extractions"][0]["sign"] == -1
    assert _summary(down)["extractions"][0]["sign_upper_half_ok"]


def test_simulate_conserves_heat(tmp_path):
    code, out = _run(tmp_path, "s", "simulate", *SMALL)
    assert code == 0
    assert _summary(out)["reports"]["conservation"]["relative_error"] < 1e-8
    header = (out / "trace.csv").read_text().splitlines()[1]
    assert header == "facet_id,x,y,nx,ny,measure,t,u,f"
    assert (out / "trace.png").exists() and (out / "transformed.csv").exists()


def test_probe_flux_sweep(tmp_path):
    cfg = tmp_path / "t13.yaml"
    cfg.write_text("flux: {variant: probe_flux}\ntheorem: {tag: T1.3}\n")
    code, out = _run(tmp_path, "w", "sweep", "--config", str(cfg), *SMALL, "--tau-count", "4")
    assert code == 0
    rows = (out / "indicator_T1.3_0.csv").read_text().splitlines()
    assert rows[1] == "tau,sign,log_abs_I,theorem,guard" and len(rows) == 6


def test_workers_do_not_change_results(tmp_path):
    cfg = tmp_path / "t14.yaml"
    cfg.write_text("flux: {variant: probe_flux}\ntheorem: {tag: T1.4}\ntau: {count: 4}\n")
    _, a = _run(tmp_path, "w1", "reconstruct", "--config", str(cfg), *SMALL)
    _, b = _run(tmp_path, "w2", "reconstruct", "--config", str(cfg), *SMALL, "--workers", "2")
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


def test_oracle_command(tmp_path):
    code, out = _run(tmp_path, "o", "oracle")
    assert code == 0
    s = _summary(out)
    assert all(s["verdicts"].values())
    assert (out / "asymptotic_checks.csv").exists()


def test_validate_reports_property_failures(tmp_path):
    code, out = _run(tmp_path, "v", "validate", *SMALL)
    s = _summary(out)
    assert s["verdicts"]["identity_mismatch"] and s["verdicts"]["two_sided_bounds"]
    assert code == (0 if all(s["verdicts"].values()) else 4)
