"""Acceptance criteria 1-12 on the disk benchmark: Omega = ball(0, 1),
D = ball((0.2, 0), 0.3), T = 1, n = 128, N_t = 256, tau = 10 * 1.3^j (j < 12).

Each test records one PASS/FAIL line (printed in the terminal summary) before
asserting, so a failing criterion still reports its measured values.
"""

import math
import time

import numpy as np
import pytest

from thermal_enclosure import Ball, Discretization, InclusionScene, ball_neumann_exact, build_grid, \
    evaluate_layer_field, operator_norm, solve_layer_density, solve_neumann_probe
from thermal_enclosure.config import parse_config
from thermal_enclosure.oracles import claim3_integral, claim4_integral, exp_integral_over_D, flat_limit, \
    slope_match, within_band
from thermal_enclosure.pipeline import RunSummary, build_setup, halfspace_model, identity_and_bounds, \
    run_reconstruction

A2_2D = {"tensor": [2.0, 0.0, 0.0, 2.0], "class": "A2"}
A1_2D = {"tensor": [0.5, 0.0, 0.0, 0.5], "class": "A1"}


def _reconstruct(data):
    t0 = time.perf_counter()
    summary = run_reconstruction(parse_config(data))
    return summary, time.perf_counter() - t0


@pytest.fixture(scope="module")
def validation_summary():
    """Identity, bounds and energy checks of the benchmark (shared by criteria 5-7)."""
    setup = build_setup(parse_config({"conductivity": A2_2D}))
    summary = RunSummary("validate", setup.chash)
    identity_and_bounds(setup, summary)
    return summary


def test_criterion_01_depth(acceptance):
    lines, ok = [], True
    for cond, sign in ((A2_2D, 1), (A1_2D, -1)):
        summary, secs = _reconstruct({"conductivity": cond, "flux": {"variant": "constant", "a": 1.0, "mu": 1.0}})
        ex = summary.extractions[0]
        good = (0.45 <= ex["estimate"] <= 0.55 and ex["sign"] == sign and ex["sign_upper_half_ok"]
                and secs <= 600)
        ok &= good
        lines.append(f"{cond['class']} depth {ex['estimate']:.4f} sign {ex['sign']:+d} ({secs:.1f} s)")
    acceptance(1, ok, "; ".join(lines) + " [target 0.45-0.55, signs +1/-1]")
    assert ok


def test_criterion_02_support_function(acceptance):
    summary, _ = _reconstruct({"conductivity": A2_2D, "flux": {"variant": "probe_flux", "phi": "one"},
                               "theorem": {"tag": "T1.2", "directions": 8}})
    errs = [abs(e["error"]) for e in summary.extractions]
    fit = summary.reports["support_fit"]
    ok = (len(errs) == 8 and max(errs) <= 0.05 and fit["center_error"] <= 0.05 and fit["radius_error"] <= 0.05)
    acceptance(2, ok, f"max |h - h_D| = {max(errs):.4f}; center error {fit['center_error']:.4f}, "
                      f"radius error {fit['radius_error']:.4f} [tol 0.05]")
    assert ok


def test_criterion_03_point_distance(acceptance):
    summary, _ = _reconstruct({"flux": {"variant": "probe_flux"}, "theorem": {"tag": "T1.3", "points": [[2.0, 0.0]]}})
    est = summary.extractions[0]["estimate"]
    ok = 1.42 <= est <= 1.58
    acceptance(3, ok, f"d_D(p) = {est:.4f} [target 1.42-1.58]")
    assert ok


def test_criterion_04_enclosing_radius(acceptance):
    summary, _ = _reconstruct({"flux": {"variant": "probe_flux"}, "theorem": {"tag": "T1.4", "centers": [[0.0, 0.0]]}})
    ex = summary.extractions[0]
    finite = all(np.isfinite(ex["log_abs_I"]))
    ok = 0.45 <= ex["estimate"] <= 0.55 and finite and not summary.errors
    acceptance(4, ok, f"R_D(y) = {ex['estimate']:.4f} [target 0.45-0.55]; log|I| finite: {finite}, "
                      f"max log|I| = {max(ex['log_abs_I']):.1f}")
    assert ok


def test_criterion_05_basic_identity(acceptance, validation_summary):
    rep = validation_summary.reports["identity"][0]
    ok = rep["tau"] == 25.0 and rep["mismatch"] <= 1e-6 and rep["remainder_fraction"] <= 0.01
    acceptance(5, ok, f"tau=25 relative mismatch {rep['mismatch']:.2e} [<= 1e-6], "
                      f"remainder fraction {rep['remainder_fraction']:.2e} [<= 1e-2]")
    assert ok


def test_criterion_06_two_sided_bounds(acceptance, validation_summary):
    reps = validation_summary.reports["two_sided_bounds"]
    algebra = all(math.isclose(r["lower"], 0.5 * r["energy"], rel_tol=1e-12)
                  and math.isclose(r["upper"], r["energy"], rel_tol=1e-12) for r in reps)
    holds = all(r["holds"] for r in reps)
    ok = len(reps) == 12 and holds and algebra
    worst = min((r["middle"] - r["lower"]) / r["energy"] for r in reps), \
        min((r["upper"] - r["middle"]) / r["energy"] for r in reps)
    acceptance(6, ok, f"L <= M <= U at {sum(r['holds'] for r in reps)}/{len(reps)} taus; "
                      f"min (M-L)/E = {worst[0]:.3f}, min (U-M)/E = {worst[1]:.3f}; L = E/2, U = E: {algebra}")
    assert ok


def test_criterion_07_energy_asymptotics(acceptance, validation_summary):
    v = validation_summary.verdicts
    e = validation_summary.reports["energy"]
    up, lo = np.array(e["upper_scaled"]), np.array(e["lower_scaled"])
    ok = v["energy_rate"] and v["energy_upper_scaled"] and v["energy_lower_scaled"]
    acceptance(7, ok, f"rate {e['fitted_rate']:.4f} vs -d0 = {-e['depth']:.4f} "
                      f"({'ok' if v['energy_rate'] else 'fail'}, 10%); "
                      f"upper max/median {up.max() / np.median(up):.2f} [<= 2]; "
                      f"lower min/median {lo.min() / np.median(lo):.3f} [>= 0.1]")
    assert ok


def test_criterion_08_layer_cross_validation(acceptance):
    dom = Ball([0.0, 0.0], 1.0)
    grid = build_grid(dom, 128)
    disc = Discretization(grid)
    inner = np.linalg.norm(grid.centers, axis=1) <= 0.75
    diffs = []
    for tau in (25.0, 100.0):
        v = solve_neumann_probe(grid, np.ones(grid.n_facets), tau, disc=disc)
        lv, _ = evaluate_layer_field(solve_layer_density(dom, 1.0, tau, 256), grid.centers[inner])
        diffs.append(float(np.max(np.abs(v.cells[inner] / lv - 1))))
    ratio = operator_norm(solve_layer_density(dom, 1.0, 100.0, 256)) / \
        operator_norm(solve_layer_density(dom, 1.0, 400.0, 256))
    ok = max(diffs) <= 0.03 and 1.6 <= ratio <= 2.4
    acceptance(8, ok, f"max rel diff {diffs[0]:.4f} (tau 25), {diffs[1]:.4f} (tau 100) [<= 0.03]; "
                      f"norm ratio {ratio:.3f} [1.6-2.4]")
    assert ok


def test_criterion_09_exponential_integral_slopes(acceptance):
    scene = InclusionScene(Ball([0, 0], 1), Ball([0.2, 0], 0.3))
    taus = np.array([25.0, 50.0, 100.0, 200.0, 400.0])
    checks = []
    for variant, param, target in (("plane", [1.0, 0.0], 0.5), ("source", [2.0, 0.0], -1.5),
                                   ("growing", [0.0, 0.0], 0.5)):
        logs = [exp_integral_over_D(scene, variant, param, t) for t in taus]
        checks.append(slope_match(variant, taus, logs, target))
    ok = all(c.passed for c in checks)
    acceptance(9, ok, "; ".join(f"{c.name} {c.fitted:.4f} vs {c.target}" for c in checks) + " [5%]")
    assert ok


def test_criterion_10_layer_integrals(acceptance):
    taus = [100.0, 400.0, 1600.0]
    parts, ok = [], True
    for d in (2, 3):
        model = halfspace_model(d)
        x0 = model.inclusion.center + model.inclusion.radius * np.eye(d)[0]
        c3 = within_band(f"inclusion_layer_{d}d", taus, [claim3_integral(x0, 0.5, t, model) for t in taus])
        dom = Ball(np.zeros(d), 1.0)
        y0 = np.eye(d)[-1]
        vals4 = [claim4_integral(y0, 0.5, t, dom) for t in taus]
        c4 = within_band(f"boundary_layer_{d}d", taus, vals4)
        flat = abs(vals4[-1] / flat_limit(d) - 1)
        ok &= c3.passed and c4.passed and flat <= 0.05
        parts.append(f"{d}D inclusion layer {np.round(c3.values, 4).tolist()}, boundary layer {np.round(vals4, 4).tolist()} "
                     f"(flat limit error {flat:.4f})")
    acceptance(10, ok, "; ".join(parts) + " [20% band, 5% limit]")
    assert ok


def test_criterion_11_closed_forms(acceptance):
    parts, ok = [], True
    for d, n, tol in ((2, 128, 0.03), (3, 96, 0.05)):
        dom = Ball(np.zeros(d), 1.0)
        grid = build_grid(dom, n)
        v = solve_neumann_probe(grid, np.ones(grid.n_facets), 25.0, disc=Discretization(grid))
        m = grid.facet_measure
        boundary = abs((m @ v.facet_values) / m.sum() / ball_neumann_exact(dom, 25.0, np.eye(d)[:1])[0] - 1)
        inner = np.linalg.norm(grid.centers, axis=1) <= 0.75
        interior = float(np.max(np.abs(v.cells[inner] / ball_neumann_exact(dom, 25.0, grid.centers[inner]) - 1)))
        ok &= boundary <= tol and interior <= tol
        parts.append(f"{d}D n={n}: boundary value {boundary:.4f}, interior max {interior:.4f} [{tol}]")
    acceptance(11, ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_12_smoke_3d(acceptance):
    parts, ok = [], True
    t_all = time.perf_counter()
    for tensor, cls, sign in ((2.0, "A2", 1), (0.5, "A1", -1)):
        summary, secs = _reconstruct({
            "dim": 3, "conductivity": {"tensor": list(np.ravel(tensor * np.eye(3))), "class": cls},
            "grid": {"n": 96, "n_t": 256}, "tau": {"min": 10.0, "ratio": 1.3, "count": 12, "max": 120.0}})
        ex = summary.extractions[0]
        good = abs(ex["estimate"] - 0.5) <= 0.1 and ex["sign"] == sign and ex["sign_upper_half_ok"]
        ok &= good
        parts.append(f"{cls} depth {ex['estimate']:.4f} sign {ex['sign']:+d} ({secs:.0f} s)")
    total = time.perf_counter() - t_all
    ok &= total <= 3600
    acceptance(12, ok, "; ".join(parts) + f" [0.5 +- 0.1; total {total:.0f} s <= 3600]")
    assert ok
