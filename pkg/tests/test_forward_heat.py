import math

import numpy as np
import pytest

from thermal_enclosure import Box, ConductivitySpec, Discretization, FluxSpec, build_grid, solve_forward
from thermal_enclosure.errors import ConfigurationError


def test_zero_flux_gives_zero_trace(bench):
    grid = bench["grid"]
    trace, state = solve_forward(grid, bench["disc"], np.zeros((grid.n_facets, grid.n_t + 1)))
    assert not trace.u.any()
    assert state.mass[-1] == 0.0


def test_box_conservation_is_exact():
    dom = Box([0, 0], [1, 1])
    grid = build_grid(dom, 32, 1.0, 64)
    trace, state = solve_forward(grid, Discretization(grid), FluxSpec.constant(1.0))
    perimeter = 4.0
    assert state.mass[-1] == pytest.approx(perimeter * 1.0, rel=1e-8)


def test_ball_conservation_matches_injected_heat(bench):
    grid, state = bench["grid"], bench["state"]
    injected = grid.facet_measure.sum() * grid.T
    assert state.mass[-1] == pytest.approx(injected, rel=1e-8)


def test_constant_flux_trace_is_finite_and_nonnegative(bench):
    trace = bench["trace"]
    assert np.all(np.isfinite(trace.u))
    assert bench["state"].min_value >= -1e-12
    # boundary temperature grows while heat is injected
    assert np.all(np.diff(trace.u, axis=1) >= -1e-12)


def test_sign_flip_flux_telescopes_to_zero_mass(bench):
    grid = bench["grid"]
    _, state = solve_forward(grid, bench["disc"], FluxSpec.sign_flip(1.0, T=grid.T))
    assert abs(state.mass[-1]) <= 1e-8 * state.mass.max()


def _trace_at_east_facet(n):
    from thermal_enclosure import Ball, InclusionScene
    scene = InclusionScene(Ball([0, 0], 1), Ball([0.2, 0], 0.3))
    grid = build_grid(scene.domain, n, 1.0, 64)
    trace, _ = solve_forward(grid, Discretization(grid, ConductivitySpec.scalar(2.0), scene),
                             FluxSpec.constant(1.0))
    f = int(np.argmin(np.linalg.norm(grid.facet_center - [1.0, 0.0], axis=1)))
    return trace.u[f, -1] * math.exp(trace.log_scale)


def test_trace_regression_and_refinement():
    coarse = _trace_at_east_facet(64)
    assert coarse == pytest.approx(2.2077714569326914, rel=1e-9)
    fine = _trace_at_east_facet(128)
    assert abs(fine / coarse - 1) < 0.05


def test_probe_flux_requires_matching_tau(bench):
    from thermal_enclosure import explicit_probe
    pr = explicit_probe("plane", [1.0, 0.0], 25.0, bench["scene"].domain)
    with pytest.raises(ConfigurationError):
        solve_forward(bench["grid"], bench["disc"], FluxSpec.probe_flux("one"), tau=30.0, probe=pr)
    with pytest.raises(ConfigurationError):
        solve_forward(bench["grid"], bench["disc"], FluxSpec.constant(1.0), tau=30.0)


def test_direct_and_cg_agree(disk_scene, a2):
    grid = build_grid(disk_scene.domain, 48, 1.0, 16)
    disc = Discretization(grid, a2, disk_scene)
    t1, _ = solve_forward(grid, disc, FluxSpec.constant(1.0), method="direct")
    t2, _ = solve_forward(grid, disc, FluxSpec.constant(1.0), method="cg", rtol=1e-13)
    np.testing.assert_allclose(t1.u, t2.u, rtol=1e-9, atol=1e-12)
