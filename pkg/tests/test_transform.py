import math

import numpy as np
import pytest

from thermal_enclosure import BoundaryTrace, Box, build_grid, laplace_time, resolution_guard
from thermal_enclosure.errors import DomainError
from thermal_enclosure.forward_heat import scheme_weights


@pytest.fixture(scope="module")
def grid():
    return build_grid(Box([0, 0], [1, 1]), 8, 1.0, 256)


def _trace(grid, u_of_t):
    u = np.tile(u_of_t(grid.times), (grid.n_facets, 1))
    return BoundaryTrace(grid, u, np.zeros_like(u))


def test_constant_in_time(grid):
    tau, dt = 10.0, grid.dt
    w = laplace_time(_trace(grid, np.ones_like), tau).w
    exact = -math.expm1(-tau) / tau
    assert np.all(np.abs(w - exact) <= 2e-4)
    # trapezoid error bound tau^2 dt^2 / 12 (relative)
    assert np.all(np.abs(w / exact - 1) <= tau**2 * dt**2 / 12 * 1.01)


def test_zero_trace(grid):
    assert not laplace_time(_trace(grid, np.zeros_like), 10.0).w.any()


def test_linear_in_time(grid):
    tau, dt = 20.0, grid.dt
    w = laplace_time(_trace(grid, lambda t: t), tau).w[0]
    exact = (1 - (1 + tau) * math.exp(-tau)) / tau**2
    assert exact == pytest.approx(2.4999e-3, abs=1e-7)
    # the error is the Euler-Maclaurin term -dt^2/12 [d/dt (t e^{-tau t})]_0^1
    em = -dt**2 / 12 * ((1 - tau) * math.exp(-tau) - 1)
    assert w - exact == pytest.approx(-em, rel=1e-3)
    assert w - exact == pytest.approx(-1.2711778478945689e-06, rel=1e-8)


def test_tau_must_be_positive(grid):
    with pytest.raises(DomainError):
        laplace_time(_trace(grid, np.ones_like), 0.0)


def test_scheme_transform_solves_discrete_helmholtz(bench):
    grid, disc, state = bench["grid"], bench["disc"], bench["state"]
    tau = 25.0
    tt = laplace_time(bench["trace"], tau, "scheme")
    W = state.transforms[tau]
    lhs = disc.helmholtz(tau) @ W
    rhs = disc.B @ tt.g - tt.remainder * (disc.M @ state.final)
    assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(rhs)
    np.testing.assert_allclose(tt.w, W[grid.facet_cell], rtol=1e-12)


def test_scheme_weights_sum_to_discrete_laplace():
    tau, n, dt = 25.0, 256, 1 / 256
    total = dt * scheme_weights(tau, n, dt).sum()
    assert total == pytest.approx((1 - (1 - tau * dt) ** n) / tau, rel=1e-13)


@pytest.mark.parametrize("tau, h, dt, ok", [
    (100.0, 0.02, None, True), (400.0, 0.05, None, False), (100.0, None, 1 / 64, False)])
def test_resolution_guard(tau, h, dt, ok):
    assert resolution_guard(tau, h=h, dt=dt).ok is ok


def test_guard_scheme_threshold():
    assert resolution_guard(179.0, dt=1 / 256, method="scheme").ok
    assert not resolution_guard(179.0, dt=1 / 256).ok
    assert not resolution_guard(300.0, dt=1 / 256, method="scheme").ok
