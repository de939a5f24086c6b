"""Backward-Euler finite-volume solution of the Neumann heat problem with
zero initial temperature, producing the boundary temperature trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fv import Discretization, SPDSolver
from .geometry import Grid


@dataclass
class BoundaryTrace:
    """Facet temperatures ``u[facet, level]`` and fluxes ``f[facet, level]``.

    Level 0 is ``t = 0``.  For ``k >= 1`` the flux column holds the value
    applied during step ``(t_{k-1}, t_k]`` (sampled at the step midpoint).
    The physical values are ``exp(log_scale)`` times the stored ones.
    """

    grid: Grid
    u: np.ndarray
    f: np.ndarray
    log_scale: float = 0.0

    def __post_init__(self):
        shape = (self.grid.n_facets, self.grid.n_t + 1)
        if self.u.shape != shape or self.f.shape != shape:
            raise ConfigurationError(f"trace arrays must have shape {shape}")

    @property
    def times(self):
        return self.grid.times

    def scaled(self, c):
        return BoundaryTrace(self.grid, self.u * c, self.f * c, self.log_scale)

    def __add__(self, other):
        if other.log_scale != self.log_scale:
            raise ConfigurationError("cannot add traces with different log scales")
        return BoundaryTrace(self.grid, self.u + other.u, self.f + other.f, self.log_scale)


@dataclass
class HeatState:
    """Per-level diagnostics of a forward solve (full fields only on request)."""

    times: np.ndarray
    final: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    min_value: float
    fields: np.ndarray | None = None
    transforms: dict = field(default_factory=dict)


def step_fluxes(grid: Grid, flux, tau=None, probe=None):
    """Facet flux per level: ``(n_facets, n_t + 1)`` array and its log scale.

    ``flux`` is a :class:`FluxSpec` or an explicit array of facet values.
    Probe fluxes are normalized by the probe's log scale.
    """
    t = grid.times
    t_eval = np.concatenate([[0.0], t[1:] - 0.5 * grid.dt])
    if isinstance(flux, np.ndarray):
        if flux.shape != (grid.n_facets, grid.n_t + 1):
            raise ConfigurationError("explicit flux array has the wrong shape")
        return flux, 0.0
    if flux.variant == "probe_flux":
        if probe is None:
            raise ConfigurationError("probe_flux needs a probe field")
        if tau is None or not math.isclose(tau, probe.tau, rel_tol=1e-12):
            raise ConfigurationError("probe_flux needs tau matching the probe")
        dn = probe.normal_derivative(grid.facet_point, grid.facet_true_normal)
        return np.outer(dn, flux.time_factor(t_eval)), probe.log_scale
    if tau is not None:
        raise ConfigurationError("tau is only meaningful for probe fluxes")
    vals = np.asarray(flux.time_factor(t_eval), dtype=float).reshape(1, -1)
    return np.repeat(vals, grid.n_facets, axis=0), 0.0


def scheme_weights(tau, n_t, dt):
    """Discrete Laplace weights ``(1 - tau dt)^(k-1)``, k = 1..n_t.

    With these, ``W = dt * sum_k weight_k u^k`` of a backward-Euler run solves
    ``(K + tau M) W = B G - z^n_t M u^n_t`` exactly, ``z = 1 - tau dt``.
    """
    z = 1.0 - tau * dt
    if not z > 0.0:
        raise ConfigurationError(
            f"tau * dt = {tau * dt:.3g} >= 1: refine the time grid for tau = {tau}"
        )
    return z ** np.arange(n_t)


def solve_forward(grid: Grid, disc: Discretization, flux, tau=None, probe=None, *,
                  keep_fields=False, transform_taus=(), method="auto", rtol=1e-12):
    """Run backward Euler and return ``(BoundaryTrace, HeatState)``.

    ``disc`` carries the conductivity (see :class:`fv.Discretization`).
    ``transform_taus`` requests interior scheme-consistent transforms
    ``W(tau)``, accumulated on the fly and stored in ``HeatState.transforms``.
    """
    fvals, log_scale = step_fluxes(grid, flux, tau=tau, probe=probe)
    dt = grid.dt
    n_t = grid.n_t
    vol = grid.cell_volume
    A = disc.K + disc.M * (1.0 / dt)
    solver = SPDSolver(A, method=method, rtol=rtol, max_iter=20 * grid.n + 200)

    cells = grid.facet_cell
    u_trace = np.zeros((grid.n_facets, n_t + 1))
    mass_hist = np.zeros(n_t + 1)
    energy_hist = np.zeros(n_t + 1)
    fields = np.zeros((n_t + 1, grid.n_cells)) if keep_fields else None
    weights = {t: scheme_weights(t, n_t, dt) for t in transform_taus}
    acc = {t: np.zeros(grid.n_cells) for t in transform_taus}
    u = np.zeros(grid.n_cells)
    umin = 0.0
    if np.all(fvals == 0.0):
        state = HeatState(grid.times, u, mass_hist, energy_hist, 0.0, fields,
                          {t: np.zeros(grid.n_cells) for t in transform_taus})
        return BoundaryTrace(grid, u_trace, fvals.copy(), log_scale), state
    for k in range(1, n_t + 1):
        rhs = u * (vol / dt) + disc.B @ fvals[:, k]
        u = solver.solve(rhs, x0=u)
        u_trace[:, k] = u[cells]
        mass_hist[k] = vol * u.sum()
        energy_hist[k] = vol * float(u @ u)
        umin = min(umin, float(u.min()))
        if keep_fields:
            fields[k] = u
        for t in transform_taus:
            acc[t] += (dt * weights[t][k - 1]) * u
    state = HeatState(grid.times, u, mass_hist, energy_hist, umin, fields, acc)
    return BoundaryTrace(grid, u_trace, fvals.copy(), log_scale), state


def energy_history(state: HeatState):
    """``int_Omega u(., t_k)^2 dx`` per time level."""
    return state.energy.copy()
