"""Solutions of the modified Helmholtz equation ``(Delta - tau) v = 0`` used as probes.

Explicit families (closed form, any point):

* plane      ``exp(sqrt(tau) x . omega)``
* point source  3D ``exp(-sqrt(tau)|x-p|)/|x-p|``, 2D ``K0(sqrt(tau)|x-p|)``
* growing    3D ``(exp(k r) - exp(-k r))/r`` (``2k`` at ``r = 0``), 2D ``I0(k r)``

Every probe stores ``log_scale``; ``value``/``gradient`` return the field
divided by ``exp(log_scale)``, chosen so that stored magnitudes stay O(1) over
the domain.  Volume solves (the flux-matched probe ``v_g`` and the
conductivity-weighted ``p_f``) use the finite-volume operators of :mod:`fv`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, SolverFailure
from .fv import Discretization, SPDSolver, cell_gradients
from .geometry import Ball, Box, Grid, unit_vector


def _domain_extent(domain, fn):
    """Max of ``fn`` over a set of points covering the closed domain."""
    if isinstance(domain, Ball):
        d = domain.dim
        if d == 2:
            th = np.linspace(0, 2 * np.pi, 721)
            pts = domain.center + domain.radius * np.stack([np.cos(th), np.sin(th)], 1)
        else:
            g = np.random.default_rng(0).standard_normal((4000, 3))
            pts = domain.center + domain.radius * g / np.linalg.norm(g, axis=1, keepdims=True)
        return float(np.max(fn(pts)))
    lo, hi = domain.bbox
    axes = [np.linspace(lo[i], hi[i], 41) for i in range(lo.size)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, lo.size)
    return float(np.max(fn(pts)))


class ProbeField:
    """Common interface: ``value(x)``, ``gradient(x)`` (both scaled by ``exp(-log_scale)``)."""

    kind = "abstract"
    tau: float
    dim: int
    log_scale: float = 0.0

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def normal_derivative(self, x, normal):
        return np.sum(self.gradient(x) * np.atleast_2d(normal), axis=1)

    def log_abs_value(self, x):
        v = self.value(x)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(v)) + self.log_scale

    def descriptor(self) -> str:
        return self.kind


@dataclass(eq=False)
class PlaneProbe(ProbeField):
    omega: np.ndarray
    tau: float
    log_scale: float = 0.0
    kind = "plane"

    def __post_init__(self):
        self.omega = unit_vector(self.omega)
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        self.dim = self.omega.size

    @property
    def k(self):
        return math.sqrt(self.tau)

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.exp(self.k * (x @ self.omega) - self.log_scale)

    def gradient(self, x):
        return self.k * self.value(x)[:, None] * self.omega[None, :]

    def descriptor(self):
        return "plane(" + ",".join(f"{c:.6g}" for c in self.omega) + ")"


@dataclass(eq=False)
class PointSourceProbe(ProbeField):
    p: np.ndarray
    tau: float
    log_scale: float = 0.0
    kind = "point_source"

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(-1)
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        self.dim = self.p.size

    @property
    def k(self):
        return math.sqrt(self.tau)

    def _r(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rel = x - self.p
        return rel, np.linalg.norm(rel, axis=1)

    def value(self, x):
        _, r = self._r(x)
        z = self.k * r
        if self.dim == 2:
            return special.k0e(z) * np.exp(-z - self.log_scale)
        return np.exp(-z - self.log_scale) / r

    def gradient(self, x):
        rel, r = self._r(x)
        z = self.k * r
        if self.dim == 2:
            dv_dr = -self.k * special.k1e(z) * np.exp(-z - self.log_scale)
        else:
            dv_dr = -np.exp(-z - self.log_scale) * (self.k + 1.0 / r) / r
        return (dv_dr / r)[:, None] * rel

    def descriptor(self):
        return "point_source(" + ",".join(f"{c:.6g}" for c in self.p) + ")"


@dataclass(eq=False)
class GrowingProbe(ProbeField):
    y: np.ndarray
    tau: float
    log_scale: float = 0.0
    kind = "growing"

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        self.dim = self.y.size

    @property
    def k(self):
        return math.sqrt(self.tau)

    def _r(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rel = x - self.y
        return rel, np.linalg.norm(rel, axis=1)

    def value(self, x):
        _, r = self._r(x)
        z = self.k * r
        if self.dim == 2:
            return special.i0e(z) * np.exp(z - self.log_scale)
        out = np.empty_like(r)
        small = z < 1e-4
        # 2 sinh(z)/r = 2k (1 + z^2/6 + ...)
        out[small] = 2 * self.k * (1 + z[small] ** 2 / 6) * math.exp(-self.log_scale)
        zs, rs = z[~small], r[~small]
        out[~small] = np.exp(zs - self.log_scale) * -np.expm1(-2 * zs) / rs
        return out

    def gradient(self, x):
        rel, r = self._r(x)
        z = self.k * r
        out = np.zeros_like(rel)
        nz = r > 0
        if self.dim == 2:
            dv_dr = self.k * special.i1e(z[nz]) * np.exp(z[nz] - self.log_scale)
        else:
            zs, rs = z[nz], r[nz]
            # d/dr [2 sinh(kr)/r] = (2k cosh(kr) r - 2 sinh(kr)) / r^2
            e = np.exp(zs - self.log_scale)
            dv_dr = e * (self.k * (1 + np.exp(-2 * zs)) * rs - (1 - np.exp(-2 * zs))) / rs**2
        out[nz] = (dv_dr / r[nz])[:, None] * rel[nz]
        return out

    def descriptor(self):
        return "growing(" + ",".join(f"{c:.6g}" for c in self.y) + ")"


def explicit_probe(variant: str, params, tau: float, domain=None, *, normalize=True) -> ProbeField:
    """Closed-form probe; with ``domain`` its log scale is set to ``log max |v|`` on the domain."""
    if variant == "plane":
        probe = PlaneProbe(np.asarray(params, dtype=float), tau)
    elif variant == "point_source":
        probe = PointSourceProbe(np.asarray(params, dtype=float), tau)
        if domain is not None and (domain.contains(probe.p) or _on_closure(domain, probe.p)):
            raise DomainError(f"point source p = {probe.p} must lie outside the closed domain")
    elif variant == "growing":
        probe = GrowingProbe(np.asarray(params, dtype=float), tau)
    else:
        raise DomainError(f"unknown probe variant {variant!r}")
    if domain is not None and normalize:
        probe.log_scale = _domain_extent(domain, probe.log_abs_value)
    return probe


def _on_closure(domain, p):
    if isinstance(domain, Ball):
        return bool(np.linalg.norm(p - domain.center) <= domain.radius)
    if isinstance(domain, Box):
        return bool(np.all(p >= domain.lo) and np.all(p <= domain.hi))
    return False


# --------------------------------------------------------------------------- solved probes


@dataclass(eq=False)
class SolvedProbe(ProbeField):
    """Cell field solving the discrete Neumann problem, plus its facet data.

    ``facet_flux`` is the Neumann data used in the solve; boundary values are
    the adjacent cell values.
    """

    grid: Grid
    cells: np.ndarray
    facet_flux: np.ndarray
    tau: float
    log_scale: float = 0.0
    residual: float = 0.0
    source: str = "solved"
    kind = "solved"

    def __post_init__(self):
        self.dim = self.grid.dim
        self._grad = None

    @property
    def facet_values(self):
        return self.cells[self.grid.facet_cell]

    @property
    def cell_gradient(self):
        if self._grad is None:
            self._grad = cell_gradients(self.grid, self.cells)
        return self._grad

    def _interp(self, field, x):
        grid = self.grid
        x = np.atleast_2d(np.asarray(x, dtype=float))
        full = grid.to_array(field)
        # multilinear interpolation from cell centres; falls back to the owning cell
        s = (x - grid.lo) / grid.h - 0.5
        base = np.floor(s).astype(int)
        frac = s - base
        out = np.zeros(len(x))
        wsum = np.zeros(len(x))
        d = grid.dim
        for corner in range(2**d):
            off = np.array([(corner >> a) & 1 for a in range(d)])
            idx = base + off
            ok = np.all((idx >= 0) & (idx < grid.n), axis=1)
            w = np.prod(np.where(off == 1, frac, 1 - frac), axis=1)
            vals = np.full(len(x), np.nan)
            vals[ok] = full[tuple(idx[ok].T)]
            good = ok & np.isfinite(vals)
            out[good] += w[good] * vals[good]
            wsum[good] += w[good]
        own = grid.locate(x)
        fallback = (wsum < 1 - 1e-12) & (own >= 0)
        out[fallback] = field[own[fallback]]
        out[~fallback] /= np.where(wsum[~fallback] > 0, wsum[~fallback], 1.0)
        out[(wsum == 0) & (own < 0)] = np.nan
        return out

    def value(self, x):
        return self._interp(self.cells, x)

    def gradient(self, x):
        g = self.cell_gradient
        return np.stack([self._interp(g[:, a], x) for a in range(self.dim)], axis=1)

    def normal_derivative(self, x, normal):
        return np.sum(self.gradient(x) * np.atleast_2d(normal), axis=1)

    def descriptor(self):
        return self.source


def _facet_data(g):
    """Accept a TransformedTrace or an array of facet values."""
    if hasattr(g, "g"):
        return np.asarray(g.g, dtype=float), float(getattr(g, "log_scale", 0.0))
    return np.asarray(g, dtype=float), 0.0


def _helmholtz_solve(disc: Discretization, q, tau, method, rtol):
    grid = disc.grid
    A = disc.helmholtz(tau)
    rhs = disc.B @ q
    if not np.any(rhs):
        return np.zeros(grid.n_cells), 0.0
    solver = SPDSolver(A, method=method, rtol=rtol, max_iter=20 * grid.n + 200)
    v = solver.solve(rhs)
    res = float(np.linalg.norm(A @ v - rhs) / np.linalg.norm(rhs))
    if res > 1e-8:
        raise SolverFailure(f"Helmholtz solve residual {res:.3e} exceeds 1e-8", residual=res)
    return v, res


def solve_neumann_probe(grid: Grid, g, tau: float, *, disc=None, method="auto", rtol=1e-12) -> SolvedProbe:
    """Discrete ``(Delta - tau) v = 0`` with ``dv/dnu = g`` on the facets."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    q, log_scale = _facet_data(g)
    if not np.all(np.isfinite(q)):
        raise DomainError("Neumann data must be finite")
    disc = disc or Discretization(grid)
    if disc.tensors is not None:
        raise ValueError("solve_neumann_probe uses the identity background; pass a background discretization")
    v, res = _helmholtz_solve(disc, q, tau, method, rtol)
    return SolvedProbe(grid, v, q, tau, log_scale, res, "neumann")


def solve_gamma_helmholtz(grid: Grid, cond, scene, g, tau: float, *, disc=None, method="auto", rtol=1e-12):
    """Discrete ``(div gamma grad - tau) p = 0`` with ``gamma grad p . nu = g``."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    q, log_scale = _facet_data(g)
    disc = disc or Discretization(grid, cond, scene)
    p, res = _helmholtz_solve(disc, q, tau, method, rtol)
    return SolvedProbe(grid, p, q, tau, log_scale, res, "gamma")


def discretize_probe(grid: Grid, probe: ProbeField, *, disc=None, method="auto", rtol=1e-12) -> SolvedProbe:
    """Discrete counterpart of an explicit probe.

    Solves the discrete Neumann problem whose data is the probe's exact
    normal derivative at the boundary points behind each facet.  The result
    satisfies the discrete equation exactly, which the indicator identity
    requires, and converges to the explicit probe under refinement.
    """
    q = probe.normal_derivative(grid.facet_point, grid.facet_true_normal)
    disc = disc or Discretization(grid)
    v, res = _helmholtz_solve(disc, q, probe.tau, method, rtol)
    return SolvedProbe(grid, v, q, probe.tau, probe.log_scale, res, "discrete-" + probe.descriptor())


def discrete_residual(grid: Grid, probe: ProbeField, disc=None):
    """Max |(Delta_h - tau) v| at cells whose full stencil is interior, relative to max |v| there."""
    disc = disc or Discretization(grid)
    v = probe.value(grid.centers)
    interior = np.ones(grid.n_cells, bool)
    interior[grid.facet_cell] = False
    r = (disc.K @ v + probe.tau * grid.cell_volume * v) / grid.cell_volume
    return float(np.max(np.abs(r[interior])) / np.max(np.abs(v[interior])))


def gradient_energy(grid: Grid, field, fractions, tensor=None):
    """``int_D A grad v . grad v`` by cell midpoints weighted with inclusion fractions."""
    g = field.cell_gradient if isinstance(field, SolvedProbe) else cell_gradients(grid, field)
    if tensor is None:
        dens = np.sum(g * g, axis=1)
    else:
        dens = np.einsum("ci,ij,cj->c", g, tensor, g)
    return float(grid.cell_volume * np.sum(fractions * dens))


def ball_neumann_exact(ball: Ball, tau: float, x):
    """Exact solution of ``(Delta - tau) v = 0`` in a ball with unit Neumann data.

    2D: ``I0(k r) / (k I1(k R))``.  3D: ``R^2 sinh(k r) / (r (k R cosh(k R) - sinh(k R)))``.
    Ratios are formed with exponentially scaled Bessel functions so large ``k R`` is safe.
    """
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    k = math.sqrt(tau)
    R = ball.radius
    r = np.linalg.norm(np.atleast_2d(np.asarray(x, dtype=float)) - ball.center, axis=1)
    if ball.dim == 2:
        return special.i0e(k * r) / (k * special.i1e(k * R)) * np.exp(k * (r - R))
    kr = k * r
    small = kr < 1e-6
    # sinh(kr)/r scaled by exp(-kR); series near the center
    num = np.where(small, k * (1 + kr**2 / 6) * np.exp(-k * R),
                   (np.exp(kr - k * R) - np.exp(-kr - k * R)) / (2 * np.where(small, 1.0, r)))
    den = (k * R * (1 + math.exp(-2 * k * R)) - (1 - math.exp(-2 * k * R))) / 2
    return R**2 * num / den
