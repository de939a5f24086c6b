"""Single-layer representation of the Neumann probe on ball domains.

With ``G`` the fundamental solution of ``Delta - tau`` (``K0(kr)/(2 pi)`` in
2D, ``exp(-kr)/(4 pi r)`` in 3D, ``k = sqrt(tau)``) the field
``v = 2 int G(x, y) psi(y) dS_y`` has interior normal derivative
``psi + S psi`` with ``S psi(x) = 2 int d/dnu_x G(x, y) psi(y) dS_y``.
The density therefore solves the second-kind equation ``psi + S psi = g``.

On a circle or sphere of radius ``R`` one has ``(x - y) . nu_x = r^2 / (2R)``,
so the kernel of ``S`` reduces to

    2D:  -k r K1(k r) / (2 pi R)            (smooth, diagonal -1/(2 pi R))
    3D:  -exp(-k r) (1 + k r) / (4 pi R r)   (weakly singular)

The 2D system is a plain trapezoidal Nystrom discretization.  In 3D the
singularity is subtracted against the exact integral of the kernel over the
sphere.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import NumericalFailure, UnsupportedGeometryError
from .geometry import Ball


class LayerAccuracyWarning(UserWarning):
    pass


@dataclass
class LayerDensity:
    domain: Ball
    tau: float
    nodes: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    psi: np.ndarray
    g: np.ndarray
    operator: np.ndarray  # discrete S (kernel times weights)
    residual: float
    condition: float
    param: np.ndarray  # arclength (2D) or (theta, phi) pairs (3D)

    @property
    def dim(self):
        return self.domain.dim

    @property
    def k(self):
        return math.sqrt(self.tau)

    @property
    def spacing(self):
        """Typical distance between neighbouring nodes."""
        return float(np.sqrt(np.mean(self.weights))) if self.dim == 3 else float(np.mean(self.weights))


def _circle_nodes(ball, m):
    s = 2 * np.pi * np.arange(m) / m
    nrm = np.stack([np.cos(s), np.sin(s)], 1)
    nodes = ball.center + ball.radius * nrm
    w = np.full(m, 2 * np.pi * ball.radius / m)
    return nodes, nrm, w, ball.radius * s


def _sphere_nodes(ball, m):
    """Gauss-Legendre in cos(theta) times uniform phi: ``m`` azimuthal and ``m // 2`` polar nodes."""
    nt = max(m // 2, 4)
    x, wx = np.polynomial.legendre.leggauss(nt)
    theta = np.arccos(x)
    phi = 2 * np.pi * (np.arange(m) + 0.5) / m
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.repeat(wx[:, None], m, axis=1) * (2 * np.pi / m)
    nrm = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
    R = ball.radius
    return ball.center + R * nrm, nrm, (R * R) * W.reshape(-1), np.stack([T.ravel(), P.ravel()], 1)


def _operator(ball, k, nodes, weights):
    R = ball.radius
    r = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=2)
    if ball.dim == 2:
        kr = k * r
        with np.errstate(invalid="ignore", divide="ignore"):
            ker = np.where(kr > 0, kr * special.k1e(kr) * np.exp(-kr), 1.0)
        return -ker / (2 * np.pi * R) * weights[None, :]
    np.fill_diagonal(r, 1.0)
    ker = -np.exp(-k * r) * (1 + k * r) / (4 * np.pi * R * r)
    np.fill_diagonal(ker, 0.0)
    A = ker * weights[None, :]
    # singularity subtraction: int K(x, y) (psi(y) - psi(x)) dS_y + psi(x) int K(x, y) dS_y
    total = -(2 - (2 + 2 * k * R) * math.exp(-2 * k * R)) / (2 * k)
    A[np.diag_indices_from(A)] = total - A.sum(axis=1)
    return A


def _boundary_values(g, nodes, normals):
    if callable(g):
        return np.asarray(g(nodes, normals), dtype=float) * np.ones(len(nodes))
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        return np.full(len(nodes), float(g))
    if g.shape != (len(nodes),):
        raise ValueError(f"boundary data must have {len(nodes)} node values, got shape {g.shape}")
    return g


def layer_nodes(domain, m):
    if not isinstance(domain, Ball):
        raise UnsupportedGeometryError("layer potentials are implemented for ball domains only")
    if m < 32:
        raise ValueError(f"need at least 32 boundary nodes, got {m}")
    return _circle_nodes(domain, m) if domain.dim == 2 else _sphere_nodes(domain, m)


def solve_layer_density(domain, g, tau: float, m: int = 256, *, max_condition=1e12) -> LayerDensity:
    """Nystrom solution of ``psi + S psi = g`` on the boundary of a ball.

    ``g`` is a constant, an array of node values or a callable
    ``g(points, normals)``.  In 3D ``m`` is the azimuthal node count.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    nodes, normals, weights, param = layer_nodes(domain, m)
    k = math.sqrt(tau)
    S = _operator(domain, k, nodes, weights)
    A = np.eye(len(nodes)) + S
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > max_condition:
        raise NumericalFailure(f"layer system condition number {cond:.3e} exceeds {max_condition:.1e}")
    gv = _boundary_values(g, nodes, normals)
    psi = np.linalg.solve(A, gv)
    scale = max(float(np.linalg.norm(gv)), np.finfo(float).tiny)
    res = float(np.linalg.norm(A @ psi - gv) / scale)
    if res > 1e-10:
        raise NumericalFailure(f"layer solve residual {res:.3e} exceeds 1e-10")
    return LayerDensity(domain, float(tau), nodes, normals, weights, psi, gv, S, res, cond, param)


def evaluate_layer_field(density: LayerDensity, x, *, warn=True):
    """Value and gradient of ``v = 2 int G(x, y) psi(y) dS_y`` at interior points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    dom = density.domain
    dist = dom.radius - np.linalg.norm(x - dom.center, axis=1)
    limit = 2 * density.spacing
    if warn and np.any(dist < limit):
        warnings.warn(
            f"evaluation point at distance {dist.min():.3g} from the boundary (< {limit:.3g}); "
            "layer quadrature is inaccurate there",
            LayerAccuracyWarning,
            stacklevel=2,
        )
    k = density.k
    rel = x[:, None, :] - density.nodes[None, :, :]
    r = np.linalg.norm(rel, axis=2)
    wpsi = density.weights * density.psi
    if density.dim == 2:
        kr = k * r
        e = np.exp(-kr)
        val = (special.k0e(kr) * e) @ wpsi / np.pi
        dk = -k * special.k1e(kr) * e / r / np.pi
    else:
        e = np.exp(-k * r)
        val = (e / r) @ wpsi / (2 * np.pi)
        dk = -e * (1 + k * r) / r**3 / (2 * np.pi)
    grad = np.einsum("pn,pnd,n->pd", dk, rel, wpsi)
    return val, grad


def operator_norm(density_or_matrix, iters=200, tol=1e-12, seed=0):
    """Spectral norm of the discrete ``S`` by power iteration on ``S^T S``."""
    S = density_or_matrix.operator if isinstance(density_or_matrix, LayerDensity) else density_or_matrix
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(S.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iters):
        y = S.T @ (S @ x)
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            return 0.0
        x = y / ny
        new = math.sqrt(ny)
        if abs(new - sigma) <= tol * new:
            return new
        sigma = new
    return sigma


def interior_decay_rate(density: LayerDensity, direction=None, depths=(0.25, 0.375, 0.5)):
    """Least-squares slope of ``log|v|`` against distance to the boundary along a ray."""
    dom = density.domain
    u = np.zeros(dom.dim)
    u[0] = 1.0
    if direction is not None:
        u = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    depths = np.asarray(depths, dtype=float)
    pts = dom.center + (dom.radius - depths)[:, None] * u
    val, _ = evaluate_layer_field(density, pts, warn=False)
    return float(np.polyfit(depths, np.log(np.abs(val)), 1)[0])
