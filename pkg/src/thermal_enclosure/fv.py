"""Cell-centred finite-volume operators and SPD linear solves.

The diffusion operator ``K`` is assembled from two-point face fluxes whose
coefficients are harmonic means of the adjacent cell tensors projected on the
face axis.  Off-diagonal tensor entries add a symmetric cell-gradient term.
``M`` is the (diagonal) cell volume and ``B`` maps facet flux densities to
cell sources (``B[c, f] = measure_f``).  With these,

    backward Euler:     (M/dt + K) u^k = M u^{k-1}/dt + B f^k
    modified Helmholtz: (K + tau M) v = B q
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

from .conductivity import ConductivitySpec, blend_tensor
from .errors import SolverFailure
from .geometry import Grid, cell_fractions

log = logging.getLogger(__name__)

DIRECT_LIMIT = 250_000


def inclusion_fractions(grid: Grid, scene, s=4):
    return cell_fractions(scene.inclusion, grid.centers, grid.h, s)


def cell_tensors(grid: Grid, cond: ConductivitySpec, scene, fractions=None):
    if fractions is None:
        fractions = inclusion_fractions(grid, scene)
    return blend_tensor(cond, fractions)


def stiffness(grid: Grid, tensors=None):
    """Assemble ``K`` for cell tensors (``None`` means the identity background)."""
    n = grid.n_cells
    axis = grid.face_axis
    if tensors is None:
        kappa = np.ones(axis.size)
    else:
        a = tensors[grid.face_left, axis, axis]
        b = tensors[grid.face_right, axis, axis]
        kappa = 2.0 * a * b / (a + b)
    coef = kappa * grid.face_area[axis] / grid.h[axis]
    i, j = grid.face_left, grid.face_right
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([coef, coef, -coef, -coef])
    K = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    if tensors is not None:
        off = tensors.copy()
        idx = np.arange(grid.dim)
        off[:, idx, idx] = 0.0
        if np.any(off != 0.0):
            G = gradient_operators(grid)
            vol = grid.cell_volume
            for p in range(grid.dim):
                for q in range(grid.dim):
                    if p != q and np.any(off[:, p, q] != 0.0):
                        K = K + G[p].T @ sp.diags(vol * off[:, p, q]) @ G[q]
    return K.tocsr()


def mass(grid: Grid):
    return sp.identity(grid.n_cells, format="csr") * grid.cell_volume


def facet_operator(grid: Grid):
    """``B`` with ``B @ q`` the cell source of facet flux densities ``q``."""
    return sp.csr_matrix(
        (grid.facet_measure, (grid.facet_cell, np.arange(grid.n_facets))),
        shape=(grid.n_cells, grid.n_facets),
    )


def gradient_operators(grid: Grid):
    """Centered-difference gradient (one-sided next to the boundary), one matrix per axis."""
    n = grid.n_cells
    mats = []
    for a in range(grid.dim):
        m = grid.face_axis == a
        left, right = grid.face_left[m], grid.face_right[m]
        has_r = np.zeros(n, bool)
        has_l = np.zeros(n, bool)
        nb_r = np.full(n, -1)
        nb_l = np.full(n, -1)
        has_r[left] = True
        nb_r[left] = right
        has_l[right] = True
        nb_l[right] = left
        own = np.arange(n)
        hinv = 1.0 / grid.h[a]
        rows, cols, vals = [], [], []
        both = has_l & has_r
        rows += [own[both], own[both]]
        cols += [nb_r[both], nb_l[both]]
        vals += [np.full(both.sum(), 0.5 * hinv), np.full(both.sum(), -0.5 * hinv)]
        only_r = has_r & ~has_l
        rows += [own[only_r], own[only_r]]
        cols += [nb_r[only_r], own[only_r]]
        vals += [np.full(only_r.sum(), hinv), np.full(only_r.sum(), -hinv)]
        only_l = has_l & ~has_r
        rows += [own[only_l], own[only_l]]
        cols += [own[only_l], nb_l[only_l]]
        vals += [np.full(only_l.sum(), hinv), np.full(only_l.sum(), -hinv)]
        mats.append(
            sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
            )
        )
    return mats


def cell_gradients(grid: Grid, values):
    """``(n_cells, d)`` centered-difference gradient of a cell field."""
    return np.stack([G @ values for G in gradient_operators(grid)], axis=1)


class SPDSolver:
    """Solve ``A x = b`` for a fixed SPD matrix.

    Small systems are factorized once (sparse LU); large ones use Jacobi
    preconditioned conjugate gradients with relative residual ``rtol`` and an
    iteration cap.
    """

    def __init__(self, A, method="auto", rtol=1e-10, max_iter=None):
        self.A = A.tocsr()
        self.n = self.A.shape[0]
        if method == "auto":
            method = "direct" if self.n <= DIRECT_LIMIT else "cg"
        self.method = method
        self.rtol = rtol
        self.max_iter = max_iter or 20 * int(round(self.n ** (1.0 / 2))) + 200
        self.last_residual = 0.0
        self.iterations = 0
        if method == "direct":
            self._lu = spla.splu(self.A.tocsc(), permc_spec="MMD_AT_PLUS_A")
        elif method == "cg":
            self._dinv = 1.0 / self.A.diagonal()
        else:
            raise ValueError(f"unknown solve method {method!r}")

    def solve(self, b, x0=None):
        b = np.asarray(b, dtype=float)
        if self.method == "direct":
            x = self._lu.solve(b)
            self.last_residual = _relres(self.A, x, b)
            return x
        if b.ndim == 2:
            return np.stack([self.solve(b[:, j]) for j in range(b.shape[1])], axis=1)
        return self._pcg(b, x0)

    def _pcg(self, b, x0):
        bnorm = float(np.linalg.norm(b))
        if bnorm == 0.0:
            self.last_residual = 0.0
            return np.zeros_like(b)
        x = np.zeros_like(b) if x0 is None else x0.copy()
        r = b - self.A @ x
        z = self._dinv * r
        p = z.copy()
        rz = float(r @ z)
        target = self.rtol * bnorm
        for it in range(1, self.max_iter + 1):
            Ap = self.A @ p
            alpha = rz / float(p @ Ap)
            x += alpha * p
            r -= alpha * Ap
            rn = float(np.linalg.norm(r))
            if rn <= target:
                self.iterations = it
                self.last_residual = rn / bnorm
                return x
            z = self._dinv * r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        self.last_residual = rn / bnorm
        raise SolverFailure(
            f"CG did not converge in {self.max_iter} iterations (relative residual {rn / bnorm:.3e})",
            residual=rn / bnorm,
        )


def _relres(A, x, b):
    bn = np.linalg.norm(b)
    if bn == 0.0:
        return 0.0
    return float(np.linalg.norm(A @ x - b) / bn)


class Discretization:
    """Grid + conductivity bundle with cached operators."""

    def __init__(self, grid: Grid, cond: ConductivitySpec | None = None, scene=None, fractions=None):
        self.grid = grid
        self.cond = cond
        self.scene = scene
        if cond is None or cond.is_background:
            self.tensors = None
            self.fractions = None if scene is None else (
                fractions if fractions is not None else inclusion_fractions(grid, scene))
        else:
            self.fractions = fractions if fractions is not None else inclusion_fractions(grid, scene)
            self.tensors = blend_tensor(cond, self.fractions)
        self.K = stiffness(grid, self.tensors)
        self.M = mass(grid)
        self.B = facet_operator(grid)

    def helmholtz(self, tau):
        return (self.K + tau * self.M).tocsr()

    def energy_form(self, a, b):
        """``a^T K b``: discrete ``int gamma grad a . grad b``."""
        return float(a @ (self.K @ b))
