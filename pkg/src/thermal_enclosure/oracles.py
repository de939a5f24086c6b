"""Brute-force quadrature oracles for the exponential integrals and energy
bounds that control the indicator asymptotics.

Volume integrals of ``exp(phi(x))`` over convex regions are computed by an
adaptive tree (quadtree/octree): fully interior cells use tensor Gauss rules
and are split until two rules agree, cut cells are split down to a leaf size
and then sampled, and cells whose contribution is provably negligible are
dropped.  Everything is shifted by the known maximum of ``phi`` so the sums
stay in range; results are returned as logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .geometry import Ball, InclusionScene, _cut_candidates, depth, enclosing_radius, point_distance, \
    support_function, unit_vector
from .probes import gradient_energy

BOUNDED_ABOVE_FACTOR = 2.0
BOUNDED_BELOW_FACTOR = 0.1


# --------------------------------------------------------------------------- verdicts


@dataclass
class AsymptoticCheck:
    name: str
    taus: np.ndarray
    values: np.ndarray
    verdict: str  # bounded-above, bounded-below-positive or slope-match
    passed: bool
    target: float | None = None
    fitted: float | None = None
    tolerance: float | None = None

    def rows(self):
        label = self.verdict + (":pass" if self.passed else ":fail")
        return [(self.name, float(t), float(v), label) for t, v in zip(self.taus, self.values)]


def bounded_above(name, taus, values, factor=BOUNDED_ABOVE_FACTOR):
    values = np.asarray(values, dtype=float)
    ok = bool(np.all(np.isfinite(values)) and values.max() <= factor * np.median(values))
    return AsymptoticCheck(name, np.asarray(taus, float), values, "bounded-above", ok)


def bounded_below(name, taus, values, factor=BOUNDED_BELOW_FACTOR):
    values = np.asarray(values, dtype=float)
    ok = bool(np.all(np.isfinite(values)) and values.min() > 0
              and values.min() >= factor * np.median(values))
    return AsymptoticCheck(name, np.asarray(taus, float), values, "bounded-below-positive", ok)


def within_band(name, taus, values, band=0.2):
    """Positive values whose spread (max/min - 1) stays below ``band``."""
    values = np.asarray(values, dtype=float)
    ok = bool(values.min() > 0 and values.max() / values.min() - 1.0 <= band)
    return AsymptoticCheck(name, np.asarray(taus, float), values, "bounded-below-positive", ok,
                           tolerance=band)


def exponential_rate(taus, log_values, with_log_term=True):
    """Coefficient ``a`` in ``log q = a 2 sqrt(tau) [+ b log tau] + c`` (least squares)."""
    taus = np.asarray(taus, dtype=float)
    cols = [2 * np.sqrt(taus)]
    if with_log_term:
        cols.append(np.log(taus))
    cols.append(np.ones_like(taus))
    coef, *_ = np.linalg.lstsq(np.stack(cols, 1), np.asarray(log_values, float), rcond=None)
    return float(coef[0])


def slope_match(name, taus, log_values, target, rel_tol=0.05, with_log_term=True):
    a = exponential_rate(taus, log_values, with_log_term)
    ok = bool(abs(a - target) <= rel_tol * abs(target))
    return AsymptoticCheck(name, np.asarray(taus, float), np.asarray(log_values, float), "slope-match", ok,
                           target, a, rel_tol)


# --------------------------------------------------------------------------- adaptive quadrature


def _classify(shapes, centers, half):
    h = np.full(centers.shape[1], 2 * half)
    inside = np.ones(len(centers), bool)
    maybe = np.ones(len(centers), bool)
    for shape in shapes:
        ins, cut = _cut_candidates(shape, centers, h)
        if isinstance(shape, Ball):
            # the ball test in _cut_candidates is exact; use it for "outside" too
            out = np.linalg.norm(centers - shape.center, axis=1) - shape.radius > half * math.sqrt(len(h))
        else:
            out = ~(ins | cut)
        inside &= ins
        maybe &= ~out
    return inside, maybe & ~inside


def _gauss(order, d):
    x, w = np.polynomial.legendre.leggauss(order)
    pts = np.stack(np.meshgrid(*([x] * d), indexing="ij"), -1).reshape(-1, d)
    wts = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), -1).reshape(-1, d), axis=1)
    return pts, wts / 2**d  # weights sum to one


def _inside_all(shapes, pts):
    ok = np.ones(pts.shape[:-1], bool)
    for s in shapes:
        ok &= s.contains(pts)
    return ok


def log_integral(shapes, phi, phi_max, lipschitz, *, tol=1e-5, leaf=None, samples=None,
                 initial=8, max_cells=4_000_000):
    """``log int_{intersection of shapes} exp(phi(x)) dx`` for convex shapes.

    ``phi`` maps ``(n, d)`` points to values, ``phi_max`` bounds it from above
    on the region and ``lipschitz`` bounds ``|grad phi|``.  ``leaf`` is the
    smallest cell width (default ``0.05 / lipschitz`` in 2D, ``0.2 / lipschitz``
    in 3D) and cut leaves are sampled with ``samples**d`` points.
    """
    d = shapes[0].dim
    if samples is None:
        samples = 8 if d == 2 else 4
    lo = np.max([s.bbox[0] for s in shapes], axis=0)
    hi = np.min([s.bbox[1] for s in shapes], axis=0)
    if np.any(hi <= lo):
        return -math.inf
    side = float(np.max(hi - lo))
    leaf = leaf if leaf is not None else (0.05 if d == 2 else 0.2) / max(lipschitz, 1e-12)
    # cheap first estimate sets the absolute tolerance density
    m0 = 48 if d == 2 else 24
    axes = [np.linspace(lo[i], lo[i] + side, m0 + 1)[:-1] + side / (2 * m0) for i in range(d)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    rough = float(np.sum(np.exp(phi(pts) - phi_max) * _inside_all(shapes, pts))) * (side / m0) ** d
    vol_scale = side**d
    if rough <= 0:
        rough = math.exp(-lipschitz * side) * vol_scale * 1e-6
    density_tol = tol * rough / vol_scale
    g_lo, w_lo = _gauss(2, d)
    g_hi, w_hi = _gauss(4, d)
    offs = (np.arange(samples) + 0.5) / samples - 0.5
    sub = np.stack(np.meshgrid(*([offs] * d), indexing="ij"), -1).reshape(-1, d)

    n0 = initial
    half = side / (2 * n0)
    axes = [lo[i] + half * (2 * np.arange(n0) + 1) for i in range(d)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    parts = []
    children = np.stack(np.meshgrid(*([[-0.5, 0.5]] * d), indexing="ij"), -1).reshape(-1, d)
    while len(centers):
        vol = (2 * half) ** d
        ub = np.exp(phi(centers) + lipschitz * half * math.sqrt(d) - phi_max) * vol
        negligible = ub <= 0.01 * density_tol * vol
        inside, cut = _classify(shapes, centers, half)
        keep = ~negligible
        inside &= keep
        cut &= keep
        split = np.zeros(len(centers), bool)
        if inside.any():
            c = centers[inside]
            ql = np.exp(phi((c[:, None, :] + half * g_lo[None]).reshape(-1, d)) - phi_max).reshape(len(c), -1) @ w_lo
            qh = np.exp(phi((c[:, None, :] + half * g_hi[None]).reshape(-1, d)) - phi_max).reshape(len(c), -1) @ w_hi
            ok = (np.abs(qh - ql) * vol <= density_tol * vol) | (2 * half <= leaf)
            parts.extend((qh[ok] * vol).tolist())
            idx = np.flatnonzero(inside)
            split[idx[~ok]] = True
        if cut.any():
            c = centers[cut]
            if 2 * half <= leaf:
                for chunk in np.array_split(c, len(c) // 4096 + 1):
                    flat = (chunk[:, None, :] + 2 * half * sub[None]).reshape(-1, d)
                    vals = np.exp(phi(flat) - phi_max) * _inside_all(shapes, flat)
                    parts.extend((vals.reshape(len(chunk), -1).mean(axis=1) * vol).tolist())
            else:
                split[cut] = True
        nxt = centers[split]
        if len(nxt) * 2**d > max_cells:
            raise RuntimeError("adaptive quadrature exceeded its cell budget")
        half *= 0.5
        centers = (nxt[:, None, :] + 2 * half * children[None]).reshape(-1, d)
    total = math.fsum(parts)
    return phi_max + math.log(total) if total > 0 else -math.inf


def exp_integral_over_D(scene: InclusionScene, variant: str, param, tau: float, *, tol=1e-5, leaf=None):
    """``log int_D exp(2 sqrt(tau) psi(x)) dx`` for ``psi`` = ``x . omega``
    (plane), ``-|x - p|`` (source) or ``|x - y|`` (growing)."""
    k2 = 2 * math.sqrt(tau)
    inc = scene.inclusion
    if variant == "plane":
        w = unit_vector(param)
        return log_integral([inc], lambda x: k2 * (x @ w), k2 * support_function(scene, w), k2,
                            tol=tol, leaf=leaf)
    p = np.asarray(param, dtype=float)
    if variant == "source":
        if scene.domain.contains(p):
            raise ValueError("source point must lie outside the domain")
        return log_integral([inc], lambda x: -k2 * np.linalg.norm(x - p, axis=1),
                            -k2 * point_distance(scene, p), k2, tol=tol, leaf=leaf)
    if variant == "growing":
        return log_integral([inc], lambda x: k2 * np.linalg.norm(x - p, axis=1),
                            k2 * enclosing_radius(scene, p), k2, tol=tol, leaf=leaf)
    raise ValueError(f"unknown variant {variant!r}")


def ball_plane_integral(ball: Ball, omega, tau):
    """Closed form of ``log int_ball exp(2 sqrt(tau) x . omega) dx`` (2D and 3D)."""
    from scipy import special

    k2 = 2 * math.sqrt(tau)
    r = ball.radius
    z = k2 * r
    base = k2 * float(ball.center @ np.asarray(omega, float))
    if ball.dim == 2:
        # 2 pi r I1(z) / k2
        return base + math.log(2 * math.pi * r / k2) + math.log(special.i1e(z)) + z
    # 4 pi (z cosh z - sinh z) / k2^3
    return base + math.log(4 * math.pi / k2**3) + z + math.log(z * (1 + math.exp(-2 * z)) / 2
                                                                 - (1 - math.exp(-2 * z)) / 2)


# --------------------------------------------------------------------------- local lower-bound integrals


def claim3_integral(x0, delta, tau, scene: InclusionScene, *, tol=1e-5):
    """``(sqrt tau)^d int_{D cap B_delta(x0)} exp(-2 sqrt(tau)|x - x0|) dx``."""
    x0 = np.asarray(x0, dtype=float)
    k = math.sqrt(tau)
    d = scene.dim
    region = [scene.inclusion, Ball(x0, delta)]
    logv = log_integral(region, lambda x: -2 * k * np.linalg.norm(x - x0, axis=1), 0.0, 2 * k,
                        tol=tol, leaf=(0.01 if d == 2 else 0.1) / k)
    return math.exp(d * math.log(k) + logv)


def halfspace_limit(d):
    """``int_{x_d > 0} exp(-2|x|) dx``: pi/4 in 2D, pi/2 in 3D."""
    return math.pi / 4 if d == 2 else math.pi / 2


def claim4_integral(y0, delta, tau, domain):
    """``(sqrt tau)^(d-1) int_{boundary cap B_delta(y0)} exp(-sqrt(tau)|y0 - y|) dS_y`` on a ball."""
    if not isinstance(domain, Ball):
        raise ValueError("boundary integrals need a ball domain")
    y0 = np.asarray(y0, dtype=float)
    R = domain.radius
    if abs(np.linalg.norm(y0 - domain.center) - R) > 1e-9 * R:
        raise ValueError("y0 must lie on the boundary")
    k = math.sqrt(tau)
    rmax = min(delta, 2 * R)
    if domain.dim == 2:
        # chord r = 2R sin(theta/2), arclength R dtheta
        th_max = 2 * math.asin(min(rmax / (2 * R), 1.0))
        val, _ = integrate.quad(lambda t: math.exp(-2 * k * R * math.sin(t / 2)) * R, 0.0, th_max,
                                epsabs=0, epsrel=1e-12, limit=200, points=[min(th_max, 1 / (k * R))])
        return k * 2 * val
    # on a sphere dS = 2 pi R r dr in terms of the chord r
    val, _ = integrate.quad(lambda r: math.exp(-k * r) * 2 * math.pi * R * r, 0.0, rmax,
                            epsabs=0, epsrel=1e-12, limit=200)
    return k * k * val


def flat_limit(d):
    """``int_{R^(d-1)} exp(-|u|) du``: 2 in 2D, 2 pi in 3D."""
    return 2.0 if d == 2 else 2 * math.pi


# --------------------------------------------------------------------------- gradient energy


def lemma21_energy(scene: InclusionScene, grid, v_g, tau, mu, fractions=None, lambdas=None):
    """``(tau^l1 e^{2 sqrt(tau) d0} E, tau^l2 e^{2 sqrt(tau) d0} E)`` with ``E = int_D |grad v_g|^2``.

    Defaults ``l1 = 2 mu - 1`` and ``l2 = 2 mu + 5/2``.  Also returns ``log E``.
    """
    from .fv import inclusion_fractions

    if fractions is None:
        fractions = inclusion_fractions(grid, scene)
    l1, l2 = lambdas if lambdas is not None else (2 * mu - 1, 2 * mu + 2.5)
    energy = gradient_energy(grid, v_g, fractions)
    log_e = math.log(energy) + 2 * v_g.log_scale
    d0 = depth(scene)
    base = log_e + 2 * math.sqrt(tau) * d0
    return math.exp(l1 * math.log(tau) + base), math.exp(l2 * math.log(tau) + base), log_e
