"""Indicator assembly, sign checks and extraction of the log-asymptotic limit.

The indicator for one ``tau`` is the boundary functional

    I(tau) = int_{boundary} (g v - w dv/dnu) dS

built from the transformed measurement ``(w, g)`` and a probe ``v``.  Its
logarithm grows like ``2 sqrt(tau) * a`` where ``a`` is the geometric limit
(minus the depth, the support function, minus the point distance or the
enclosing radius, depending on the probe).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InsufficientDataError, SignInconsistencyError
from .geometry import Grid
from .probes import ProbeField, SolvedProbe, gradient_energy
from .transform import TransformedTrace, resolution_guard

THEOREMS = ("T1.1", "T1.2", "T1.3", "T1.4")
# limit a -> reported geometric quantity
QUANTITY = {
    "T1.1": ("depth", -1.0),
    "T1.2": ("support_function", 1.0),
    "T1.3": ("point_distance", -1.0),
    "T1.4": ("enclosing_radius", 1.0),
}
INDETERMINATE_FACTOR = 100.0


@dataclass(frozen=True)
class IndicatorSample:
    """``I(tau)`` stored as sign and ``log|I|`` (physical magnitude, scales folded in)."""

    tau: float
    sign: int
    log_abs: float
    theorem: str = "T1.1"
    probe: str = ""
    guard: str = "ok"
    log_summands: float = -math.inf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign != 0 and not math.isfinite(self.log_abs):
            raise ValueError("log|I| must be finite for a determinate sample")

    @property
    def usable(self):
        return self.sign != 0

    @property
    def value(self):
        """``I`` as a float (may overflow to inf for growing probes; prefer ``log_abs``)."""
        if self.sign == 0:
            return 0.0
        with np.errstate(over="ignore"):
            return self.sign * float(np.exp(self.log_abs))


def _probe_boundary(probe, grid: Grid):
    if isinstance(probe, SolvedProbe):
        if probe.grid is not grid and probe.grid.n_facets != grid.n_facets:
            raise ConfigurationError("solved probe lives on a different grid")
        return probe.facet_values, probe.facet_flux
    pts, nrm = grid.facet_point, grid.facet_true_normal
    return probe.value(pts), probe.normal_derivative(pts, nrm)


def assemble_indicator(w_g: TransformedTrace, probe: ProbeField, grid: Grid, theorem="T1.1",
                       descriptor=None) -> IndicatorSample:
    """Facet quadrature of ``g v - w dv/dnu``.

    All quantities are handled in scaled form; the physical ``log|I|`` adds
    the trace and probe log scales, so growing probes never overflow.
    """
    if theorem not in THEOREMS:
        raise ConfigurationError(f"unknown theorem tag {theorem!r}")
    if not math.isclose(w_g.tau, probe.tau, rel_tol=1e-12):
        raise ConfigurationError(f"trace tau {w_g.tau} and probe tau {probe.tau} differ")
    v, dv = _probe_boundary(probe, grid)
    m = grid.facet_measure
    a = m * w_g.g * v
    b = m * w_g.w * dv
    total = float(np.sum(a - b))
    mag = float(np.sum(np.abs(a)) + np.sum(np.abs(b)))
    guard = resolution_guard(w_g.tau, grid, method=w_g.method).label
    desc = descriptor or probe.descriptor()
    scale = w_g.log_scale + probe.log_scale
    log_mag = math.log(mag) + scale if mag > 0 else -math.inf
    if mag == 0.0 or abs(total) < INDETERMINATE_FACTOR * np.finfo(float).eps * mag:
        return IndicatorSample(float(w_g.tau), 0, -math.inf, theorem, desc, guard, log_mag)
    sign = 1 if total > 0 else -1
    return IndicatorSample(float(w_g.tau), sign, math.log(abs(total)) + scale, theorem, desc, guard, log_mag)


# --------------------------------------------------------------------------- extraction


@dataclass
class ExtractionResult:
    theorem: str
    limit: float  # fitted coefficient a of 2 sqrt(tau)
    slopes: np.ndarray
    slope_estimate: float  # mean of the last K pairwise slopes
    fit: np.ndarray  # (a, b, c) of log|I| = a 2 sqrt(tau) + b log(tau) + c
    fit_residual: float
    fit_window: tuple
    sign: int
    sign_consistent: bool
    disagreement: bool
    taus: np.ndarray
    log_abs: np.ndarray
    truth: float | None = None
    notes: list = field(default_factory=list)

    @property
    def quantity_name(self):
        return QUANTITY[self.theorem][0]

    @property
    def quantity(self):
        """The geometric quantity in its natural sign (depth and distance positive)."""
        return QUANTITY[self.theorem][1] * self.limit

    @property
    def error(self):
        return None if self.truth is None else self.quantity - self.truth

    def to_dict(self):
        return {
            "theorem": self.theorem,
            "quantity": self.quantity_name,
            "estimate": self.quantity,
            "limit": self.limit,
            "truth": self.truth,
            "error": self.error,
            "slope_estimate": self.slope_estimate,
            "slopes": [float(s) for s in self.slopes],
            "fit": {"a": float(self.fit[0]), "b": float(self.fit[1]), "c": float(self.fit[2])},
            "fit_residual": self.fit_residual,
            "fit_window": [float(self.fit_window[0]), float(self.fit_window[1])],
            "sign": self.sign,
            "sign_consistent": self.sign_consistent,
            "estimator_disagreement": self.disagreement,
            "notes": list(self.notes),
        }


def _fit(taus, logs):
    s = np.sqrt(taus)
    X = np.stack([2 * s, np.log(taus), np.ones_like(s)], axis=1)
    coef, *_ = np.linalg.lstsq(X, logs, rcond=None)
    resid = logs - X @ coef
    return coef, float(np.sqrt(np.mean(resid**2)))


def extract_limit(samples, k_last=3, upper_fraction=0.5, truth=None, min_samples=4) -> ExtractionResult:
    """Estimate ``lim (1/(2 sqrt(tau))) log|I(tau)|``.

    The estimate is the coefficient ``a`` of a least-squares fit
    ``log|I| = a 2 sqrt(tau) + b log(tau) + c`` over the upper part of the
    sweep (``upper_fraction`` of the usable samples, at least four).  The
    ``b log(tau)`` term absorbs algebraic prefactors, which bias plain
    pairwise slopes at moderate ``tau``.  Pairwise slopes and their last-``K``
    mean are reported alongside; ``disagreement`` flags a >10% gap.
    """
    samples = list(samples)
    if not samples:
        raise InsufficientDataError("no indicator samples")
    theorems = {s.theorem for s in samples}
    if len(theorems) != 1:
        raise ConfigurationError(f"samples mix theorems {sorted(theorems)}")
    theorem = theorems.pop()
    taus_all = np.array([s.tau for s in samples])
    if np.any(np.diff(taus_all) <= 0):
        raise ConfigurationError("samples must have strictly increasing tau")
    use = [s for s in samples if s.usable]
    if len(use) < min_samples:
        raise InsufficientDataError(
            f"only {len(use)} sign-determinate samples (need {min_samples})")
    taus = np.array([s.tau for s in use])
    logs = np.array([s.log_abs for s in use])
    signs = np.array([s.sign for s in use])
    n_fit = max(min_samples, int(math.ceil(upper_fraction * len(use))))
    lo = len(use) - n_fit
    window_signs = set(signs[lo:].tolist())
    if len(window_signs) > 1:
        raise SignInconsistencyError(
            f"indicator changes sign within the fit window tau in [{taus[lo]:.4g}, {taus[-1]:.4g}]")
    sign = int(signs[-1])
    consistent = len(set(signs.tolist())) == 1
    notes = []
    if not consistent:
        first = int(np.nonzero(signs != sign)[0].max()) + 1
        notes.append(f"sign settles from tau = {taus[first]:.4g}; earlier samples differ")
    dropped = len(samples) - len(use)
    if dropped:
        notes.append(f"{dropped} sign-indeterminate samples dropped")
    slopes = np.diff(logs) / (2 * np.diff(np.sqrt(taus)))
    k = min(k_last, len(slopes))
    slope_est = float(np.mean(slopes[-k:]))
    coef, resid = _fit(taus[lo:], logs[lo:])
    a = float(coef[0])
    disagree = abs(slope_est - a) > 0.1 * max(abs(a), 1e-12)
    if disagree:
        notes.append(
            f"pairwise slope estimate {slope_est:.4f} differs from the fitted limit {a:.4f} by more than 10%")
    return ExtractionResult(theorem, a, slopes, slope_est, coef, resid, (taus[lo], taus[-1]), sign,
                            consistent, disagree, taus, logs, truth, notes)


def synthetic_samples(taus, a, b=0.0, c=0.0, sign=1, theorem="T1.1"):
    """Samples of ``sign * tau^b * exp(2 sqrt(tau) a + c)`` (for checks and demos)."""
    taus = np.asarray(taus, dtype=float)
    logs = 2 * np.sqrt(taus) * a + b * np.log(taus) + c
    return [IndicatorSample(float(t), sign, float(l), theorem, "synthetic") for t, l in zip(taus, logs)]


# --------------------------------------------------------------------------- identity checks


@dataclass
class IdentityReport:
    tau: float
    lhs: float
    nd_term: float
    interior_term: float
    remainder_term: float
    rhs: float
    mismatch: float
    remainder_fraction: float

    def to_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def verify_basic_identity(grid: Grid, disc_gamma, disc_background, w_g: TransformedTrace,
                          interior_w, final_u, v: SolvedProbe, p_f: SolvedProbe) -> IdentityReport:
    """Check ``int (g v - w dv) = int (v g - p dv) + int (gamma - I) grad v . grad eps + remainder``.

    ``interior_w`` is the transformed temperature on cells and ``final_u`` the
    last time level; ``eps = w - p``.  The remainder is the final-time term
    weighted by ``w_g.remainder`` (``e^{-tau T}`` for the continuous
    transform, ``(1 - tau dt)^N`` for the scheme transform).
    """
    m = grid.facet_measure
    vf, dv = v.facet_values, v.facet_flux
    lhs = float(np.sum(m * (w_g.g * vf - w_g.w * dv)))
    nd = float(np.sum(m * (vf * w_g.g - p_f.facet_values * dv)))
    eps = interior_w - p_f.cells
    dK = disc_gamma.K - disc_background.K
    inner = float(v.cells @ (dK @ eps))
    rem = float(w_g.remainder * grid.cell_volume * (v.cells @ final_u))
    rhs = nd + inner + rem
    scale = max(abs(lhs), abs(rhs), np.finfo(float).tiny)
    return IdentityReport(float(w_g.tau), lhs, nd, inner, rem, rhs, abs(lhs - rhs) / scale,
                          abs(inner + rem) / max(abs(lhs), np.finfo(float).tiny))


@dataclass
class BoundsReport:
    tau: float
    lower: float
    middle: float
    upper: float
    slack: float
    holds: bool
    energy: float
    discrete_upper: float

    def to_dict(self):
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in self.__dict__.items()}


def verify_two_sided_bounds(v_g: SolvedProbe, p_f: SolvedProbe, cond, scene, grid: Grid, tau, *,
                            fractions=None, g=None, disc_gamma=None, disc_background=None,
                            slack=0.05) -> BoundsReport:
    """``L <= M <= U`` with ``L = int_D (I - gamma^-1) grad v . grad v``,
    ``M = int g (v - p)`` and ``U = int_D (gamma - I) grad v . grad v``.

    Energies use cell-centred gradients weighted by inclusion fractions.
    ``discrete_upper`` is the face-based form ``v^T (K_gamma - K_I) v``, for
    which ``M <= U`` holds exactly.
    """
    from .fv import inclusion_fractions

    if fractions is None:
        fractions = inclusion_fractions(grid, scene)
    gam = cond.tensor
    eye = np.eye(cond.dim)
    lower = gradient_energy(grid, v_g, fractions, eye - np.linalg.inv(gam))
    upper = gradient_energy(grid, v_g, fractions, gam - eye)
    energy = gradient_energy(grid, v_g, fractions)
    gq = v_g.facet_flux if g is None else np.asarray(g, dtype=float)
    middle = float(np.sum(grid.facet_measure * gq * (v_g.facet_values - p_f.facet_values)))
    eps = slack * max(abs(lower), abs(upper))
    holds = bool(lower - eps <= middle <= upper + eps)
    disc_up = float("nan")
    if disc_gamma is not None and disc_background is not None:
        disc_up = float(v_g.cells @ ((disc_gamma.K - disc_background.K) @ v_g.cells))
    return BoundsReport(float(tau), lower, middle, upper, eps, holds, energy, disc_up)
