"""Piecewise-constant conductivity fields and admissible heat-flux specifications."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

CONTRAST_CLASSES = ("A1", "A2", "indefinite")


@dataclass(frozen=True, eq=False)
class ConductivitySpec:
    """Identity background with a constant SPD tensor on the inclusion.

    ``contrast_class`` is checked against the eigenvalues of ``tensor - I``:
    A1 needs them all negative, A2 all positive.
    """

    tensor: np.ndarray
    contrast_class: str = "indefinite"

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.tensor, dtype=float))
        if t.shape[0] != t.shape[1] or t.shape[0] not in (2, 3):
            raise ConfigurationError(f"conductivity tensor must be 2x2 or 3x3, got {t.shape}")
        if not np.allclose(t, t.T, rtol=0, atol=1e-12):
            raise ConfigurationError("conductivity tensor must be symmetric")
        eig = np.linalg.eigvalsh(t)
        if eig.min() <= 0:
            raise ConfigurationError(f"conductivity tensor must be positive definite, eigenvalues {eig}")
        cls = self.contrast_class
        if cls not in CONTRAST_CLASSES:
            raise ConfigurationError(f"contrast class must be one of {CONTRAST_CLASSES}, got {cls!r}")
        jump = np.linalg.eigvalsh(t - np.eye(t.shape[0]))
        if cls == "A1" and not jump.max() < 0:
            raise ConfigurationError(f"A1 requires tensor - I negative definite, eigenvalues {jump}")
        if cls == "A2" and not jump.min() > 0:
            raise ConfigurationError(f"A2 requires tensor - I positive definite, eigenvalues {jump}")
        object.__setattr__(self, "tensor", t)

    @classmethod
    def scalar(cls, value, dim=2, contrast_class=None):
        if contrast_class is None:
            contrast_class = "A2" if value > 1 else "A1" if value < 1 else "indefinite"
        return cls(value * np.eye(dim), contrast_class)

    @classmethod
    def identity(cls, dim=2):
        return cls(np.eye(dim), "indefinite")

    @property
    def dim(self) -> int:
        return self.tensor.shape[0]

    @property
    def jump(self) -> np.ndarray:
        return self.tensor - np.eye(self.dim)

    @property
    def is_background(self) -> bool:
        return bool(np.all(self.jump == 0.0))

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.tensor == np.diag(np.diag(self.tensor))))


def blend_tensor(spec: ConductivitySpec, fraction):
    """Cell tensors ``I + fraction * (tensor - I)`` for an array of fractions."""
    fraction = np.asarray(fraction, dtype=float)
    return np.eye(spec.dim) + fraction[..., None, None] * spec.jump


def sample_conductivity(spec: ConductivitySpec, scene, x, fraction=None):
    """Conductivity tensor at ``x``; ``fraction`` overrides the point test for cut cells."""
    if fraction is None:
        fraction = 1.0 if bool(scene.inclusion.contains(np.asarray(x, dtype=float))) else 0.0
    return blend_tensor(spec, fraction)


# --------------------------------------------------------------------------- fluxes

FLUX_VARIANTS = ("constant", "time_power", "probe_flux", "sign_flip")
PHI_VARIANTS = {"one": 1, "ramp": 2}


@dataclass(frozen=True)
class FluxSpec:
    """Boundary heat flux ``f(x, t)``.

    ``constant``: ``f = a``.  ``time_power``: ``f = t**k``.  ``probe_flux``:
    ``f = dv/dnu(x; tau) * phi(t)`` with ``phi`` = ``one`` (1) or ``ramp`` (t).
    ``sign_flip``: ``a`` on the first half of the horizon, ``-a`` afterwards.
    ``mu`` is the exponent declared for the admissibility condition.
    """

    variant: str
    a: float = 1.0
    k: int = 0
    phi: str = "one"
    mu: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if self.variant not in FLUX_VARIANTS:
            raise ConfigurationError(f"unknown flux variant {self.variant!r}")
        if self.variant in ("constant", "sign_flip") and self.a == 0:
            raise ConfigurationError("constant flux amplitude must be nonzero")
        if self.variant == "time_power" and (int(self.k) != self.k or self.k < 0):
            raise ConfigurationError(f"time_power exponent must be a nonnegative integer, got {self.k}")
        if self.phi not in PHI_VARIANTS:
            raise ConfigurationError(f"phi must be one of {sorted(PHI_VARIANTS)}, got {self.phi!r}")

    @classmethod
    def constant(cls, a=1.0, mu=1.0):
        return cls("constant", a=a, mu=mu)

    @classmethod
    def time_power(cls, k, mu=None):
        return cls("time_power", k=int(k), mu=float(k + 1) if mu is None else mu)

    @classmethod
    def probe_flux(cls, phi="one", mu=None):
        return cls("probe_flux", phi=phi, mu=float(PHI_VARIANTS[phi]) if mu is None else mu)

    @classmethod
    def sign_flip(cls, a=1.0, T=1.0):
        return cls("sign_flip", a=a, mu=1.0, T=T)

    def time_factor(self, t):
        """Time dependence of the flux (the spatial factor is handled separately)."""
        t = np.asarray(t, dtype=float)
        if self.variant == "constant":
            return np.full_like(t, self.a)
        if self.variant == "time_power":
            return t**self.k
        if self.variant == "sign_flip":
            return np.where(t < 0.5 * self.T, self.a, -self.a)
        return np.ones_like(t) if self.phi == "one" else t.copy()

    def laplace_time_factor(self, tau, T):
        """Closed form of ``int_0^T exp(-tau t) * time_factor(t) dt``."""
        if self.variant == "constant":
            return self.a * -math.expm1(-tau * T) / tau
        if self.variant == "sign_flip":
            half = 0.5 * T
            return self.a * (-math.expm1(-tau * half) - (math.exp(-tau * half) - math.exp(-tau * T))) / tau
        k = self.k if self.variant == "time_power" else PHI_VARIANTS[self.phi] - 1
        # int_0^T t^k e^{-tau t} dt = k!/tau^{k+1} * P(k+1, tau T)
        from scipy.special import gammainc

        return math.factorial(k) / tau ** (k + 1) * float(gammainc(k + 1, tau * T))


def flux_value(spec: FluxSpec, x, t, tau=None, probe=None, normal=None):
    """Evaluate ``f`` at boundary point(s) ``x`` and time ``t``.

    For ``probe_flux`` the spatial factor is ``grad v(x; tau) . normal`` in
    the probe's true (unscaled) magnitude.
    """
    if spec.variant != "probe_flux":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.broadcast_to(spec.time_factor(t), (len(x),)).astype(float)
        return float(out[0]) if out.size == 1 else out
    if probe is None:
        raise ConfigurationError("probe_flux evaluation needs a probe field")
    if tau is not None and not math.isclose(float(tau), probe.tau, rel_tol=1e-12):
        raise ConfigurationError(f"probe tau {probe.tau} does not match requested tau {tau}")
    if normal is None:
        raise ConfigurationError("probe_flux evaluation needs the outward normal")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    normal = np.atleast_2d(np.asarray(normal, dtype=float))
    dn = np.sum(probe.gradient(x) * normal, axis=1) * math.exp(probe.log_scale)
    out = dn * spec.time_factor(t)
    return float(out[0]) if out.size == 1 else out


@dataclass
class AdmissibilityReport:
    tau: np.ndarray
    scaled_min: np.ndarray
    scaled_max: np.ndarray
    lower: float
    upper: float
    admissible: bool
    message: str


def verify_flux_admissibility(spec: FluxSpec, tau_grid, T=1.0, x_samples=None, spatial=None,
                              bounds=(0.05, 20.0)) -> AdmissibilityReport:
    """Check ``0 < tau^mu int_0^T e^{-tau t} f dt < inf`` along an increasing tau grid.

    ``spatial`` optionally gives the spatial factor of the flux at
    ``x_samples`` (one value per sample; defaults to 1).  Returns a report;
    a failure is a finding, not an exception.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid.size < 4 or np.any(np.diff(tau_grid) <= 0):
        raise ConfigurationError("tau grid must be increasing with at least 4 entries")
    sp = np.ones(1) if spatial is None else np.atleast_1d(np.asarray(spatial, dtype=float))
    mins, maxs = [], []
    for tau in tau_grid:
        vals = tau**spec.mu * spec.laplace_time_factor(tau, T) * sp
        mins.append(vals.min())
        maxs.append(vals.max())
    mins, maxs = np.array(mins), np.array(maxs)
    lo, hi = bounds
    ok_low = bool(np.all(mins >= lo))
    ok_high = bool(np.all(maxs <= hi))
    if ok_low and ok_high:
        msg = "admissible"
    elif not ok_low:
        msg = f"lower bound violated: min scaled value {mins.min():.3g} < {lo}"
    else:
        msg = f"upper bound violated: max scaled value {maxs.max():.3g} > {hi}"
    return AdmissibilityReport(tau_grid, mins, maxs, lo, hi, ok_low and ok_high, msg)
