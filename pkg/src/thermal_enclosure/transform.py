"""Time-Laplace reduction of boundary traces.

Two quadratures are offered:

* ``"trapezoid"``: trapezoidal rule for ``int_0^T e^{-tau t} (.) dt`` on the
  trace's own time grid.
* ``"scheme"``: the weights ``dt (1 - tau dt)^(k-1)`` matched to backward
  Euler.  The transformed data then satisfy the discrete modified Helmholtz
  problem exactly, which the indicator needs because its signal is many
  orders of magnitude below the individual boundary terms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .forward_heat import BoundaryTrace, scheme_weights


class ResolutionWarning(UserWarning):
    pass


@dataclass
class TransformedTrace:
    tau: float
    w: np.ndarray
    g: np.ndarray
    log_scale: float = 0.0
    method: str = "scheme"
    remainder: float = 0.0  # weight multiplying the final-time state


def laplace_time(trace: BoundaryTrace, tau: float, method: str = "trapezoid") -> TransformedTrace:
    """Transform both the temperature and the flux rows of ``trace``."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    grid = trace.grid
    dt = grid.dt
    if method == "trapezoid":
        wts = np.exp(-tau * grid.times) * dt
        wts[0] *= 0.5
        wts[-1] *= 0.5
        rem = math.exp(-tau * grid.T)
        return TransformedTrace(tau, trace.u @ wts, trace.f @ wts, trace.log_scale, method, rem)
    if method == "scheme":
        wts = np.concatenate([[0.0], dt * scheme_weights(tau, grid.n_t, dt)])
        rem = (1.0 - tau * dt) ** grid.n_t
        return TransformedTrace(tau, trace.u @ wts, trace.f @ wts, trace.log_scale, method, rem)
    raise ValueError(f"unknown transform method {method!r}")


@dataclass
class GuardStatus:
    ok: bool
    space: float
    time: float
    messages: tuple

    @property
    def label(self):
        return "ok" if self.ok else "warning"


def resolution_guard(tau: float, grid=None, *, h=None, dt=None, warn=False, method="trapezoid") -> GuardStatus:
    """Flag ``sqrt(tau) h > 0.5`` or an under-resolved time transform.

    For the trapezoid transform the time limit is ``tau dt > 0.5``.  The
    scheme weights ``dt (1 - tau dt)^(k-1)`` are exact for the discrete
    solution, so there the limit is their positivity, ``tau dt >= 1``.
    """
    if method not in ("trapezoid", "scheme"):
        raise ValueError(f"unknown transform method {method!r}")
    if grid is not None:
        h = grid.spacing if h is None else h
        dt = grid.dt if dt is None else dt
    space = math.sqrt(tau) * h if h is not None else 0.0
    time = tau * dt if dt is not None else 0.0
    msgs = []
    if space > 0.5:
        msgs.append(f"sqrt(tau)*h = {space:.3g} > 0.5: boundary layer under-resolved")
    if method == "trapezoid" and time > 0.5:
        msgs.append(f"tau*dt = {time:.3g} > 0.5: time weights under-resolved")
    elif method == "scheme" and time >= 1.0:
        msgs.append(f"tau*dt = {time:.3g} >= 1: scheme weights lose positivity")
    status = GuardStatus(not msgs, space, time, tuple(msgs))
    if warn and msgs:
        warnings.warn("; ".join(msgs), ResolutionWarning, stacklevel=2)
    return status


def tau_sweep(tau_min=10.0, ratio=1.3, count=12):
    """Geometric sweep ``tau_min * ratio**j``, j = 0..count-1."""
    return tau_min * ratio ** np.arange(count)
