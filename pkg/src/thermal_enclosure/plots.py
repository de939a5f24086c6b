"""Matplotlib figures for the CLI reports (PNG files, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {"figure.dpi": 110, "axes.grid": True, "grid.alpha": 0.3, "font.size": 9}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_indicator(result, path, title=None):
    """``log|I|`` against ``2 sqrt(tau)`` with the fitted model and the pairwise slopes."""
    with plt.rc_context(_STYLE):
        fig, (ax, bx) = plt.subplots(1, 2, figsize=(9, 3.6))
        x = 2 * np.sqrt(result.taus)
        ax.plot(x, result.log_abs, "o", ms=4, label="log|I|")
        a, b, c = result.fit
        lo, hi = result.fit_window
        xs = np.linspace(2 * np.sqrt(lo), 2 * np.sqrt(hi), 100)
        ax.plot(xs, a * xs + b * np.log((xs / 2) ** 2) + c, "-", lw=1.2,
                label=f"fit, slope {a:+.4f}")
        ax.set_xlabel(r"$2\sqrt{\tau}$")
        ax.set_ylabel(r"$\log|I(\tau)|$")
        ax.legend(loc="best", fontsize=8)
        mid = np.sqrt(result.taus[1:] * result.taus[:-1])
        bx.plot(mid, result.slopes, "s-", ms=3, label="pairwise slopes")
        bx.axhline(a, color="C1", lw=1, label="fitted limit")
        if result.truth is not None:
            sign = 1.0 if result.quantity == result.limit else -1.0
            bx.axhline(sign * result.truth, color="k", ls="--", lw=1, label="truth")
        bx.set_xscale("log")
        bx.set_xlabel(r"$\tau$")
        bx.set_ylabel("slope")
        bx.legend(loc="best", fontsize=8)
        if title:
            fig.suptitle(title, fontsize=10)
        return _save(fig, path)


def plot_support(omegas, estimates, truths, center, radius, path):
    """Polar comparison of extracted and exact support functions (2D)."""
    with plt.rc_context(_STYLE):
        fig = plt.figure(figsize=(4.2, 4.2))
        ax = fig.add_subplot(projection="polar")
        ang = np.arctan2(omegas[:, 1], omegas[:, 0])
        order = np.argsort(ang)
        th = np.linspace(-np.pi, np.pi, 361)
        fitted = center[0] * np.cos(th) + center[1] * np.sin(th) + radius
        ax.plot(th, fitted, "-", lw=1, label="least-squares ball")
        ax.plot(ang[order], np.asarray(truths)[order], "k+", ms=8, label="exact")
        ax.plot(ang[order], np.asarray(estimates)[order], "o", ms=4, label="extracted")
        ax.legend(loc="lower left", fontsize=7, bbox_to_anchor=(-0.1, -0.15))
        ax.set_title("support function", fontsize=9)
        return _save(fig, path)


def plot_trace(trace, path, facets=None):
    """Boundary temperature against time at a few facets."""
    grid = trace.grid
    if facets is None:
        facets = np.linspace(0, grid.n_facets - 1, 4).astype(int)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.4))
        scale = float(np.exp(trace.log_scale))
        for f in facets:
            c = grid.facet_center[f]
            ax.plot(grid.times, trace.u[f] * scale, lw=1.2, label="(" + ", ".join(f"{v:.2f}" for v in c) + ")")
        ax.set_xlabel("t")
        ax.set_ylabel("boundary temperature")
        ax.legend(fontsize=7, title="facet", title_fontsize=7)
        return _save(fig, path)


def plot_bounds(reports, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.4))
        t = np.array([r.tau for r in reports])
        e = np.array([abs(r.energy) for r in reports])
        for key, lab in (("lower", "L"), ("middle", "M"), ("upper", "U")):
            ax.plot(t, [getattr(r, key) / s for r, s in zip(reports, e)], "o-", ms=3, label=lab)
        ax.set_xscale("log")
        ax.set_xlabel(r"$\tau$")
        ax.set_ylabel(r"value / $\int_D|\nabla v|^2$")
        ax.legend(fontsize=8)
        return _save(fig, path)


def plot_checks(checks, path):
    """Scaled sequences of the asymptotic checks, normalized by their medians."""
    seqs = [c for c in checks if c.verdict != "slope-match"]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.4, 3.6))
        for c in seqs:
            v = np.asarray(c.values, float)
            ax.plot(c.taus, v / np.median(v), "o-", ms=3, label=f"{c.name} ({'pass' if c.passed else 'fail'})")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(r"$\tau$")
        ax.set_ylabel("scaled / median")
        ax.legend(fontsize=6)
        return _save(fig, path)


def plot_layer(density, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        s = density.param if density.dim == 2 else np.arange(len(density.psi))
        ax.plot(s, density.psi, lw=1.2)
        ax.set_xlabel("arclength" if density.dim == 2 else "node")
        ax.set_ylabel(r"$\psi$")
        ax.set_title(f"layer density, tau = {density.tau:g}", fontsize=9)
        return _save(fig, path)
