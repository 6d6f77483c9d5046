"""Figures written next to the command CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "savefig.bbox": "tight",
    "image.cmap": "viridis",
    # hashing salt must be fixed for byte-identical svg/pdf ids; png has none
    "svg.hashsalt": "qcgl",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no Software/creation tags so that reruns are byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def line_plot(path, x, ys: dict, xlabel="", ylabel="", title="", logx=False, logy=False):
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for label, y in ys.items():
            ax.plot(x, y, label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(ys) > 1:
            ax.legend(frameon=False)
        return _save(fig, path)


def scatter_fit(path, t, y, fit=None, xlabel="t", ylabel="", title="", kind="power"):
    """Log-scaled data with the fitted power law or exponential overlaid."""
    t, y = np.asarray(t, float), np.asarray(y, float)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ok = np.isfinite(y) & (y > 0)
        ax.plot(t[ok], y[ok], "o", ms=3, label="measured")
        if fit is not None and np.isfinite(fit.exponent) and fit.amplitude > 0:
            tt = t[(t >= fit.window[0]) & (t <= fit.window[1])]
            yy = fit.amplitude * (tt**fit.exponent if kind == "power" else np.exp(fit.exponent * tt))
            ax.plot(tt, yy, "-", label=f"fit, exponent {fit.exponent:.3f}")
            ax.legend(frameon=False)
        ax.set_yscale("log")
        if kind == "power":
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def heatmap(path, x, t, z, xlabel="x", ylabel="t", title="", cmap=None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        m = ax.pcolormesh(x, t, z, shading="auto", cmap=cmap, rasterized=True)
        fig.colorbar(m, ax=ax)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def spectrum_plot(path, eigenvalues, curves=None, title=""):
    ev = np.asarray(eigenvalues, complex)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for label, lam in (curves or {}).items():
            lam = np.asarray(lam, complex)
            ax.plot(lam.real, lam.imag, "-", label=label)
        ax.plot(ev.real, ev.imag, "x", color="k", label="point spectrum")
        ax.axvline(0.0, color="0.5", lw=0.8)
        ax.set_xlabel("Re lambda")
        ax.set_ylabel("Im lambda")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)
