"""Static SVG figures.

Figures are written as SVG with a fixed hash salt, text as paths and no
date stamp, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .formats import atomic_write  # noqa: E402
from .resonator import notch_s21  # noqa: E402

_RC = {"svg.hashsalt": "squidres", "svg.fonttype": "path", "figure.figsize": (6.0, 4.0),
       "axes.grid": True, "grid.alpha": 0.3}


def _save(fig, path):
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def plot_tuning(path, curve, overlay=None) -> None:
    """Resonance frequency against applied flux with jump markers and an optional model."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        x, f = curve.applied_flux, curve.resonant_frequency
        for d, style in ((1, "-"), (-1, "--")):
            m = curve.direction == d
            if np.any(m):
                ax.plot(x[m], f[m] * 1e-9, style, lw=1.2,
                        label="up" if d == 1 else "down")
        if overlay is not None:
            ax.plot(x, np.asarray(overlay) * 1e-9, ".", ms=1.5, color="k", label="model")
        for xj in curve.jump_locations:
            ax.axvline(xj, color="tab:red", lw=0.8, ls=":")
        ax.set_xlabel(r"$\Phi_{ext}$ ($\Phi_0$)")
        ax.set_ylabel("$f_0$ (GHz)")
        ax.ticklabel_format(axis="y", useOffset=False)
        if len(x):
            ax.legend(loc="best")
        fig.tight_layout()
        _save(fig, path)


def plot_resonance_fit(path, sweep, fit) -> None:
    """|S21| in dB and the complex plane, data with the fitted model."""
    model = notch_s21(sweep.frequency, fit.f0, fit.ql, fit.qc, fit.mismatch_angle,
                      fit.amplitude, fit.phase_offset, fit.cable_delay)
    with matplotlib.rc_context(_RC):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
        df = (sweep.frequency - fit.f0) * 1e-3
        a1.plot(df, 20 * np.log10(np.abs(sweep.s21)), ".", ms=2, label="data")
        a1.plot(df, 20 * np.log10(np.abs(model)), "-", lw=1.2, label="fit")
        a1.set_xlabel(r"$f - f_0$ (kHz)")
        a1.set_ylabel(r"$|S_{21}|$ (dB)")
        a1.legend(loc="best")
        a2.plot(sweep.s21.real, sweep.s21.imag, ".", ms=2)
        a2.plot(model.real, model.imag, "-", lw=1.2)
        a2.set_aspect("equal", adjustable="datalim")
        a2.set_xlabel("Re $S_{21}$")
        a2.set_ylabel("Im $S_{21}$")
        a1.set_title(f"$f_0$ = {fit.f0 * 1e-9:.6f} GHz, $Q_i$ = {fit.qi:.3g}", fontsize=9)
        fig.tight_layout()
        _save(fig, path)


def plot_spectra(path, spectra: dict, label: str = "") -> None:
    """Log-log phase-noise spectra, one trace per key."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        for key, spec in spectra.items():
            m = spec.frequency > 0
            ax.loglog(spec.frequency[m], spec.psd[m], lw=0.8, label=f"{label}{key}")
        ax.set_xlabel("frequency (Hz)")
        ax.set_ylabel(r"$S_\theta$ (rad$^2$/Hz)")
        if 0 < len(spectra) <= 8:
            ax.legend(loc="best", fontsize=7)
        fig.tight_layout()
        _save(fig, path)


def plot_scaling(path, points, xlabel: str, logx: bool = False) -> None:
    """S_theta at the evaluation frequency against power or flux."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        x = [p[0] for p in points]
        y = [p[1] for p in points]
        ax.semilogy(x, y, "o-", ms=4)
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(r"$S_\theta$ at eval. frequency (rad$^2$/Hz)")
        fig.tight_layout()
        _save(fig, path)
