"""Matplotlib rendering of CLI outputs to PNG files.

Every function takes plain arrays plus an output path, renders a single
self-contained panel, and returns the path, so the CLI can add each file
to its run manifest.  The Agg backend is forced; nothing here opens a
window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

_DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_rabi(path, curves_by_temperature, ylabel="ZPL intensity"):
    """One panel of pulse-area scans, one curve per temperature.

    curves_by_temperature maps temperature (K) to (areas, intensities).
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for temp in sorted(curves_by_temperature):
        areas, intensity = curves_by_temperature[temp]
        ax.plot(np.asarray(areas) / np.pi, intensity, label=f"{temp:g} K")
    ax.set_xlabel("pulse area (pi)")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    return _save(fig, path)


def render_trajectory(path, times, rho_xx, re_rho_x0, im_rho_x0):
    """Excited-state population and coherence of one pulse integration."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(times, rho_xx, label="rho_XX")
    ax.plot(times, re_rho_x0, label="Re rho_X0")
    ax.plot(times, im_rho_x0, label="Im rho_X0")
    ax.set_xlabel("time (ps)")
    ax.set_ylabel("density-matrix element")
    ax.legend(frameon=False)
    return _save(fig, path)


def render_indistinguishability(path, axis_label, axis_values, series):
    """Indistinguishability against one sweep axis.

    series maps a legend label to (values, linestyle); values align with
    axis_values.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, (values, style) in series.items():
        ax.plot(axis_values, values, style, label=label)
    ax.set_xlabel(axis_label)
    ax.set_ylabel("indistinguishability")
    ax.set_ylim(0.0, 1.05)
    ax.legend(frameon=False)
    return _save(fig, path)


def render_histogram(path, bin_centers, counts, model=None):
    """Coincidence histogram as a step plot, optionally with the fitted
    model curve overlaid."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.step(bin_centers, counts, where="mid", lw=0.8, label="counts")
    if model is not None:
        ax.plot(bin_centers, model, "r-", lw=1.2, label="fit")
        ax.legend(frameon=False)
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("coincidences")
    return _save(fig, path)


def render_kernels(path, tau, re_phi, im_phi):
    """Real and imaginary parts of the phonon propagator phase phi(tau)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(tau, re_phi, label="Re phi")
    ax.plot(tau, im_phi, label="Im phi")
    ax.set_xlabel("tau (ps)")
    ax.set_ylabel("phi(tau)")
    ax.legend(frameon=False)
    return _save(fig, path)
