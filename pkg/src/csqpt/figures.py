"""Headless matplotlib renderers for the analysis reports.

Each function writes one PNG next to the corresponding CSV.  Rendering is
deliberately plain: these are diagnostic figures, not publication graphics.
"""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .analysis import CountRateFit, WignerReport  # noqa: E402


def render_diagonals(diag: np.ndarray, path, title: str = "") -> None:
    """Grouped bars of E^{mm}_{kk}: one group per input m, one bar per k."""
    d_in, d_out = diag.shape
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / d_out
    for k in range(d_out):
        ax.bar(np.arange(d_in) + (k - d_out / 2 + 0.5) * width, diag[:, k],
               width=width, label=f"k={k}")
    ax.set_xlabel("input photon number m")
    ax.set_ylabel(r"$E^{mm}_{kk}$")
    ax.set_xticks(np.arange(d_in))
    ax.legend(fontsize=7, ncol=2)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_fidelity_curve(ns, fidelities, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ns, fidelities, "o-")
    ax.set_xlabel("subspace size n")
    ax.set_ylabel("worst-case fidelity")
    ax.set_ylim(min(0.8, min(fidelities) - 0.05), 1.005)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_rate_fit(fit: CountRateFit, path, title: str = "") -> None:
    """Observed click fractions with the fitted rate law."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(fit.alphas, fit.fractions, "o", label="observed")
    grid = np.linspace(0.0, float(fit.alphas.max()) * 1.05, 200)
    ax.plot(grid, fit.model(grid), "-", label="fit")
    ax.set_xlabel("probe amplitude")
    ax.set_ylabel("click fraction")
    ax.legend()
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_wigner(report: WignerReport, paths) -> None:
    """One heat map per report entry; ``paths`` aligns with the entries.

    Skipped entries (no field) get no file; pass None in their slot.
    """
    for entry, path in zip(report.entries, paths):
        if entry.field is None or path is None:
            continue
        fig, ax = plt.subplots(figsize=(5, 4.2))
        lim = float(np.abs(entry.field).max())
        im = ax.pcolormesh(report.xs, report.ps, entry.field, cmap="RdBu_r",
                           vmin=-lim, vmax=lim, shading="auto")
        ax.plot([entry.min_x], [entry.min_p], "k+", markersize=8)
        ax.set_xlabel("x")
        ax.set_ylabel("p")
        ax.set_title(f"alpha = {entry.alpha:g}, "
                     f"min W = {entry.min_value:.4f}")
        fig.colorbar(im, ax=ax)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
