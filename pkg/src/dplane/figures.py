"""Matplotlib rendering of the report outputs.

Figures are written next to the delimited outputs of the CLI report
paths: a log-log symbol plot with the candidate constants for the
symbol measurement, and slice comparisons for reconstructions. PNGs are
written without a date stamp so repeated runs are byte-identical.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fields import GridField, central_slice
from .spectral import SymbolReport, relative_l2_error

__all__ = ["render_symbol_figure", "render_reconstruction_figure"]

_SAVE_OPTS = {"dpi": 150, "metadata": {"Date": None}}


def render_symbol_figure(report: SymbolReport, path) -> None:
    """Two-panel symbol plot: measured multiplier and scaled constant."""
    mags = report.freq_table[:, 0]
    measured = report.freq_table[:, 1]
    scaled = report.freq_table[:, 2]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.0, 4.0))
    ax1.loglog(mags, measured, "o", ms=4, label="measured multiplier")
    ax1.loglog(
        mags,
        report.kappa_measured / mags**report.d,
        "-",
        lw=1.2,
        label=rf"fit $\kappa/|\xi|^{{{report.d}}}$, $\kappa$={report.kappa_measured:.4g}",
    )
    ax1.loglog(mags, report.kappa_paper / mags**report.d, "--", lw=1.0, label="volume candidate")
    ax1.loglog(mags, report.kappa_gamma / mags**report.d, ":", lw=1.4, label="gamma-ratio candidate")
    ax1.set_xlabel(r"$|\xi|$")
    ax1.set_ylabel("normal-operator multiplier")
    ax1.set_title(f"d={report.d}, n={report.n}, exponent {report.exponent:.4f}")
    ax1.legend(fontsize=8)

    ax2.semilogx(mags, scaled, "o", ms=4, label=r"$|\xi|^d \times$ multiplier")
    ax2.axhline(report.kappa_measured, color="C1", lw=1.2, label="measured")
    ax2.axhline(report.kappa_paper, color="C2", ls="--", lw=1.0, label="volume candidate")
    ax2.axhline(report.kappa_gamma, color="C3", ls=":", lw=1.4, label="gamma-ratio candidate")
    ax2.set_xlabel(r"$|\xi|$")
    ax2.set_ylabel(r"$\kappa$ estimate")
    ax2.set_title(rf"$\kappa$ = {report.kappa_measured:.5g} $\pm$ {report.kappa_std_error:.2g}")
    ax2.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def render_reconstruction_figure(truth: GridField, recon: GridField, path) -> None:
    """Truth / reconstruction / difference slices with the error in the title."""
    t = central_slice(truth)
    r = central_slice(recon)
    t = t - t.mean()
    r = r - r.mean()
    err = relative_l2_error(recon, truth)

    fig, axes = plt.subplots(1, 3, figsize=(11.0, 3.6))
    vmax = float(np.abs(t).max())
    for ax, (img, title) in zip(
        axes,
        [(t, "phantom (mean-subtracted)"), (r, "reconstruction"), (r - t, "difference")],
    ):
        im = ax.imshow(img.T, origin="lower", cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        ax.set_title(title, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.suptitle(f"relative L2 error (mean-subtracted) = {err:.4f}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
