"""Figures written next to the CSV tables of an ensemble report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .stats import normalized_density  # noqa: E402

params = {
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
    "mathtext.fontset": "cm",
}


def _figure(width=3.4, height=2.6):
    with plt.rc_context(params):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path: Path) -> Path:
    with plt.rc_context(params):
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_distributions(cells, path: Path, title: str = ""):
    """P(n) for a group of cells (one curve per cell)."""
    fig, ax = _figure()
    with plt.rc_context(params):
        for c in cells:
            ax.plot(c.histogram.centers, normalized_density(c.histogram),
                    label=rf"$\gamma={c.gamma:g}$, $L={c.L}$")
        ax.set_xlabel(r"$n$")
        ax.set_ylabel(r"$P(n)$")
        ax.set_xlim(0, 1)
        if title:
            ax.set_title(title)
        ax.legend(ncol=2)
    return _save(fig, path)


def plot_maxima(cells, path: Path, title: str = ""):
    """Positions of the global and secondary maxima against gamma."""
    fig, ax = _figure()
    with plt.rc_context(params):
        for L in sorted({c.L for c in cells}):
            sub = sorted((c for c in cells if c.L == L), key=lambda c: c.gamma)
            g = [c.gamma for c in sub]
            ax.plot(g, [c.maxima.n_plus for c in sub], "o-", ms=3,
                    label=rf"$n^{{\max}}_+$, $L={L}$")
            gm = [c.gamma for c in sub if c.maxima.n_minus is not None]
            nm = [c.maxima.n_minus for c in sub if c.maxima.n_minus is not None]
            ax.plot(gm, nm, "s--", ms=3, label=rf"$n^{{\max}}_-$, $L={L}$")
        ax.set_xlabel(r"$\gamma$")
        ax.set_ylabel(r"$n^{\max}_\pm$")
        ax.set_ylim(0, 1)
        if title:
            ax.set_title(title)
        ax.legend()
    return _save(fig, path)


def plot_ipr_scaling(cells, fits, path: Path):
    """Mean IPR against L on log-log axes, with the fitted power laws."""
    fig, ax = _figure()
    with plt.rc_context(params):
        groups = sorted({(c.unraveling, c.gamma) for c in cells})
        for unr, g in groups:
            sub = sorted((c for c in cells if (c.unraveling, c.gamma) == (unr, g)),
                         key=lambda c: c.L)
            L = np.array([c.L for c in sub], dtype=float)
            y = np.array([c.ipr_mean for c in sub])
            e = np.array([c.ipr_stderr for c in sub])
            line = ax.errorbar(L, y, yerr=e, fmt="o", ms=3, label=f"{unr} $\\gamma={g:g}$")
            fit = fits.get(f"{unr}_g{g!r}")
            if fit is not None:
                ax.plot(L, np.exp(fit.intercept) * L ** (-fit.alpha), "-",
                        color=line[0].get_color(), lw=0.8)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(r"$L$")
        ax.set_ylabel(r"$\overline{\rm IPR}$")
        ax.legend()
    return _save(fig, path)


def render_report(report, out: Path) -> list[Path]:
    out = Path(out)
    written = []
    for unr in sorted({c.unraveling for c in report.cells}):
        cells = [c for c in report.cells if c.unraveling == unr]
        for L in sorted({c.L for c in cells}):
            sub = sorted((c for c in cells if c.L == L), key=lambda c: c.gamma)
            written.append(plot_distributions(sub, out / f"pn_{unr}_L{L}.png", unr.upper()))
        written.append(plot_maxima(cells, out / f"maxima_{unr}.png", unr.upper()))
    if report.power_laws:
        written.append(plot_ipr_scaling(report.cells, report.power_laws, out / "ipr_scaling.png"))
    return written
