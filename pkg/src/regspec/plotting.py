"""Figures for experiment reports.

matplotlib is optional: it is imported on first use with the Agg backend,
and nothing else in the package depends on it.
"""

from __future__ import annotations

import numpy as np

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "regspec",
}


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("figures need matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _spectrum_panels(axes, fig):
    ref = fig.get("reference")
    ax = axes[0]
    ax.hist(fig["eigenvalues"], bins=60, density=True, color="0.75", label="eigenvalues")
    if ref:
        ax.plot(ref["grid"], ref["density"], "k-", lw=1, label=ref["name"])
    ax.set_xlabel(r"$\lambda$")
    ax.legend(frameon=False)
    ax = axes[1]
    ax.step(fig["vertex_atoms"], fig["vertex_cdf"], where="post", lw=0.8, label=f"vertex {fig['vertex']}")
    if ref:
        grid = np.asarray(ref["grid"])
        dens = np.asarray(ref["density"])
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        ax.plot(grid, cdf, "k-", lw=1, label="reference")
    ax.set_xlabel(r"$t$")
    ax.set_ylabel("CDF")
    ax.legend(frameon=False)
    _distance_panel(axes[2], fig)


def _distance_panel(ax, fig):
    rstar = np.asarray(fig["rstar"])
    dist = np.asarray(fig["distances"])
    ax.plot(rstar + np.linspace(-0.2, 0.2, rstar.size), dist, ".", ms=2, alpha=0.5)
    ax.set_xlabel(r"$R^*(x)$")
    ax.set_ylabel("Kolmogorov distance")


def render_report(report, path) -> None:
    """Write a figure summarizing ``report`` to ``path`` (format from the suffix)."""
    plt = _pyplot()
    fig_data = report.figure_data
    with plt.rc_context(RC):
        if report.experiment in ("adj", "grow") and fig_data:
            fig, axes = plt.subplots(1, 3, figsize=(9, 2.8))
            _spectrum_panels(axes, fig_data)
        elif report.experiment == "esd" and fig_data:
            fig, ax = plt.subplots(figsize=(4, 2.8))
            _distance_panel(ax, fig_data)
        elif report.experiment == "cycles":
            fig, ax = plt.subplots(figsize=(4, 2.8))
            ks = fig_data["ks"]
            ax.semilogy(ks, fig_data["means"], "o", label="mean count")
            ax.semilogy(ks, fig_data["bounds"], "k-", lw=1, label="bound")
            ax.semilogy(ks, fig_data["poisson"], "k:", lw=1, label=r"$(d-1)^k/2k$")
            ax.set_xlabel("k")
            ax.legend(frameon=False)
        elif report.experiment == "deloc":
            fig, ax = plt.subplots(figsize=(4, 2.8))
            ratio = np.asarray(report.metrics["ball_mass"]) / np.asarray(report.metrics["bound"])
            ax.hist(ratio, bins=30, color="0.6")
            ax.axvline(1.0, color="k", lw=1)
            ax.set_xlabel("ball mass / bound")
        else:
            fig, ax = plt.subplots(figsize=(4, 2.8))
            g1 = fig_data.get("green1")
            if g1:
                ax.plot(g1["energies"], g1["deviation"], "o-", ms=3)
                ax.axhline(report.config["eps"], color="k", lw=1)
                ax.set_xlabel("E")
                ax.set_ylabel(r"mean $|\mathrm{Im}\,\Gamma_n - \mathrm{Im}\,\Gamma|$")
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
        plt.close(fig)


def render_values(values, path, xlabel: str = r"$\lambda$", density=None) -> None:
    """Histogram of values, with an optional ``(grid, density)`` overlay."""
    plt = _pyplot()
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4, 2.8))
        ax.hist(values, bins=60, density=True, color="0.75")
        if density is not None:
            ax.plot(density[0], density[1], "k-", lw=1)
        ax.set_xlabel(xlabel)
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
        plt.close(fig)
