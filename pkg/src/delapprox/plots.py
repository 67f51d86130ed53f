"""Figure rendering for the report paths.

Each experiment gets one PNG summarizing its records and fit; the
delimited outputs stay the primary artifact and the figures are
rendered next to them.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.stats import norm  # noqa: E402

__all__ = ["render_figure"]


def _volume_axis(ax, aggregates, target_volume=None):
    ts = sorted(aggregates["per_t"])
    means = [aggregates["per_t"][t]["mean_volume"] for t in ts]
    errs = [2.0 * aggregates["per_t"][t]["stderr"] for t in ts]
    ax.errorbar(ts, means, yerr=errs, fmt="o-", capsize=3, label="mean ± 2 se")
    if target_volume is not None:
        ax.axhline(target_volume, color="crimson", lw=1, ls="--", label="target volume")
    ax.set_xscale("log")
    ax.set_xlabel("intensity t")
    ax.set_ylabel("volume estimate")
    ax.legend()


def _plot_unbiasedness(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    _volume_axis(ax, report.aggregates, report.aggregates.get("target_volume"))
    ax.set_title("volume unbiasedness")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_variance(report, path):
    agg = report.aggregates
    ts = sorted(agg["per_t_variance"])
    var = [agg["per_t_variance"][t] for t in ts]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ts, var, "o", label="sample variance")
    grid = np.geomspace(min(ts), max(ts), 64)
    fit = np.exp(agg["intercept"]) * grid ** agg["slope"]
    lo, hi = agg["ci"]
    ax.loglog(grid, fit, "-", label=f"slope {agg['slope']:.3f} [{lo:.2f}, {hi:.2f}]")
    ax.set_xlabel("intensity t")
    ax.set_ylabel("var(volume estimate)")
    ax.set_title("variance decay")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_clt(report, path):
    by_t = {}
    for r in report.records:
        by_t.setdefault(r.t, []).append(r.volume)
    t_star = max(by_t)
    v = np.asarray(by_t[t_star])
    z = (v - v.mean()) / v.std(ddof=1)
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax.hist(z, bins=40, density=True, alpha=0.7, label=f"standardized, t={t_star:g}")
    grid = np.linspace(-4, 4, 200)
    ax.plot(grid, norm.pdf(grid), "k-", lw=1, label="standard normal")
    dk = report.aggregates["per_t"][t_star]["ks_distance"]
    ax.set_title(f"Kolmogorov distance {dk:.4f}")
    ax.legend()
    ts = sorted(report.aggregates["per_t"])
    ax2.plot(ts, [report.aggregates["per_t"][t]["ks_distance"] for t in ts], "o-")
    ax2.set_xscale("log")
    ax2.set_xlabel("intensity t")
    ax2.set_ylabel("Kolmogorov distance")
    ax2.set_title("normal-limit trend")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_symdiff(report, path):
    agg = report.aggregates
    ts = sorted(agg["per_t"])
    y = [agg["per_t"][t]["scaled_ratio"] for t in ts]
    e = [2.0 * agg["per_t"][t]["scaled_ratio_stderr"] for t in ts]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ts, y, yerr=e, fmt="o", capsize=3, label="t^(1/d) mean symdiff / Per")
    ax.axhline(
        agg["fitted_limit"],
        color="teal",
        ls="-",
        lw=1,
        label=f"fitted limit {agg['fitted_limit']:.4f}",
    )
    ref = agg.get("c_d_reference")
    if ref:
        ax.axhspan(
            ref["value"] - 2 * ref["stderr"],
            ref["value"] + 2 * ref["stderr"],
            color="orange",
            alpha=0.25,
            label="c_d reference ± 2 se",
        )
    ax.set_xscale("log")
    ax.set_xlabel("intensity t")
    ax.set_ylabel("scaled symmetric difference")
    ax.set_title("symmetric-difference scaling")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_rx(report, path):
    table = report.aggregates["table"]
    t_star = max(row["t"] for row in table)
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in sorted({row["k"] for row in table}):
        rows = [r for r in table if r["t"] == t_star and r["k"] == k]
        rows.sort(key=lambda r: r["s"])
        s = [r["s"] for r in rows]
        ax.errorbar(
            s,
            [r["empirical"] for r in rows],
            yerr=[2 * r["stderr"] for r in rows],
            fmt="o-",
            capsize=3,
            label=f"empirical k={k}",
        )
        ax.plot(s, [r["bound"] for r in rows], "--", label=f"bound k={k}")
    ax.set_yscale("log")
    ax.set_xlabel("threshold s")
    ax.set_ylabel("E r^k 1(r >= s)")
    ax.set_title(f"circumradius tail vs bound, t={t_star:g}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


_RENDERERS = {
    "unbiasedness": _plot_unbiasedness,
    "estimate": _plot_unbiasedness,
    "variance": _plot_variance,
    "clt": _plot_clt,
    "symdiff": _plot_symdiff,
    "rx-tail": _plot_rx,
}


def render_figure(name: str, report, path) -> None:
    """Render the experiment's summary figure as a PNG."""
    _RENDERERS[name](report, path)
