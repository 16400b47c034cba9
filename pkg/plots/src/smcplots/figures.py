"""Figure rendering: deterministic batch outputs, no timestamps.

Two figures:

* budget-allocation panels: per-C moment-error quantile bands next to the
  MSE curve on a log scale;
* estimator-robustness panels: grouped boxplots of |Zhat/Z - 1| per
  dimension on a log scale, means next to medians, one panel per arm.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .aggregate import (FIG1_COLUMNS, FIG2_COLUMNS, QUANTILE_LEVELS,
                        fig1_aggregate, fig2_aggregate, load_results)

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "smc-plots",
}


def _save(fig, out_path, fmt):
    # strip per-run metadata so repeated renders are byte-identical
    metadata = {"Date": None} if fmt == "svg" else (
        {"CreationDate": None} if fmt == "pdf" else None)
    fig.savefig(out_path, format=fmt, metadata=metadata)
    plt.close(fig)


def render_fig1(results_csv, out_path, fmt="png"):
    """Quantile bands of the moment errors (left) and MSE vs C on a log
    scale (right) from a budget-allocation sweep results file."""
    frame = load_results(results_csv, FIG1_COLUMNS)
    quantiles, mse = fig1_aggregate(frame)
    cs = sorted(mse)
    components = sorted({comp for (_, comp) in quantiles})
    with plt.rc_context(_STYLE):
        fig, (ax_q, ax_mse) = plt.subplots(1, 2, figsize=(8.0, 3.2))
        shades = [0.15, 0.3]
        for ci, comp in enumerate(components):
            bands = np.stack([quantiles[(c, comp)] for c in cs])
            color = f"C{ci}"
            ax_q.plot(cs, bands[:, 2], color=color, marker="o", ms=3,
                      label=f"{comp} median")
            for lo, hi, alpha in ((0, 4, shades[0]), (1, 3, shades[1])):
                ax_q.fill_between(cs, bands[:, lo], bands[:, hi],
                                  color=color, alpha=alpha, linewidth=0)
        ax_q.set_xscale("log")
        ax_q.set_xlabel("final-iteration allocation C")
        ax_q.set_ylabel("moment error")
        ax_q.set_title(f"error quantiles {QUANTILE_LEVELS}%")
        ax_q.legend(fontsize=7)
        ax_mse.plot(cs, [mse[c] for c in cs], color="C3", marker="s", ms=3)
        ax_mse.set_xscale("log")
        ax_mse.set_yscale("log")
        ax_mse.set_xlabel("final-iteration allocation C")
        ax_mse.set_ylabel("MSE")
        ax_mse.set_title("mean squared error (log scale)")
        fig.tight_layout()
        _save(fig, out_path, fmt)
    return out_path


def render_fig2(results_csv, out_path, fmt="png"):
    """Grouped log-scale boxplots of |Zhat/Z - 1| per dimension, the
    product-of-means estimator next to the product-of-medians, one panel
    per arm."""
    frame = load_results(results_csv, FIG2_COLUMNS)
    groups, _ = fig2_aggregate(frame)
    arms = sorted({arm for (_, arm, _) in groups})
    dims = sorted({d for (d, _, _) in groups})
    estimators = ["log_z_means", "log_z_medians"]
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(arms),
                                 figsize=(3.4 * len(arms), 3.2),
                                 squeeze=False)
        for ax, arm in zip(axes[0], arms):
            data, positions, colors = [], [], []
            ticks = []
            for di, d in enumerate(dims):
                for ei, est in enumerate(estimators):
                    key = (d, arm, est)
                    if key not in groups:
                        continue
                    data.append(groups[key])
                    positions.append(di * 3 + ei)
                    colors.append(f"C{ei}")
                ticks.append(di * 3 + 0.5)
            boxes = ax.boxplot(data, positions=positions, widths=0.8,
                               patch_artist=True)
            for patch, color in zip(boxes["boxes"], colors):
                patch.set_facecolor(color)
                patch.set_alpha(0.5)
            ax.set_yscale("log")
            ax.set_xticks(ticks)
            ax.set_xticklabels([f"d={d}" for d in dims])
            ax.set_title(arm)
            ax.set_ylabel("|Zhat/Z - 1|")
        handles = [plt.Line2D([], [], color=f"C{ei}", lw=6, alpha=0.5,
                              label=lbl)
                   for ei, lbl in enumerate(["means", "medians"])]
        axes[0][-1].legend(handles=handles, fontsize=7)
        fig.tight_layout()
        _save(fig, out_path, fmt)
    return out_path
