"""Static figures written next to the CSV outputs.

Only imported when a command is run with ``--plot``; uses the Agg backend.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 120,
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_rates(trajectory, path, agents=None, rate=None, alt_index=0):
    """``lambda_{k,i} / i`` against ``i`` for the chosen agents, with the limit as a dashed line."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        steps = np.arange(1, trajectory.steps + 1)
        rates = trajectory.rates()[:, :, alt_index]
        for k in agents if agents is not None else range(trajectory.K):
            ax.plot(steps, rates[:, k], lw=0.9, label=f"agent {k}")
        if rate is not None:
            ax.axhline(rate, color="k", ls="--", lw=1.0, label=f"limit {rate:.3g}")
        ax.set_xlabel("step i")
        ax.set_ylabel(r"$\lambda_{k,i}/i$")
        ax.legend(loc="best", ncol=2)
        return _save(fig, path)


def plot_rate_function(rows, path, mean=None, markers=None):
    """Rate-function curve; ``markers`` are deviation rows plotted as ``-(1/i) log p``."""
    s = np.array([r[0] for r in rows])
    vals = np.array([r[1] for r in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(s, vals, color="k", lw=1.2, label="I(s)")
        if mean is not None:
            ax.plot([mean], [0.0], marker="D", color="k", ls="none", label=f"mean {mean:.3g}")
        if markers:
            by_agent = {}
            for m in markers:
                by_agent.setdefault(m["k"], []).append((m["s"], m["minus_log_p_over_i"]))
            for k, pts in sorted(by_agent.items()):
                pts.sort()
                ax.plot(*zip(*pts), marker="o", ms=4, ls="none", label=f"agent {k}")
        ax.set_xlabel("s")
        ax.set_ylabel("I(s)")
        ax.set_ylim(bottom=min(0.0, np.nanmin(vals)))
        ax.legend(loc="best")
        return _save(fig, path)
