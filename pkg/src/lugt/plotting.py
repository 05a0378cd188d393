"""Static convergence figures."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

AXIS_LABELS = {
    "comm_rounds": "communication rounds",
    "iterations": "iterations",
}


def convergence_figure(curves, x_axis="comm_rounds", title=None):
    """One log-scale stationarity curve per run.

    ``curves`` is a list of ``(label, records)`` pairs.
    """
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, records in curves:
        if not records:
            continue
        xs = [r.comm_rounds if x_axis == "comm_rounds" else r.k for r in records]
        ys = [max(r.stationarity, 1e-300) for r in records]
        ax.semilogy(xs, ys, label=label, lw=1.4)
    ax.set_xlabel(AXIS_LABELS[x_axis])
    ax.set_ylabel(r"$\|\nabla f(\bar x^k)\|^2 + \|\overline{\nabla f}(x^k)\|^2$")
    if title:
        ax.set_title(title)
    ax.grid(True, which="major", alpha=0.3)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def save_svg(fig, path):
    # fixed hash salt and no date keep the file reproducible
    tmp = f"{path}.tmp"
    with matplotlib.rc_context({"svg.hashsalt": "lugt"}):
        fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, path)
