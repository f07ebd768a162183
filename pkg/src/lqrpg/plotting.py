"""Render convergence traces to figure files next to their CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .traces import ConvergenceTrace


def render_trace_figure(trace: ConvergenceTrace, path, title: str = "") -> None:
    """Two stacked panels: cost per iteration, and gap / gradient norm on a log scale."""
    iters = [r.iteration for r in trace.records]
    costs = [r.cost for r in trace.records]
    gaps = [(r.iteration, r.gap) for r in trace.records if r.gap is not None and r.gap > 0]
    grads = [(r.iteration, r.grad_norm) for r in trace.records if r.grad_norm is not None and r.grad_norm > 0]

    fig, (ax_cost, ax_log) = plt.subplots(2, 1, figsize=(6.4, 6.0), sharex=True)
    ax_cost.plot(iters, costs, color="tab:blue", lw=1.2)
    ax_cost.set_ylabel("cost")
    if title:
        ax_cost.set_title(title)
    if gaps:
        ax_log.semilogy(*zip(*gaps), color="tab:red", lw=1.2, label="gap to optimum")
    if grads:
        ax_log.semilogy(*zip(*grads), color="tab:green", lw=1.0, ls="--", label="gradient norm")
    ax_log.set_xlabel("iteration")
    ax_log.set_ylabel("gap / gradient")
    if gaps or grads:
        ax_log.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
