"""Per-iteration convergence records and their CSV serialization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
DIVERGED = "diverged"


@dataclass
class TraceRecord:
    """State of the iterate at the start of iteration ``iteration``.

    ``step`` is the step size applied to leave this iterate (empty on the
    final row).  ``samples`` is the cumulative trajectory count for
    model-free runs, None for exact runs.
    """

    iteration: int
    cost: float | None
    gap: float | None
    grad_norm: float | None
    step: float | None
    wall_s: float
    samples: int | None = None


@dataclass
class ConvergenceTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: str = BUDGET_EXHAUSTED
    #: Guaranteed per-step contraction factor, recorded for natural policy
    #: gradient runs with the closed-form step size.
    contraction_factor: float | None = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def costs(self) -> list[float]:
        return [r.cost for r in self.records if r.cost is not None]

    def iterations(self) -> int:
        """Number of update steps taken (rows minus one)."""
        return max(len(self.records) - 1, 0)


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_trace_csv(trace: ConvergenceTrace, path, include_wall: bool = True, include_samples: bool = False) -> None:
    """RFC-4180-style trace dump, one row per iterate.

    Wall time is omitted from model-free traces so that reruns with the same
    seed produce byte-identical files.
    """
    header = ["iter", "cost", "gap", "grad_fro", "step"]
    if include_wall:
        header.append("wall_ms")
    if include_samples:
        header.append("samples_cum")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in trace.records:
            row = [str(rec.iteration), _fmt(rec.cost), _fmt(rec.gap), _fmt(rec.grad_norm), _fmt(rec.step)]
            if include_wall:
                row.append(_fmt(rec.wall_s * 1000.0))
            if include_samples:
                row.append("" if rec.samples is None else str(rec.samples))
            writer.writerow(row)
