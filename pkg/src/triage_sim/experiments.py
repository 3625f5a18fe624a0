"""Canned experiment drivers: policy comparison and operating-point sweep.

Every policy (and every sweep grid point) runs on the identical workload:
arrivals and true labels come from dedicated random streams of the shared
master seed, so comparisons are paired and the workload digest is equal
across runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from . import worklist as wl
from .classifier import (
    default_roc,
    low_fnr_point,
    low_fpr_point,
    operating_point_at_fpr,
    perfect_point,
)
from .engine import CATEGORIES, SimulationConfig, SimulationResult, run_simulation
from .model import Finding
from .stats import RtatSummary, WelchResult, summarize, welch_t_test

__all__ = [
    "COMPARISON_POLICIES",
    "DEFAULT_SWEEP_GRID",
    "SweepSpec",
    "SweepResult",
    "ComparisonReport",
    "run_comparison",
    "run_sweep",
    "write_sweep_csv",
]

# The five policies of the headline comparison: label, queue policy, and
# operating point factory (None = classifier unused).
COMPARISON_POLICIES: tuple[tuple[str, str, object], ...] = (
    ("FIFO", wl.FIFO, None),
    ("Prio-lowFNR", wl.PRIO, low_fnr_point),
    ("Prio-lowFPR", wl.PRIO, low_fpr_point),
    ("Prio-MAXwaiting", wl.PRIO_MAXWAIT, low_fpr_point),
    ("Perfect", wl.PRIO, perfect_point),
)

# Coarse log-like grid; the endpoints are the degenerate nothing-flagged /
# everything-flagged limits where prioritization cannot reorder anything.
DEFAULT_SWEEP_GRID: tuple[float, ...] = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.7, 0.9, 1.0)


@dataclass(frozen=True)
class ComparisonReport:
    """Five policy runs on one workload plus per-finding tests vs FIFO."""

    results: Mapping[str, SimulationResult]
    summaries: Mapping[str, RtatSummary]
    welch_vs_fifo: Mapping[str, Mapping[str, WelchResult]]
    workload_digest: str

    def render_table(self) -> str:
        """Mean / max cells per category and policy, one row per category."""
        names = list(self.results)
        width = 18
        lines = [
            "finding".ljust(18) + "".join(name.rjust(width) for name in names)
        ]
        for category in CATEGORIES:
            cells = []
            for name in names:
                s = self.summaries[name][category]
                cell = "-" if s.n == 0 else f"{s.mean:.1f} / {s.max:.0f}"
                cells.append(cell.rjust(width))
            lines.append(category.ljust(18) + "".join(cells))
        return "\n".join(lines)

    def render_pvalues(self) -> str:
        """Welch p-values of each prioritized policy against FIFO."""
        names = [n for n in self.results if n != "FIFO"]
        width = 18
        lines = [
            "finding".ljust(18) + "".join(name.rjust(width) for name in names)
        ]
        for category in CATEGORIES:
            cells = []
            for name in names:
                res = self.welch_vs_fifo.get(name, {}).get(category)
                cells.append(("-" if res is None else f"{res.p_value:.4g}").rjust(width))
            lines.append(category.ljust(18) + "".join(cells))
        return "\n".join(lines)


def run_comparison(
    cfg: SimulationConfig, max_wait: float | None = None
) -> ComparisonReport:
    """Run the five-policy comparison on one shared workload.

    The escalating policy uses ``max_wait`` (falling back to the config
    value). Raises if the workload digests of the runs ever diverge, which
    would break the pairing.
    """
    results: dict[str, SimulationResult] = {}
    summaries: dict[str, RtatSummary] = {}
    for name, policy, op_factory in COMPARISON_POLICIES:
        run_cfg = replace(
            cfg,
            policy=policy,
            op=None if op_factory is None else op_factory(),
            max_wait_min=max_wait if max_wait is not None else cfg.max_wait_min,
            trace_path=None,
            summary_path=None,
            audit_path=None,
        )
        result = run_simulation(run_cfg)
        results[name] = result
        summaries[name] = summarize(result)

    digests = {r.workload_digest for r in results.values()}
    if len(digests) > 1:
        raise AssertionError("workload digests diverged across policies")

    welch: dict[str, dict[str, WelchResult]] = {}
    fifo = results["FIFO"]
    for name, result in results.items():
        if name == "FIFO":
            continue
        per_category: dict[str, WelchResult] = {}
        for category in CATEGORIES:
            a = fifo.samples[category]
            b = result.samples[category]
            if len(a) >= 2 and len(b) >= 2 and (a.var(ddof=1) > 0 or b.var(ddof=1) > 0):
                per_category[category] = welch_t_test(a, b)
        welch[name] = per_category

    return ComparisonReport(
        results=results,
        summaries=summaries,
        welch_vs_fifo=welch,
        workload_digest=digests.pop(),
    )


@dataclass(frozen=True)
class SweepSpec:
    """Grid of shared false-positive rates for the operating-point sweep."""

    grid: tuple[float, ...] = DEFAULT_SWEEP_GRID
    target: Finding = Finding.PNEUMOTHORAX
    days: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if len(self.grid) < 2:
            raise ValueError("sweep grid needs at least two points")
        if any(not 0.0 <= g <= 1.0 for g in self.grid):
            raise ValueError("grid values must lie within [0, 1]")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid values must be strictly increasing")


@dataclass(frozen=True)
class SweepResult:
    """Sweep rows plus the FIFO reference mean for the target finding."""

    target: Finding
    rows: tuple[tuple[float, float], ...]  # (fpr, mean rtat of target)
    fifo_mean: float

    def argmin(self) -> float:
        """Grid value with the smallest target mean."""
        return min(self.rows, key=lambda row: row[1])[0]


def run_sweep(spec: SweepSpec, cfg: SimulationConfig) -> SweepResult:
    """Evaluate the prioritized policy across the false-positive-rate grid.

    Each grid point cuts every finding's binormal curve at the same rate
    and reruns the priority simulation on the same base workload; the FIFO
    run on that workload provides the reference mean.
    """
    base = replace(
        cfg,
        days=spec.days if spec.days is not None else cfg.days,
        seed=spec.seed if spec.seed is not None else cfg.seed,
        trace_path=None,
        summary_path=None,
        audit_path=None,
    )
    label = spec.target.label
    fifo_cfg = replace(base, policy=wl.FIFO, op=None)
    fifo_mean = float(run_simulation(fifo_cfg).samples[label].mean())

    roc = default_roc()
    rows: list[tuple[float, float]] = []
    for fpr in spec.grid:
        op = operating_point_at_fpr(roc, fpr)
        result = run_simulation(replace(base, policy=wl.PRIO, op=op))
        rows.append((fpr, float(result.samples[label].mean())))
    return SweepResult(target=spec.target, rows=tuple(rows), fifo_mean=fifo_mean)


def write_sweep_csv(path: str | Path, sweep: SweepResult) -> None:
    """Write ``fpr,mean_rtat_min`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "mean_rtat_min"])
        for fpr, mean in sweep.rows:
            writer.writerow([f"{fpr:g}", f"{mean:.4f}"])
