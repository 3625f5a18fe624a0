"""Discrete-event simulation loop and Monte-Carlo replication orchestration.

A single radiologist serves a policy-ordered worklist fed by a time-of-day
dependent arrival process. Arrivals, labeling, classification, and
reporting each consume an independent named random stream derived from the
master seed, so the generated workload is identical across policies and
paired comparisons see the same exams.
"""

from __future__ import annotations

import csv
import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import worklist as wl
from .classifier import OperatingPoint, classify
from .distributions import (
    MINUTES_PER_DAY,
    DistributionPair,
    TimeOfDayDistribution,
    default_distributions,
    sample_delta,
)
from .model import (
    NORMAL_RANK,
    Exam,
    Finding,
    PrevalenceTable,
    assign_findings,
    urgency_of,
)

__all__ = [
    "SimulationConfig",
    "SimulationResult",
    "Workload",
    "ConfigError",
    "NonpositiveDeltaError",
    "NORMAL_CATEGORY",
    "CATEGORIES",
    "FLUSH_FORCE",
    "FLUSH_ASSERT",
    "generate_workload",
    "run_simulation",
    "run_replications",
    "write_trace_csv",
    "write_summary_csv",
]

FLUSH_FORCE = "force"
FLUSH_ASSERT = "assert"

#: Category key for exams without any true finding.
NORMAL_CATEGORY = "normal"

#: Summary categories in urgency order, normals last.
CATEGORIES: tuple = tuple(f.label for f in Finding) + (NORMAL_CATEGORY,)

# Named random streams derived from (seed, replication, stream id).
_STREAM_ARRIVALS = 1
_STREAM_LABELS = 2
_STREAM_CLASSIFY = 3
_STREAM_REPORTING = 4

_MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """The simulation configuration is invalid."""


class NonpositiveDeltaError(ValueError):
    """A distribution produced a delta that cannot advance the clock."""


def _stream(seed: int, replication: int, stream_id: int) -> np.random.Generator:
    """Independent generator for one named stream of one replication."""
    entropy = [seed & _MASK64, replication & _MASK64, stream_id]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class SimulationConfig:
    """Everything one simulation run needs.

    ``days`` may be zero for a vacuous run. Distributions default to the
    shipped calibrated synthetic pair; the operating point may be ``None``
    only under FIFO, where predictions are never used.
    """

    days: int = 1000
    seed: int = 0
    policy: str = wl.FIFO
    op: OperatingPoint | None = None
    prevalence: PrevalenceTable = field(default_factory=PrevalenceTable)
    distributions: DistributionPair | None = None
    max_wait_min: float = wl.DEFAULT_MAX_WAIT_MIN
    flush_mode: str = FLUSH_FORCE
    trace_path: str | None = None
    summary_path: str | None = None
    audit_path: str | None = None

    def __post_init__(self) -> None:
        if self.days < 0:
            raise ConfigError(f"days must be >= 0, got {self.days}")
        if self.policy not in wl.POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.flush_mode not in (FLUSH_FORCE, FLUSH_ASSERT):
            raise ConfigError(f"unknown flush mode {self.flush_mode!r}")
        if self.max_wait_min <= 0:
            raise ConfigError("max_wait_min must be positive")
        if self.policy != wl.FIFO and self.op is None:
            raise ConfigError(f"policy {self.policy!r} needs an operating point")

    def resolved_distributions(self) -> DistributionPair:
        return self.distributions if self.distributions is not None else default_distributions()


@dataclass(frozen=True)
class Workload:
    """The policy-independent part of a run: arrivals and true labels."""

    created_at: np.ndarray
    true_sets: tuple[frozenset[Finding], ...]
    digest: str

    def __len__(self) -> int:
        return len(self.true_sets)


@dataclass
class SimulationResult:
    """Per-category turnaround samples plus run metadata.

    An exam contributes one sample to the category of each of its true
    findings; an exam without findings contributes to the normal category
    only. Samples are ordered by exam id within a replication.
    """

    policy: str
    days: int
    seed: int
    samples: dict[str, np.ndarray]
    n_exams: int
    escalations: int
    drain_violations: int
    workload_digest: str
    exams: list[Exam] = field(default_factory=list, repr=False)

    def overall_mean_rtat(self) -> float:
        """Mean turnaround over all exams (not over categories)."""
        if not self.exams:
            raise ValueError("no per-exam records retained")
        return float(np.mean([e.rtat for e in self.exams]))


def generate_workload(cfg: SimulationConfig, replication: int = 0) -> Workload:
    """Generate arrival timestamps and true finding sets for one replication.

    Only the arrivals and labels streams are consumed, so the workload is
    byte-identical across policies and operating points under one seed.
    """
    dists = cfg.resolved_distributions()
    arr_rng = _stream(cfg.seed, replication, _STREAM_ARRIVALS)
    lab_rng = _stream(cfg.seed, replication, _STREAM_LABELS)
    horizon = cfg.days * MINUTES_PER_DAY

    created: list[float] = []
    sets: list[frozenset[Finding]] = []
    digest = hashlib.blake2b(digest_size=16)
    t = 0.0
    while t < horizon:
        true_set = assign_findings(cfg.prevalence, lab_rng)
        created.append(t)
        sets.append(true_set)
        mask = 0
        for f in true_set:
            mask |= 1 << (f - 1)
        digest.update(struct.pack("<dB", t, mask))
        delta = sample_delta(dists.arrivals, t, arr_rng)
        if delta <= 0.0:
            raise NonpositiveDeltaError(f"arrival delta {delta} at t={t}")
        t += delta
    return Workload(
        created_at=np.asarray(created, dtype=float),
        true_sets=tuple(sets),
        digest=digest.hexdigest(),
    )


def _predict(
    workload: Workload, cfg: SimulationConfig, replication: int
) -> list[Exam]:
    """Build per-run exam records, classifying unless the policy is FIFO."""
    use_classifier = cfg.policy != wl.FIFO
    cls_rng = _stream(cfg.seed, replication, _STREAM_CLASSIFY)
    empty: frozenset[Finding] = frozenset()
    exams: list[Exam] = []
    for i, true_set in enumerate(workload.true_sets):
        if use_classifier:
            predicted = classify(true_set, cfg.op, cls_rng)
            urgency = urgency_of(predicted)
        else:
            predicted = empty
            urgency = NORMAL_RANK
        exams.append(
            Exam(
                id=i,
                created_at=float(workload.created_at[i]),
                true_findings=true_set,
                predicted_findings=predicted,
                urgency=urgency,
            )
        )
    return exams


class _AuditLog:
    """Optional per-event CSV log: time_min,event,exam_id,rank,escalated."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(["time_min", "event", "exam_id", "rank", "escalated"])

    def row(self, time_min: float, event: str, exam: Exam) -> None:
        rank = wl.ESCALATED_RANK if exam.escalated else exam.urgency
        self._writer.writerow(
            [f"{time_min:.6f}", event, exam.id, rank, int(exam.escalated)]
        )

    def close(self) -> None:
        self._fh.close()


def _serve(
    exams: Sequence[Exam],
    cfg: SimulationConfig,
    reporting: TimeOfDayDistribution,
    rep_rng: np.random.Generator,
    audit: _AuditLog | None,
) -> tuple[int, int]:
    """Run the event loop; stamps reported_at on every exam.

    Returns (escalation count, drain violation count). Under force flush,
    arrivals after a day boundary are withheld (with their true creation
    times) until the pre-boundary worklist drains, then released in
    creation order. Under assert flush nothing is withheld, but any day
    during which the queue never reached zero is counted as a violation.
    """
    queue = wl.Worklist(cfg.policy, cfg.max_wait_min)
    maxwait = cfg.policy == wl.PRIO_MAXWAIT
    force = cfg.flush_mode == FLUSH_FORCE
    horizon = cfg.days * MINUTES_PER_DAY

    held: list[Exam] = []
    gate_closed = False
    busy_until: float | None = None
    i, n = 0, len(exams)
    next_boundary = MINUTES_PER_DAY if cfg.days > 0 else float("inf")
    zero_seen = True  # queue starts empty
    escalations = 0
    violations = 0
    INF = float("inf")

    def do_insert(exam: Exam, now: float) -> None:
        nonlocal escalations
        queue.insert(exam)
        if audit is not None:
            audit.row(now, "insert", exam)
        if maxwait:
            for xid in queue.escalate_overdue(now):
                escalations += 1
                if audit is not None:
                    audit.row(now, "escalate", exams[xid])

    while True:
        t_arrival = exams[i].created_at if i < n else INF
        t_done = busy_until if busy_until is not None else INF
        t_bound = next_boundary if next_boundary <= horizon else INF
        t = min(t_bound, t_done, t_arrival)
        if t == INF:
            break

        # Tie order: boundary, then completion, then arrival.
        if t == t_bound:
            if len(queue) > 0:
                if force:
                    gate_closed = True
                if not zero_seen:
                    violations += 1
                zero_seen = False
            else:
                zero_seen = True
            next_boundary += MINUTES_PER_DAY
        elif t == t_done:
            busy_until = None
        else:
            exam = exams[i]
            i += 1
            if gate_closed:
                held.append(exam)
            else:
                do_insert(exam, t)

        if gate_closed and len(queue) == 0:
            for exam in held:  # already in creation order
                do_insert(exam, t)
            held.clear()
            gate_closed = False

        if busy_until is None and len(queue) > 0:
            if maxwait:
                for xid in queue.escalate_overdue(t):
                    escalations += 1
                    if audit is not None:
                        audit.row(t, "escalate", exams[xid])
            exam = queue.pop_next()
            delta = sample_delta(reporting, t, rep_rng)
            if delta <= 0.0:
                raise NonpositiveDeltaError(f"reporting delta {delta} at t={t}")
            exam.reported_at = t + delta
            busy_until = exam.reported_at
            if audit is not None:
                audit.row(t, "pop", exam)

        if len(queue) == 0:
            zero_seen = True

    return escalations, violations


def _collect_samples(exams: Sequence[Exam]) -> dict[str, np.ndarray]:
    buckets: dict[str, list[float]] = {c: [] for c in CATEGORIES}
    for exam in exams:
        rtat = exam.rtat
        if exam.true_findings:
            for f in exam.true_findings:
                buckets[f.label].append(rtat)
        else:
            buckets[NORMAL_CATEGORY].append(rtat)
    return {c: np.asarray(v, dtype=float) for c, v in buckets.items()}


def run_simulation(cfg: SimulationConfig, replication: int = 0) -> SimulationResult:
    """Run one replication end to end and gather per-category samples."""
    workload = generate_workload(cfg, replication)
    exams = _predict(workload, cfg, replication)
    rep_rng = _stream(cfg.seed, replication, _STREAM_REPORTING)
    audit = _AuditLog(cfg.audit_path) if cfg.audit_path else None
    try:
        escalations, violations = _serve(
            exams, cfg, cfg.resolved_distributions().reporting, rep_rng, audit
        )
    finally:
        if audit is not None:
            audit.close()

    result = SimulationResult(
        policy=cfg.policy,
        days=cfg.days,
        seed=cfg.seed,
        samples=_collect_samples(exams),
        n_exams=len(exams),
        escalations=escalations,
        drain_violations=violations,
        workload_digest=workload.digest,
        exams=exams,
    )
    if cfg.trace_path:
        write_trace_csv(cfg.trace_path, exams)
    if cfg.summary_path:
        from .stats import summarize, write_summary_csv as _write  # cycle guard

        _write(cfg.summary_path, summarize(result))
    return result


def run_replications(cfg: SimulationConfig, replications: int) -> SimulationResult:
    """Run independent replications with decorrelated seeds and merge them.

    Replication ``k`` derives its streams from (seed, k), so results do not
    depend on how many replications run or in which order they complete;
    merged samples are concatenated in replication order, each internally
    ordered by exam id.
    """
    if replications < 1:
        raise ConfigError("replications must be >= 1")
    results = [run_simulation(cfg, replication=k) for k in range(replications)]
    if replications == 1:
        return results[0]

    merged: dict[str, np.ndarray] = {}
    for c in CATEGORIES:
        merged[c] = np.concatenate([r.samples[c] for r in results])
    digest = hashlib.blake2b(digest_size=16)
    for r in results:
        digest.update(bytes.fromhex(r.workload_digest))
    exams: list[Exam] = []
    for r in results:
        exams.extend(r.exams)
    return SimulationResult(
        policy=cfg.policy,
        days=cfg.days * replications,
        seed=cfg.seed,
        samples=merged,
        n_exams=sum(r.n_exams for r in results),
        escalations=sum(r.escalations for r in results),
        drain_violations=sum(r.drain_violations for r in results),
        workload_digest=digest.hexdigest(),
        exams=exams,
    )


def _format_findings(findings: Iterable[Finding]) -> str:
    return "|".join(f.label for f in sorted(findings))


def write_trace_csv(path: str | Path, exams: Sequence[Exam]) -> None:
    """Write the per-exam trace with pipe-separated finding lists."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "exam_id", "day", "created_min", "reported_min", "rtat_min",
                "true_findings", "predicted_findings", "urgency", "escalated",
            ]
        )
        for e in exams:
            writer.writerow(
                [
                    e.id,
                    int(e.created_at // MINUTES_PER_DAY),
                    f"{e.created_at:.6f}",
                    f"{e.reported_at:.6f}",
                    f"{e.rtat:.6f}",
                    _format_findings(e.true_findings),
                    _format_findings(e.predicted_findings),
                    e.urgency,
                    int(e.escalated),
                ]
            )


def write_summary_csv(path: str | Path, summary) -> None:
    """Re-exported from stats for convenience."""
    from .stats import write_summary_csv as _write

    _write(path, summary)
