"""Domain vocabulary: findings, urgency ranking, prevalence, and exam records.

Findings are ordered by clinical urgency; an exam's urgency is the most
urgent finding predicted for it. Prevalence defaults come from a manual
annotation of 600 reports at a university hospital and can be overridden
from a CSV file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Finding",
    "NORMAL_RANK",
    "INDEPENDENT",
    "NORMAL_GATED",
    "PrevalenceTable",
    "Exam",
    "urgency_of",
    "assign_findings",
    "load_prevalence",
    "finding_from_name",
]


class Finding(IntEnum):
    """The eight findings, ordered most-urgent first (value == urgency rank)."""

    PNEUMOTHORAX = 1
    CONGESTION = 2
    PLEURAL_EFFUSION = 3
    INFILTRATE = 4
    ATELECTASIS = 5
    CARDIOMEGALY = 6
    MASS = 7
    FOREIGN_OBJECT = 8

    @property
    def label(self) -> str:
        """Lowercase underscore-separated name used in CSV files and CLI output."""
        return self.name.lower()


#: Urgency rank assigned to exams with no (predicted) finding.
NORMAL_RANK = 9

#: Label-model modes.
INDEPENDENT = "independent"
NORMAL_GATED = "normal-gated"

# Marginal prevalence per finding (fraction of exams) and the fraction of
# exams without any finding, from the 600-exam annotation.
DEFAULT_PREVALENCE: dict[Finding, float] = {
    Finding.PNEUMOTHORAX: 0.038,
    Finding.CONGESTION: 0.207,
    Finding.PLEURAL_EFFUSION: 0.393,
    Finding.INFILTRATE: 0.167,
    Finding.ATELECTASIS: 0.207,
    Finding.CARDIOMEGALY: 0.195,
    Finding.MASS: 0.063,
    Finding.FOREIGN_OBJECT: 0.497,
}

DEFAULT_P_NORMAL = 0.31

_NAME_TO_FINDING = {f.label: f for f in Finding}

# Finding sets are interned so that the many exams sharing a combination
# share one frozenset object.
_SET_CACHE: dict[int, frozenset[Finding]] = {}


def finding_from_name(name: str) -> Finding:
    """Resolve a lowercase underscore-separated finding name."""
    key = name.strip().lower().replace("-", "_").replace(" ", "_")
    try:
        return _NAME_TO_FINDING[key]
    except KeyError:
        raise ValueError(f"unknown finding name: {name!r}") from None


def findings_mask(findings: Iterable[Finding]) -> int:
    """Bitmask encoding of a finding set (bit rank-1 set per finding)."""
    mask = 0
    for f in findings:
        mask |= 1 << (f - 1)
    return mask


def interned_set(mask: int) -> frozenset[Finding]:
    """Shared frozenset for a finding bitmask."""
    cached = _SET_CACHE.get(mask)
    if cached is None:
        cached = frozenset(f for f in Finding if mask & (1 << (f - 1)))
        _SET_CACHE[mask] = cached
    return cached


@dataclass(frozen=True)
class PrevalenceTable:
    """Marginal finding probabilities plus the label-model mode.

    In ``independent`` mode each finding occurs independently with its
    marginal probability. In ``normal-gated`` mode (the default) an exam is
    normal with probability ``p_normal``; otherwise findings are drawn
    independently with probabilities rescaled by ``1 / (1 - p_normal)``,
    redrawing the rare all-negative within-gate outcomes. The gated mode
    matches the observed normal fraction exactly, which the independent
    product of the marginals does not.
    """

    probabilities: Mapping[Finding, float] = field(
        default_factory=lambda: dict(DEFAULT_PREVALENCE)
    )
    p_normal: float = DEFAULT_P_NORMAL
    mode: str = NORMAL_GATED

    def __post_init__(self) -> None:
        if self.mode not in (INDEPENDENT, NORMAL_GATED):
            raise ValueError(f"unknown label-model mode: {self.mode!r}")
        if not 0.0 <= self.p_normal <= 1.0:
            raise ValueError(f"p_normal out of [0, 1]: {self.p_normal}")
        for f in Finding:
            p = self.probabilities.get(f)
            if p is None:
                raise ValueError(f"missing prevalence for {f.label}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"prevalence out of [0, 1] for {f.label}: {p}")

    def gated_probabilities(self) -> dict[Finding, float]:
        """Per-finding probabilities conditional on the exam not being normal."""
        if self.p_normal >= 1.0:
            return {f: 0.0 for f in Finding}
        scale = 1.0 / (1.0 - self.p_normal)
        return {f: min(1.0, p * scale) for f, p in self.probabilities.items()}


@dataclass(slots=True)
class Exam:
    """One chest X-ray flowing through the system.

    ``reported_at`` and ``escalated`` are filled in by the simulation; all
    other fields are fixed at creation. Ids are assigned sequentially in
    creation order and double as FIFO tie-breakers.
    """

    id: int
    created_at: float
    true_findings: frozenset[Finding]
    predicted_findings: frozenset[Finding]
    urgency: int
    escalated: bool = False
    reported_at: float | None = None

    @property
    def rtat(self) -> float:
        """Report turnaround time in minutes; requires a reported exam."""
        if self.reported_at is None:
            raise ValueError(f"exam {self.id} has not been reported")
        return self.reported_at - self.created_at


def urgency_of(predicted: frozenset[Finding] | set[Finding]) -> int:
    """Urgency rank of a predicted finding set.

    The rank is that of the most urgent finding present; the empty set maps
    to the normal rank. Combinations carry no extra weight.
    """
    if not predicted:
        return NORMAL_RANK
    return int(min(predicted))


_FINDING_ORDER = tuple(Finding)


def assign_findings(prev: PrevalenceTable, rng: np.random.Generator) -> frozenset[Finding]:
    """Draw a true finding set from the prevalence table.

    Draws are consumed from ``rng`` in a fixed finding order so that a given
    stream position always produces the same labels.
    """
    if prev.mode == INDEPENDENT:
        u = rng.random(8)
        mask = 0
        for i, f in enumerate(_FINDING_ORDER):
            if u[i] < prev.probabilities[f]:
                mask |= 1 << (f - 1)
        return interned_set(mask)

    if rng.random() < prev.p_normal:
        return interned_set(0)
    gated = prev.gated_probabilities()
    if all(p == 0.0 for p in gated.values()):
        # Degenerate table: nothing can be drawn inside the gate.
        return interned_set(0)
    while True:
        u = rng.random(8)
        mask = 0
        for i, f in enumerate(_FINDING_ORDER):
            if u[i] < gated[f]:
                mask |= 1 << (f - 1)
        if mask:
            return interned_set(mask)


def load_prevalence(
    path: str | Path | None,
    mode: str = NORMAL_GATED,
    p_normal: float = DEFAULT_P_NORMAL,
) -> PrevalenceTable:
    """Load a prevalence table from a ``finding,prevalence`` CSV file.

    A missing path (or ``None``) falls back to the built-in defaults. The
    file may also contain a ``normal`` row overriding the normal fraction.
    """
    if path is None:
        return PrevalenceTable(mode=mode, p_normal=p_normal)
    path = Path(path)
    if not path.exists():
        return PrevalenceTable(mode=mode, p_normal=p_normal)

    probabilities = dict(DEFAULT_PREVALENCE)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"finding", "prevalence"}:
            raise ValueError(f"{path}: expected header 'finding,prevalence'")
        for row in reader:
            name = row["finding"].strip().lower()
            value = float(row["prevalence"])
            if name == "normal":
                p_normal = value
            else:
                probabilities[finding_from_name(name)] = value
    return PrevalenceTable(probabilities=probabilities, mode=mode, p_normal=p_normal)
