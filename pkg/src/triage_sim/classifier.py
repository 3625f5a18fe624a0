"""Stochastic per-finding classifier model and its ROC interpolation.

Instead of running a network on images, the simulation flips each exam's
true labels through per-finding true/false positive rates. Two measured
operating points are built in; intermediate points are interpolated with a
binormal ROC fitted exactly through both.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist
from typing import Mapping

import numpy as np

from .model import Finding, finding_from_name, interned_set

__all__ = [
    "OperatingPoint",
    "BinormalRoc",
    "DegenerateAnchorsError",
    "LOW_FPR_TPR",
    "LOW_FNR_FPR",
    "low_fpr_point",
    "low_fnr_point",
    "perfect_point",
    "operating_point",
    "load_operating_point",
    "classify",
    "fit_binormal",
    "default_roc",
    "operating_point_at_fpr",
]

_NORMAL = NormalDist()


class DegenerateAnchorsError(ValueError):
    """ROC anchors do not determine a valid increasing binormal curve."""


# Measured sensitivity at the shared false-positive rate of 0.05.
LOW_FPR_TPR: dict[Finding, float] = {
    Finding.PNEUMOTHORAX: 0.82,
    Finding.CONGESTION: 0.71,
    Finding.PLEURAL_EFFUSION: 0.86,
    Finding.INFILTRATE: 0.75,
    Finding.ATELECTASIS: 0.61,
    Finding.CARDIOMEGALY: 0.75,
    Finding.MASS: 0.51,
    Finding.FOREIGN_OBJECT: 0.51,
}

# Measured false-positive rate at the shared sensitivity of 0.95.
LOW_FNR_FPR: dict[Finding, float] = {
    Finding.PNEUMOTHORAX: 0.20,
    Finding.CONGESTION: 0.24,
    Finding.PLEURAL_EFFUSION: 0.21,
    Finding.INFILTRATE: 0.27,
    Finding.ATELECTASIS: 0.39,
    Finding.CARDIOMEGALY: 0.18,
    Finding.MASS: 0.72,
    Finding.FOREIGN_OBJECT: 0.78,
}


@dataclass(frozen=True)
class OperatingPoint:
    """Per-finding (TPR, FPR) pairs defining the stochastic classifier."""

    tpr: Mapping[Finding, float]
    fpr: Mapping[Finding, float]
    name: str = "custom"

    def __post_init__(self) -> None:
        for f in Finding:
            for label, table in (("tpr", self.tpr), ("fpr", self.fpr)):
                value = table.get(f)
                if value is None:
                    raise ValueError(f"missing {label} for {f.label}")
                if not 0.0 <= value <= 1.0:
                    raise ValueError(f"{label} out of [0, 1] for {f.label}: {value}")
        if self.name == "perfect":
            if any(self.tpr[f] != 1.0 or self.fpr[f] != 0.0 for f in Finding):
                raise ValueError("a perfect point requires tpr=1 and fpr=0 everywhere")

    def fnr(self, finding: Finding) -> float:
        return 1.0 - self.tpr[finding]

    def tnr(self, finding: Finding) -> float:
        return 1.0 - self.fpr[finding]


def low_fpr_point() -> OperatingPoint:
    """Built-in operating point with every finding at FPR 0.05."""
    return OperatingPoint(
        tpr=dict(LOW_FPR_TPR), fpr={f: 0.05 for f in Finding}, name="lowFPR"
    )


def low_fnr_point() -> OperatingPoint:
    """Built-in operating point with every finding at TPR 0.95."""
    return OperatingPoint(
        tpr={f: 0.95 for f in Finding}, fpr=dict(LOW_FNR_FPR), name="lowFNR"
    )


def perfect_point() -> OperatingPoint:
    """Oracle classifier: every label reproduced exactly."""
    return OperatingPoint(
        tpr={f: 1.0 for f in Finding}, fpr={f: 0.0 for f in Finding}, name="perfect"
    )


_BUILTIN_POINTS = {
    "low-fpr": low_fpr_point,
    "low-fnr": low_fnr_point,
    "perfect": perfect_point,
}


def operating_point(name: str) -> OperatingPoint:
    """Resolve a built-in operating point by CLI name."""
    key = name.strip().lower().replace("_", "-")
    try:
        return _BUILTIN_POINTS[key]()
    except KeyError:
        raise ValueError(
            f"unknown operating point {name!r}; expected one of "
            f"{', '.join(sorted(_BUILTIN_POINTS))}"
        ) from None


def load_operating_point(path: str | Path) -> OperatingPoint:
    """Load a ``finding,tpr,fpr`` CSV override."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"operating point file not found: {path}")
    tpr: dict[Finding, float] = {}
    fpr: dict[Finding, float] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"finding", "tpr", "fpr"}:
            raise ValueError(f"{path}: expected header 'finding,tpr,fpr'")
        for row in reader:
            f = finding_from_name(row["finding"])
            tpr[f] = float(row["tpr"])
            fpr[f] = float(row["fpr"])
    missing = [f.label for f in Finding if f not in tpr]
    if missing:
        raise ValueError(f"{path}: missing findings: {', '.join(missing)}")
    return OperatingPoint(tpr=tpr, fpr=fpr, name=f"file:{path.name}")


_FINDING_ORDER = tuple(Finding)


def classify(
    true_findings: frozenset[Finding] | set[Finding],
    op: OperatingPoint,
    rng: np.random.Generator,
) -> frozenset[Finding]:
    """Predict a finding set by flipping each true label independently.

    A present finding is reported with probability ``tpr``; an absent one
    with probability ``fpr``. Exactly eight uniforms are consumed per call,
    in fixed finding order, so stream positions stay aligned regardless of
    the exam's content.
    """
    u = rng.random(8)
    mask = 0
    for i, f in enumerate(_FINDING_ORDER):
        p = op.tpr[f] if f in true_findings else op.fpr[f]
        if u[i] < p:
            mask |= 1 << (f - 1)
    return interned_set(mask)


@dataclass(frozen=True)
class BinormalRoc:
    """Per-finding binormal ROC curves: TPR = Phi(a + b * Phi^-1(FPR)).

    Each curve passes exactly through the two anchor points it was fitted
    from, and is strictly increasing in FPR because b > 0.
    """

    intercept: Mapping[Finding, float]
    slope: Mapping[Finding, float]
    anchors: Mapping[Finding, tuple[tuple[float, float], tuple[float, float]]]

    def tpr_at(self, finding: Finding, fpr: float) -> float:
        """Sensitivity of one finding's curve at a false-positive rate.

        The endpoints are handled as limits of the curve: 0 maps to 0 and
        1 maps to 1.
        """
        if not 0.0 <= fpr <= 1.0:
            raise ValueError(f"fpr out of [0, 1]: {fpr}")
        if fpr == 0.0:
            return 0.0
        if fpr == 1.0:
            return 1.0
        z = _NORMAL.inv_cdf(fpr)
        return _NORMAL.cdf(self.intercept[finding] + self.slope[finding] * z)


def fit_binormal(
    anchors: Mapping[Finding, tuple[tuple[float, float], tuple[float, float]]],
) -> BinormalRoc:
    """Fit per-finding binormal curves exactly through two anchors each.

    Anchors are ``(fpr, tpr)`` pairs strictly inside (0, 1)^2 with distinct
    false-positive rates. Raises ``DegenerateAnchorsError`` when the probit
    system is unsolvable or yields a non-increasing curve.
    """
    intercept: dict[Finding, float] = {}
    slope: dict[Finding, float] = {}
    for f, ((fpr1, tpr1), (fpr2, tpr2)) in anchors.items():
        for v in (fpr1, tpr1, fpr2, tpr2):
            if not 0.0 < v < 1.0:
                raise DegenerateAnchorsError(
                    f"{f.label}: anchors must lie strictly inside (0, 1)^2"
                )
        if fpr1 == fpr2:
            raise DegenerateAnchorsError(f"{f.label}: anchors share one fpr value")
        x1, y1 = _NORMAL.inv_cdf(fpr1), _NORMAL.inv_cdf(tpr1)
        x2, y2 = _NORMAL.inv_cdf(fpr2), _NORMAL.inv_cdf(tpr2)
        b = (y2 - y1) / (x2 - x1)
        if b <= 0.0:
            raise DegenerateAnchorsError(f"{f.label}: fitted slope {b:.4f} is not positive")
        intercept[f] = y1 - b * x1
        slope[f] = b
    return BinormalRoc(intercept=intercept, slope=slope, anchors=dict(anchors))


def default_roc() -> BinormalRoc:
    """Binormal curves through both built-in operating points per finding."""
    return fit_binormal(
        {
            f: ((0.05, LOW_FPR_TPR[f]), (LOW_FNR_FPR[f], 0.95))
            for f in Finding
        }
    )


def operating_point_at_fpr(
    roc: BinormalRoc, fpr: float | Mapping[Finding, float]
) -> OperatingPoint:
    """Operating point obtained by cutting the ROC at a false-positive rate.

    A scalar applies the same rate to every finding's curve (matching the
    one-axis sweep); a mapping sets per-finding rates.
    """
    if isinstance(fpr, Mapping):
        rates = {f: float(fpr[f]) for f in Finding}
    else:
        rates = {f: float(fpr) for f in Finding}
    tpr = {f: roc.tpr_at(f, rates[f]) for f in Finding}
    if isinstance(fpr, Mapping):
        name = "roc:per-finding"
    else:
        name = f"roc:fpr={float(fpr):g}"
    return OperatingPoint(tpr=tpr, fpr=rates, name=name)
