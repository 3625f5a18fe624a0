"""Turnaround-time aggregation and Welch's t-test for policy comparisons.

The t-test p-value is computed through the regularized incomplete beta
function rather than a statistics library, so the whole pipeline stays
dependency-light while remaining checkable against reference values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "CategorySummary",
    "RtatSummary",
    "WelchResult",
    "DegenerateSamplesError",
    "summarize",
    "summarize_samples",
    "welch_t_test",
    "regularized_incomplete_beta",
    "student_t_sf",
    "nearest_rank_percentile",
    "write_summary_csv",
]


class DegenerateSamplesError(ValueError):
    """Samples too small or too flat for a t-test."""


@dataclass(frozen=True)
class CategorySummary:
    """Order statistics of one category's turnaround samples (minutes)."""

    n: int
    mean: float
    median: float
    max: float
    p95: float


@dataclass(frozen=True)
class RtatSummary:
    """Per-category turnaround summaries plus the underlying samples."""

    categories: Mapping[str, CategorySummary]
    samples: Mapping[str, np.ndarray]

    def __getitem__(self, category: str) -> CategorySummary:
        return self.categories[category]


def nearest_rank_percentile(sorted_values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile of an ascending array (q in (0, 1])."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty sample")
    rank = math.ceil(q * n)
    return float(sorted_values[max(rank, 1) - 1])


def _summary_of(values: np.ndarray) -> CategorySummary:
    if values.size == 0:
        return CategorySummary(n=0, mean=math.nan, median=math.nan,
                               max=math.nan, p95=math.nan)
    ordered = np.sort(values)
    return CategorySummary(
        n=int(values.size),
        mean=float(values.mean()),
        median=float(np.median(ordered)),
        max=float(ordered[-1]),
        p95=nearest_rank_percentile(ordered, 0.95),
    )


def summarize_samples(samples: Mapping[str, np.ndarray]) -> RtatSummary:
    """Summarize per-category sample arrays.

    Recomputing from full samples makes the summary merge-consistent:
    summarizing a concatenation equals summarizing merged partial results.
    """
    return RtatSummary(
        categories={c: _summary_of(np.asarray(v, dtype=float)) for c, v in samples.items()},
        samples=dict(samples),
    )


def summarize(result) -> RtatSummary:
    """Summarize a simulation result (anything exposing ``.samples``)."""
    return summarize_samples(result.samples)


@dataclass(frozen=True)
class WelchResult:
    """Welch's unequal-variance two-sample t-test."""

    t: float
    df: float
    p_value: float
    mean_a: float
    mean_b: float
    var_a: float
    var_b: float
    n_a: int
    n_b: int


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    TINY = 1e-300
    EPS = 1e-16
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student's t."""
    if df <= 0.0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def welch_t_test(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> WelchResult:
    """Welch's t-test with Welch-Satterthwaite degrees of freedom.

    Raises ``DegenerateSamplesError`` when either sample has fewer than two
    observations or both variances vanish.
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    n_a, n_b = int(xa.size), int(xb.size)
    if n_a < 2 or n_b < 2:
        raise DegenerateSamplesError("need at least two observations per sample")
    mean_a, mean_b = float(xa.mean()), float(xb.mean())
    var_a = float(xa.var(ddof=1))
    var_b = float(xb.var(ddof=1))
    if var_a == 0.0 and var_b == 0.0:
        raise DegenerateSamplesError("both samples have zero variance")

    sa, sb = var_a / n_a, var_b / n_b
    se = math.sqrt(sa + sb)
    t = (mean_a - mean_b) / se
    df = (sa + sb) ** 2 / (sa * sa / (n_a - 1) + sb * sb / (n_b - 1))
    return WelchResult(
        t=t,
        df=df,
        p_value=student_t_sf(t, df),
        mean_a=mean_a,
        mean_b=mean_b,
        var_a=var_a,
        var_b=var_b,
        n_a=n_a,
        n_b=n_b,
    )


def write_summary_csv(path: str | Path, summary: RtatSummary) -> None:
    """Write ``finding,n,mean_rtat,median_rtat,p95_rtat,max_rtat`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["finding", "n", "mean_rtat", "median_rtat", "p95_rtat", "max_rtat"])
        for category, s in summary.categories.items():
            if s.n == 0:
                writer.writerow([category, 0, "", "", "", ""])
            else:
                writer.writerow(
                    [
                        category, s.n, f"{s.mean:.4f}", f"{s.median:.4f}",
                        f"{s.p95:.4f}", f"{s.max:.4f}",
                    ]
                )
