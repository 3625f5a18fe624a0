"""Time-of-day conditioned empirical distributions for inter-exam deltas.

Two such distributions drive the simulation: one for the gaps between
consecutive exam creations, one for the gaps between consecutive report
finalizations (which implicitly include pauses and interruptions). Both are
hour-of-day binned histograms that can be loaded from observation CSVs or
synthesized from a calibrated default profile.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TimeOfDayDistribution",
    "SyntheticProfile",
    "DistributionPair",
    "EmptyBinError",
    "CalibrationError",
    "DEFAULT_OUTLIER_CUTOFF_MIN",
    "DEFAULT_PROFILE",
    "load_distribution",
    "synthesize_default",
    "default_distributions",
    "sample_delta",
]

MINUTES_PER_DAY = 1440.0

#: Deltas above this many minutes are treated as outliers and dropped.
DEFAULT_OUTLIER_CUTOFF_MIN = 150.0

# Seed for the shipped synthetic histograms. Fixed so that the default
# distributions are the same artifact in every run, independent of the
# simulation seed, exactly as a shipped data file would be.
_SYNTHETIC_SUPPORT_SEED = 91405219


class EmptyBinError(ValueError):
    """An hour-of-day bin ended up with no observations."""

    def __init__(self, hour: int, message: str | None = None):
        self.hour = hour
        super().__init__(message or f"no usable deltas for hour {hour:02d}")


class CalibrationError(ValueError):
    """A synthetic profile cannot meet its calibration targets."""


@dataclass(frozen=True)
class TimeOfDayDistribution:
    """24 hour-binned histograms of positive delta values (minutes).

    ``values[h]`` holds the support of bin ``h`` and ``cumweights[h]`` its
    cumulative sampling weights (last entry 1.0). Instances are immutable
    after construction; concurrent sampling is safe with per-caller random
    streams.
    """

    values: tuple[np.ndarray, ...]
    cumweights: tuple[np.ndarray, ...]
    source: str
    outlier_cutoff_min: float = DEFAULT_OUTLIER_CUTOFF_MIN
    discarded: int = 0

    def __post_init__(self) -> None:
        if len(self.values) != 24 or len(self.cumweights) != 24:
            raise ValueError("expected 24 hour bins")
        for hour, vals in enumerate(self.values):
            if len(vals) == 0:
                raise EmptyBinError(hour)
            if np.any(vals <= 0.0) or np.any(vals > self.outlier_cutoff_min):
                raise ValueError(
                    f"hour {hour:02d}: deltas must lie in (0, {self.outlier_cutoff_min}]"
                )

    def bin_mean(self, hour: int) -> float:
        """Weighted mean delta of one hour bin."""
        w = np.diff(self.cumweights[hour], prepend=0.0)
        return float(np.dot(self.values[hour], w))

    def hourly_rates(self) -> np.ndarray:
        """Expected events per hour implied by each bin's mean delta."""
        return np.array([60.0 / self.bin_mean(h) for h in range(24)])

    def daily_total(self) -> float:
        """Expected events per day implied by the bin means."""
        return float(self.hourly_rates().sum())


def _build(
    per_hour: list[list[float]],
    weights: list[list[float]] | None,
    source: str,
    cutoff: float,
    discarded: int,
) -> TimeOfDayDistribution:
    values = []
    cums = []
    for hour in range(24):
        vals = np.asarray(per_hour[hour], dtype=float)
        if vals.size == 0:
            raise EmptyBinError(hour)
        if weights is None:
            w = np.full(vals.size, 1.0 / vals.size)
        else:
            w = np.asarray(weights[hour], dtype=float)
            w = w / w.sum()
        values.append(vals)
        cum = np.cumsum(w)
        cum[-1] = 1.0
        cums.append(cum)
    return TimeOfDayDistribution(
        values=tuple(values),
        cumweights=tuple(cums),
        source=source,
        outlier_cutoff_min=cutoff,
        discarded=discarded,
    )


def from_bins(
    per_hour: dict[int, list[float]] | list[list[float]],
    source: str = "inline",
    cutoff: float = DEFAULT_OUTLIER_CUTOFF_MIN,
    weights: dict[int, list[float]] | None = None,
) -> TimeOfDayDistribution:
    """Build a distribution directly from per-hour delta lists.

    A dict input may give fewer than 24 entries only if it covers all hours
    (missing hours raise). Intended for tests and programmatic setups.
    """
    if isinstance(per_hour, dict):
        rows = [list(per_hour.get(h, [])) for h in range(24)]
    else:
        rows = [list(v) for v in per_hour]
    wrows = None
    if weights is not None:
        wrows = [list(weights.get(h, [])) for h in range(24)]
    return _build(rows, wrows, source, cutoff, discarded=0)


def load_distribution(
    path: str | Path, cutoff: float = DEFAULT_OUTLIER_CUTOFF_MIN
) -> TimeOfDayDistribution:
    """Load an ``hour,delta_min`` observation CSV into hour bins.

    Deltas above ``cutoff`` are discarded and counted in the returned
    distribution's ``discarded`` field. Raises ``FileNotFoundError`` for a
    missing file and ``EmptyBinError`` if any hour has no usable deltas,
    since such data cannot drive a 24-hour simulation.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"distribution file not found: {path}")

    per_hour: list[list[float]] = [[] for _ in range(24)]
    discarded = 0
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"hour", "delta_min"}:
            raise ValueError(f"{path}: expected header 'hour,delta_min'")
        for row in reader:
            hour = int(row["hour"])
            delta = float(row["delta_min"])
            if not 0 <= hour <= 23:
                raise ValueError(f"{path}: hour out of range: {hour}")
            if delta <= 0.0:
                raise ValueError(f"{path}: nonpositive delta: {delta}")
            if delta > cutoff:
                discarded += 1
                continue
            per_hour[hour].append(delta)
    return _build(per_hour, None, f"file:{path.name}", cutoff, discarded)


def sample_delta(
    dist: TimeOfDayDistribution, now: float, rng: np.random.Generator
) -> float:
    """Draw a delta from the hour bin containing ``now`` (minutes since start).

    Time-of-day wraps at day boundaries; the returned delta is always one of
    the stored support values of the selected bin.
    """
    hour = int((now % MINUTES_PER_DAY) // 60.0)
    vals = dist.values[hour]
    if vals.size == 1:
        return float(vals[0])
    idx = int(np.searchsorted(dist.cumweights[hour], rng.random(), side="right"))
    if idx >= vals.size:
        idx = vals.size - 1
    return float(vals[idx])


@dataclass(frozen=True)
class SyntheticProfile:
    """Per-hour mean deltas plus calibration targets for the synthetic default.

    The shipped values were tuned so that a FIFO simulation reproduces the
    observed aggregates: roughly 100 exams per day and an overall mean
    turnaround of about 80 minutes.
    """

    arrival_mean_by_hour: tuple[float, ...]
    reporting_mean_by_hour: tuple[float, ...]
    sigma: float = 0.85
    daily_volume_target: float = 100.6
    fifo_mean_rtat_target: float = 80.0
    support_per_bin: int = 60

    def __post_init__(self) -> None:
        if len(self.arrival_mean_by_hour) != 24 or len(self.reporting_mean_by_hour) != 24:
            raise ValueError("profiles need one mean per hour")
        if any(m <= 0 for m in self.arrival_mean_by_hour + self.reporting_mean_by_hour):
            raise ValueError("mean deltas must be positive")
        if self.sigma <= 0:
            raise ValueError("dispersion must be positive")


@dataclass(frozen=True)
class DistributionPair:
    """The arrivals and reporting distributions used by one simulation."""

    arrivals: TimeOfDayDistribution
    reporting: TimeOfDayDistribution


# Mean inter-arrival / inter-report deltas (minutes) by hour of day. Arrivals
# peak during the working day and nearly stop at night; reporting slows in
# the evening and overnight, so the daytime backlog drains in the early
# morning hours just as at the hospital the aggregates came from.
DEFAULT_PROFILE = SyntheticProfile(
    arrival_mean_by_hour=(
        75.0, 85.0, 95.0, 95.0, 85.0, 65.0,  # 00-05 sparse night arrivals
        12.0,                                # 06 ramp-up
        3.0, 3.0,                            # 07-08 morning spike
        7.0,                                 # 09 spike tail
        13.0, 14.0, 14.0,                    # 10-12 late morning
        14.0, 14.0, 14.0, 15.0,              # 13-16 afternoon
        16.0, 20.0,                          # 17-18 tapering
        22.0, 28.0, 34.0, 42.0, 50.0,        # 19-23 evening decline
    ),
    reporting_mean_by_hour=(
        22.0, 25.0, 28.0, 28.0, 25.0, 18.0,  # 00-05 night shift
        9.0,                                 # 06
        10.0, 10.0,                          # 07-08 slow reads during the spike
        5.8,                                 # 09 fast drain
        5.8, 5.8, 5.8,                       # 10-12 working down the spike
        6.4, 6.4, 6.4, 6.4,                  # 13-16 afternoon catch-up
        7.8, 8.6,                            # 17-18
        17.0, 23.0, 29.0, 35.0, 41.0,        # 19-23 evening slowdown
    ),
)


def _synthesize_one(
    means: tuple[float, ...],
    sigma: float,
    cutoff: float,
    support: int,
    rng: np.random.Generator,
    source: str,
) -> TimeOfDayDistribution:
    per_hour: list[list[float]] = []
    for mean in means:
        if mean >= cutoff:
            raise CalibrationError(
                f"bin mean {mean} cannot be reached below the {cutoff} min cutoff"
            )
        mu = math.log(mean) - sigma * sigma / 2.0
        raw: list[float] = []
        while len(raw) < support:
            draw = rng.lognormal(mu, sigma, size=support)
            raw.extend(float(v) for v in draw if 0.0 < v <= cutoff)
        vals = np.asarray(raw[:support])
        # Pin the realized bin mean to the profile mean so hourly rates are
        # exactly what the profile says despite truncation and sample noise.
        for _ in range(20):
            err = vals.mean() - mean
            if abs(err) < 1e-9 * mean:
                break
            vals = np.minimum(vals * (mean / vals.mean()), cutoff)
        per_hour.append(sorted(vals.tolist()))
    return _build(per_hour, None, source, cutoff, discarded=0)


def synthesize_default(
    profile: SyntheticProfile,
    rng: np.random.Generator | None = None,
    cutoff: float = DEFAULT_OUTLIER_CUTOFF_MIN,
) -> DistributionPair:
    """Build the arrivals/reporting histogram pair from a synthetic profile.

    Bin supports are discretized log-normals around the per-hour means,
    truncated at the outlier cutoff like loaded data. Raises
    ``CalibrationError`` when the profile cannot meet its targets: the
    realized arrival profile must integrate to the configured daily volume
    within 5%, and daily reporting capacity must exceed daily arrivals
    (otherwise the queue has no stable daily cycle).
    """
    if rng is None:
        rng = np.random.default_rng(_SYNTHETIC_SUPPORT_SEED)
    arrivals = _synthesize_one(
        profile.arrival_mean_by_hour, profile.sigma, cutoff,
        profile.support_per_bin, rng, "synthetic:arrivals",
    )
    reporting = _synthesize_one(
        profile.reporting_mean_by_hour, profile.sigma, cutoff,
        profile.support_per_bin, rng, "synthetic:reporting",
    )

    volume = arrivals.daily_total()
    target = profile.daily_volume_target
    if abs(volume - target) > 0.05 * target:
        raise CalibrationError(
            f"arrival profile integrates to {volume:.1f} exams/day, "
            f"target {target:.1f} ± 5%"
        )
    capacity = reporting.daily_total()
    if capacity <= volume:
        raise CalibrationError(
            f"daily reporting capacity {capacity:.1f} does not exceed "
            f"daily arrivals {volume:.1f}; the worklist cannot drain"
        )
    return DistributionPair(arrivals=arrivals, reporting=reporting)


@lru_cache(maxsize=1)
def default_distributions() -> DistributionPair:
    """The shipped calibrated synthetic distributions (a fixed artifact).

    Built once per process from a constant seed; every run sharing the
    defaults samples from the very same histograms, as with a data file.
    """
    return synthesize_default(DEFAULT_PROFILE)
