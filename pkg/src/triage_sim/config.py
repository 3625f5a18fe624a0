"""INI config loading and assembly of simulation configurations.

The file format is ``key = value`` lines under four sections:

    [simulation]    days, seed, flush_mode, label_mode, prevalence_file,
                    trace_csv, summary_csv
    [distributions] arrivals_file, reporting_file, outlier_cutoff_min
    [classifier]    op, fpr, points_file
    [worklist]      policy, max_wait_min, audit_csv

Everything is optional; missing values fall back to the calibrated
defaults. CLI flags override file values.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .classifier import (
    OperatingPoint,
    default_roc,
    load_operating_point,
    operating_point,
    operating_point_at_fpr,
)
from .distributions import (
    DEFAULT_OUTLIER_CUTOFF_MIN,
    DistributionPair,
    default_distributions,
    load_distribution,
)
from .engine import ConfigError, SimulationConfig
from .model import NORMAL_GATED, load_prevalence
from .worklist import DEFAULT_MAX_WAIT_MIN, FIFO, PRIO, PRIO_MAXWAIT

__all__ = ["load_config_file", "build_simulation_config", "resolve_policy"]

_SECTIONS = ("simulation", "distributions", "classifier", "worklist")

# CLI accepts "perfect" as a policy alias: priority queue + oracle classifier.
_POLICY_ALIASES = {
    "fifo": (FIFO, None),
    "prio": (PRIO, "keep"),
    "prio-maxwait": (PRIO_MAXWAIT, "keep"),
    "perfect": (PRIO, "perfect"),
}


def load_config_file(path: str | Path) -> dict[str, dict[str, str]]:
    """Read an INI config into a plain dict of sections."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    sections: dict[str, dict[str, str]] = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{name}]")
        sections[name] = dict(parser.items(name))
    return sections


def resolve_policy(name: str) -> tuple[str, str | None]:
    """Map a CLI policy name to (queue policy, operating-point override)."""
    key = name.strip().lower().replace("_", "-")
    try:
        return _POLICY_ALIASES[key]
    except KeyError:
        raise ConfigError(
            f"unknown policy {name!r}; expected one of {', '.join(_POLICY_ALIASES)}"
        ) from None


def _get(sections: dict, section: str, key: str, override=None):
    if override is not None:
        return override
    return sections.get(section, {}).get(key)


def build_simulation_config(
    sections: dict[str, dict[str, str]] | None = None,
    *,
    days: int | None = None,
    seed: int | None = None,
    policy: str | None = None,
    op_name: str | None = None,
    fpr: float | None = None,
    max_wait: float | None = None,
) -> SimulationConfig:
    """Combine a parsed config file and CLI overrides into a run config."""
    sections = sections or {}

    try:
        days_v = int(_get(sections, "simulation", "days", days) or 1000)
        seed_v = int(_get(sections, "simulation", "seed", seed) or 0)
        flush = str(_get(sections, "simulation", "flush_mode") or "force")
        label_mode = str(_get(sections, "simulation", "label_mode") or NORMAL_GATED)
        label_mode = label_mode.replace("_", "-")
        cutoff = float(
            _get(sections, "distributions", "outlier_cutoff_min")
            or DEFAULT_OUTLIER_CUTOFF_MIN
        )
        max_wait_v = float(
            _get(sections, "worklist", "max_wait_min", max_wait) or DEFAULT_MAX_WAIT_MIN
        )
    except ValueError as exc:
        raise ConfigError(f"bad numeric config value: {exc}") from exc

    policy_name = str(_get(sections, "worklist", "policy", policy) or "fifo")
    queue_policy, op_override = resolve_policy(policy_name)

    # Operating point: --fpr cuts the ROC; --op picks a built-in; a
    # points_file overrides the table; FIFO needs none.
    op_file = _get(sections, "classifier", "points_file")
    op_cfg = _get(sections, "classifier", "op", op_name)
    fpr_cfg = _get(sections, "classifier", "fpr", fpr)
    if op_cfg is not None and fpr_cfg is not None:
        raise ConfigError("give either an operating point name or an fpr, not both")

    op: OperatingPoint | None = None
    if op_override == "perfect":
        if op_cfg not in (None, "perfect") or fpr_cfg is not None:
            raise ConfigError("the perfect policy fixes its own operating point")
        op = operating_point("perfect")
    elif queue_policy != FIFO:
        try:
            if fpr_cfg is not None:
                op = operating_point_at_fpr(default_roc(), float(fpr_cfg))
            elif op_file is not None:
                op = load_operating_point(op_file)
            elif op_cfg is not None:
                op = operating_point(str(op_cfg))
            else:
                op = operating_point("low-fpr")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    arrivals_file = _get(sections, "distributions", "arrivals_file")
    reporting_file = _get(sections, "distributions", "reporting_file")
    if (arrivals_file is None) != (reporting_file is None):
        raise ConfigError("arrivals_file and reporting_file must be given together")
    if arrivals_file is not None:
        dists = DistributionPair(
            arrivals=load_distribution(arrivals_file, cutoff),
            reporting=load_distribution(reporting_file, cutoff),
        )
    else:
        dists = default_distributions()

    prevalence = load_prevalence(
        _get(sections, "simulation", "prevalence_file"), mode=label_mode
    )

    return SimulationConfig(
        days=days_v,
        seed=seed_v,
        policy=queue_policy,
        op=op,
        prevalence=prevalence,
        distributions=dists,
        max_wait_min=max_wait_v,
        flush_mode=flush,
        trace_path=_get(sections, "simulation", "trace_csv"),
        summary_path=_get(sections, "simulation", "summary_csv"),
        audit_path=_get(sections, "worklist", "audit_csv"),
    )
