"""Command-line entry point: run, compare, sweep, and ttest subcommands.

Exit codes: 0 on success, 2 for configuration errors, 3 for data errors
(missing or unusable input files).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from .config import build_simulation_config, load_config_file
from .distributions import CalibrationError, EmptyBinError
from .engine import CATEGORIES, ConfigError, run_replications, run_simulation
from .experiments import (
    DEFAULT_SWEEP_GRID,
    SweepSpec,
    run_comparison,
    run_sweep,
    write_sweep_csv,
)
from .model import finding_from_name
from .stats import DegenerateSamplesError, summarize, welch_t_test

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triage-sim",
        description="Simulate a chest X-ray reporting worklist under FIFO and "
        "AI-prioritized policies and compare report turnaround times.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI config file")
        p.add_argument("--days", type=int, help="simulated days")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--max-wait", type=float, help="escalation threshold (minutes)")

    run_p = sub.add_parser("run", help="run one policy and print its summary")
    add_common(run_p)
    run_p.add_argument(
        "--policy", choices=["fifo", "prio", "prio-maxwait", "perfect"], default=None
    )
    run_p.add_argument("--op", choices=["low-fpr", "low-fnr", "perfect"], default=None)
    run_p.add_argument("--fpr", type=float, help="cut the ROC at this shared FPR")
    run_p.add_argument("--replications", type=int, default=1)
    run_p.add_argument("--trace", help="write the per-exam trace CSV here")
    run_p.add_argument("--summary", help="write the per-category summary CSV here")

    cmp_p = sub.add_parser("compare", help="run all five policies on one workload")
    add_common(cmp_p)
    cmp_p.add_argument("--out", help="write per-policy summary CSVs under this directory")

    sweep_p = sub.add_parser("sweep", help="sweep the shared classifier FPR")
    add_common(sweep_p)
    sweep_p.add_argument("--grid", help="comma-separated FPR values in [0, 1]")
    sweep_p.add_argument("--target", default="pneumothorax", help="finding to optimize")
    sweep_p.add_argument("--out", help="write fpr,mean_rtat_min CSV here")

    tt_p = sub.add_parser("ttest", help="Welch's t-test between two trace CSVs")
    tt_p.add_argument("trace_a")
    tt_p.add_argument("trace_b")
    tt_p.add_argument(
        "--finding",
        required=True,
        help="category to compare ('normal' or a finding name)",
    )
    return parser


def _load_sections(args) -> dict:
    return load_config_file(args.config) if args.config else {}


def _cfg_from_args(args, **extra):
    return build_simulation_config(
        _load_sections(args),
        days=args.days,
        seed=args.seed,
        max_wait=args.max_wait,
        **extra,
    )


def _cmd_run(args) -> int:
    cfg = _cfg_from_args(args, policy=args.policy, op_name=args.op, fpr=args.fpr)
    if args.trace:
        cfg = replace(cfg, trace_path=args.trace)
    if args.summary:
        cfg = replace(cfg, summary_path=args.summary)
    if args.replications > 1:
        result = run_replications(cfg, args.replications)
    else:
        result = run_simulation(cfg)
    summary = summarize(result)
    print(f"policy={result.policy} days={result.days} seed={result.seed} "
          f"exams={result.n_exams} escalations={result.escalations} "
          f"drain_violations={result.drain_violations}")
    print(f"{'finding':18}{'n':>8}{'mean':>10}{'median':>10}{'p95':>10}{'max':>10}")
    for category in CATEGORIES:
        s = summary[category]
        if s.n == 0:
            print(f"{category:18}{0:>8}")
        else:
            print(
                f"{category:18}{s.n:>8}{s.mean:>10.1f}{s.median:>10.1f}"
                f"{s.p95:>10.1f}{s.max:>10.0f}"
            )
    if result.exams:
        print(f"overall mean rtat: {result.overall_mean_rtat():.2f} min")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _cfg_from_args(args)
    report = run_comparison(cfg, max_wait=args.max_wait)
    print(report.render_table())
    print()
    print("Welch p-values vs FIFO:")
    print(report.render_pvalues())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        from .stats import write_summary_csv

        for name, summary in report.summaries.items():
            write_summary_csv(out / f"summary_{name.lower()}.csv", summary)
        print(f"summaries written to {out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _cfg_from_args(args)
    grid = DEFAULT_SWEEP_GRID
    if args.grid:
        try:
            grid = tuple(float(v) for v in args.grid.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad grid: {exc}") from exc
    try:
        spec = SweepSpec(grid=grid, target=finding_from_name(args.target))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sweep = run_sweep(spec, cfg)
    print(f"target={sweep.target.label} fifo_mean={sweep.fifo_mean:.2f}")
    print("fpr,mean_rtat_min")
    for fpr, mean in sweep.rows:
        print(f"{fpr:g},{mean:.4f}")
    if args.out:
        write_sweep_csv(args.out, sweep)
        print(f"sweep written to {args.out}")
    return EXIT_OK


def _read_trace_category(path: str, category: str) -> list[float]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"trace file not found: {path}")
    values: list[float] = []
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"rtat_min", "true_findings"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"{path}: not a trace CSV (needs {sorted(required)})")
        for row in reader:
            names = [n for n in row["true_findings"].split("|") if n]
            if category == "normal":
                if not names:
                    values.append(float(row["rtat_min"]))
            elif category in names:
                values.append(float(row["rtat_min"]))
    return values


def _cmd_ttest(args) -> int:
    category = args.finding.strip().lower()
    if category != "normal":
        category = finding_from_name(category).label
    a = _read_trace_category(args.trace_a, category)
    b = _read_trace_category(args.trace_b, category)
    res = welch_t_test(a, b)
    print(f"category={category} n_a={res.n_a} n_b={res.n_b}")
    print(f"t={res.t:.6g} df={res.df:.6g} p={res.p_value:.6g}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "compare": _cmd_compare,
        "sweep": _cmd_sweep,
        "ttest": _cmd_ttest,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, EmptyBinError, CalibrationError,
            DegenerateSamplesError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
