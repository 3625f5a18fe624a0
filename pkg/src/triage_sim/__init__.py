"""Discrete-event Monte-Carlo simulator of a chest X-ray reporting worklist.

Quantifies report turnaround time under FIFO, AI-prioritized, escalating,
and oracle-classifier worklist policies on a shared simulated workload.
"""

from .classifier import (
    BinormalRoc,
    DegenerateAnchorsError,
    OperatingPoint,
    classify,
    default_roc,
    fit_binormal,
    load_operating_point,
    low_fnr_point,
    low_fpr_point,
    operating_point,
    operating_point_at_fpr,
    perfect_point,
)
from .distributions import (
    CalibrationError,
    DistributionPair,
    EmptyBinError,
    SyntheticProfile,
    TimeOfDayDistribution,
    default_distributions,
    load_distribution,
    sample_delta,
    synthesize_default,
)
from .engine import (
    ConfigError,
    NonpositiveDeltaError,
    SimulationConfig,
    SimulationResult,
    Workload,
    generate_workload,
    run_replications,
    run_simulation,
    write_trace_csv,
)
from .experiments import (
    ComparisonReport,
    SweepResult,
    SweepSpec,
    run_comparison,
    run_sweep,
    write_sweep_csv,
)
from .model import (
    Exam,
    Finding,
    NORMAL_RANK,
    PrevalenceTable,
    assign_findings,
    load_prevalence,
    urgency_of,
)
from .stats import (
    DegenerateSamplesError,
    RtatSummary,
    WelchResult,
    summarize,
    welch_t_test,
    write_summary_csv,
)
from .worklist import (
    DuplicateExamError,
    EmptyWorklistError,
    Worklist,
)

__version__ = "0.1.0"
