"""Winsorized importance sampling with a balancing-principle threshold selector."""

__version__ = "0.1.0"

from .weights import Sample, WinsorSummary, is_estimate, load_weights, winsor_summary, winsorize
from .balancing import (
    BalancedResult,
    BalancingParams,
    Comparison,
    GuaranteeInputs,
    PhiVariant,
    ScanMode,
    ThresholdLadder,
    constant_c,
    guarantee_probability,
    k_bound_from_alpha,
    select_threshold,
    select_threshold_linear,
    std_normal_cdf,
)
from .cv import CvConfig, CvSelection, cv_select_threshold
from .problems import (
    BiasCurve,
    BiasMethod,
    Family,
    ISProblem,
    bias_oracle,
    draw_weights,
    make_problem,
)
from .saw import (
    KNOWN_CSAW_COUNTS,
    GridWalkState,
    SawEstimate,
    SawWalk,
    TrapPolicy,
    available_neighbors,
    enumerate_csaw,
    estimate_csaw,
    sample_walk,
    support_unbiasedness_sum,
    walk_along,
)
from .harness import (
    EstimatorRow,
    ExperimentConfig,
    ExperimentResult,
    emit_outputs,
    run_experiment,
    saw_truth,
)

__all__ = [
    "Sample",
    "WinsorSummary",
    "winsorize",
    "is_estimate",
    "winsor_summary",
    "load_weights",
    "ThresholdLadder",
    "BalancingParams",
    "BalancedResult",
    "Comparison",
    "GuaranteeInputs",
    "PhiVariant",
    "ScanMode",
    "select_threshold",
    "select_threshold_linear",
    "constant_c",
    "guarantee_probability",
    "k_bound_from_alpha",
    "std_normal_cdf",
    "CvConfig",
    "CvSelection",
    "cv_select_threshold",
    "Family",
    "ISProblem",
    "BiasCurve",
    "BiasMethod",
    "make_problem",
    "draw_weights",
    "bias_oracle",
    "TrapPolicy",
    "GridWalkState",
    "SawWalk",
    "SawEstimate",
    "available_neighbors",
    "sample_walk",
    "walk_along",
    "estimate_csaw",
    "enumerate_csaw",
    "support_unbiasedness_sum",
    "KNOWN_CSAW_COUNTS",
    "ExperimentConfig",
    "ExperimentResult",
    "EstimatorRow",
    "run_experiment",
    "emit_outputs",
    "saw_truth",
]
