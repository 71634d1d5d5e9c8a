"""Hierarchical time-series reconciliation with a robust covariance-box SDP."""

from .base_forecast import fit_predict
from .covariance import (
    COMPILED_KERNEL,
    CovEstimate,
    UncertaintySet,
    build_uncertainty_set,
    estimate_cov,
    shrink,
)
from .dataset import SeriesPanel, load_panel, make_panel, save_panel, synth_generate
from .evaluation import EvalReport, relative_report, score
from .hierarchy import Hierarchy, build_hierarchy, check_coherent, load_hierarchy
from .reconcile import (
    ReconciliationMatrix,
    apply_reconciliation,
    bottom_up,
    mint,
    ols,
    top_down,
)
from .robust_sdp import (
    RobustProblem,
    RobustSolution,
    build_sdp,
    inner_max_oracle,
    solve_robust,
)

__version__ = "0.1.0"

__all__ = [
    "COMPILED_KERNEL",
    "CovEstimate",
    "EvalReport",
    "Hierarchy",
    "ReconciliationMatrix",
    "RobustProblem",
    "RobustSolution",
    "SeriesPanel",
    "UncertaintySet",
    "apply_reconciliation",
    "bottom_up",
    "build_hierarchy",
    "build_sdp",
    "build_uncertainty_set",
    "check_coherent",
    "estimate_cov",
    "fit_predict",
    "inner_max_oracle",
    "load_hierarchy",
    "load_panel",
    "make_panel",
    "mint",
    "ols",
    "relative_report",
    "save_panel",
    "score",
    "shrink",
    "solve_robust",
    "synth_generate",
    "top_down",
]
