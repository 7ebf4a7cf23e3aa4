"""Nuclear-norm penalized quantile regression for panel data with
interactive fixed effects."""

from .alm import (DegenerateInputError, FitConfig, FitResult,
                  IllPosedDesignError, PanelData, alm_fit, default_lambda,
                  default_mu, objective_value)
from .baselines import IterativeFit, iterative_fit, pooled_fit, qr_small
from .linalg import SvdConvergenceError, SvdFactors, nuclear_norm, svd, svt
from .losses import check_loss, check_subgradient, prox_check
from .metrics import MetricsRow, compute_metrics, run_experiment
from .panel_io import DataError, load_panel, save_panel
from .rank import (ConeReport, RankEstimate, cone_diagnostic,
                   default_rank_threshold, estimate_rank, project_tangent)
from .simulation import (SimulationSpec, SimulationTruth, normal_quantile,
                         simulate, t2_quantile, true_beta, true_rank)

__version__ = "0.1.0"

__all__ = [
    "DegenerateInputError", "FitConfig", "FitResult", "IllPosedDesignError",
    "PanelData", "alm_fit", "default_lambda", "default_mu", "objective_value",
    "IterativeFit", "iterative_fit", "pooled_fit", "qr_small",
    "SvdConvergenceError", "SvdFactors", "nuclear_norm", "svd", "svt",
    "check_loss", "check_subgradient", "prox_check",
    "MetricsRow", "compute_metrics", "run_experiment",
    "DataError", "load_panel", "save_panel",
    "ConeReport", "RankEstimate", "cone_diagnostic", "default_rank_threshold",
    "estimate_rank", "project_tangent",
    "SimulationSpec", "SimulationTruth", "normal_quantile", "simulate",
    "t2_quantile", "true_beta", "true_rank",
]
