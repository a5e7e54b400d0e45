"""Two-phase graph scoring: gradient refinement, then cross-validated ridge sweeps."""
from .cv import CVResult, FoldResult, cv_score, stratified_folds
from .lbfgs import LbfgsResult, minimize
from .metrics import correlation_matrix, pearson, roc_auc, spearman
from .phase1 import Phase1Result, phase1_refine, probe
from .pipeline import (ConfigResult, ScoreReport, ScorerConfig, ScoringError, evaluate_config,
                       score_graph, try_score)
from .ridge import (ALPHA_GRID, AllConstantError, RidgeFit, Standardization, irls_fit, loo_errors,
                    loo_select_alpha, normalize_weights, ridge_fit, standardize)

__all__ = [
    "ALPHA_GRID", "AllConstantError", "CVResult", "ConfigResult", "FoldResult", "LbfgsResult",
    "Phase1Result", "RidgeFit", "ScoreReport", "ScorerConfig", "ScoringError", "Standardization",
    "correlation_matrix", "cv_score", "evaluate_config", "irls_fit", "loo_errors",
    "loo_select_alpha", "minimize", "normalize_weights", "pearson", "phase1_refine", "probe",
    "ridge_fit", "roc_auc", "score_graph", "spearman", "standardize", "stratified_folds",
    "try_score",
]
