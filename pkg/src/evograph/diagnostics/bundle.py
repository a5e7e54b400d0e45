"""Assemble feature and subnode diagnostics plus context for a scored graph."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph.model import OUTPUT
from ..scorer.metrics import roc_auc
from .features import GlobalFit, effective_rank, feature_diagnostics
from .subnodes import subnode_aggregates, toon_depth
from .toon import ToonReport, emit_toon

SCORING_NOTE = "configuration-based (best config AUC = graph score)"


@dataclass
class DiagnosticsBundle:
    context: dict
    features: list  # FeatureDiag
    subnodes: list  # SubnodeDiag
    global_fit: GlobalFit

    def toon_report(self, max_features: int | None = None, max_subnodes: int | None = None) -> ToonReport:
        return ToonReport(self.context, self.features[:max_features], self.subnodes[:max_subnodes],
                          len(self.features), len(self.subnodes))

    def toon(self, max_features: int | None = None, max_subnodes: int | None = None) -> str:
        return emit_toon(self.toon_report(max_features, max_subnodes))

    def to_json(self) -> dict:
        return {"context": self.context, "features": [f.to_json() for f in self.features],
                "subnodes": [s.to_json() for s in self.subnodes]}


def build_diagnostics(report, dataset, sc=None, stats_graph=None) -> DiagnosticsBundle:
    """Diagnostics for the best configuration of ``report``."""
    from ..scorer.pipeline import ScorerConfig

    sc = sc or ScorerConfig()
    graph = report.graph
    best = report.best
    y = dataset.labels
    X = report.best_matrix
    depths = [toon_depth(graph, graph.alt_index[o], best.config) for o in best.owners]
    features, fit = feature_diagnostics(
        X, y, best.columns, best.cv.fold_coefficients, report.best_weights, report.best_g,
        depths, sc.alpha_grid, irls_iters=sc.irls_iters, irls_floor=sc.irls_weight_floor,
        residual=best.cv.oof_residual)
    subnodes = subnode_aggregates(graph, report, stats_graph)

    scores = [c.mean_auc for c in report.scored]
    kept = fit.Xs[:, np.any(fit.Xs != 0, axis=0)]
    try:
        erank = effective_rank(kept) if kept.size else 0.0
    except ValueError:
        erank = 0.0
    try:
        global_auc = roc_auc(fit.prediction, y)
    except ValueError:
        global_auc = 0.5
    n_globals_node = 1 if len(graph.globals) else 0
    context = {
        "scoring": SCORING_NOTE,
        "best_config_auc": float(report.best_score),
        "config_auc_range": [float(min(scores)), float(max(scores))],
        "global_ridge_auc": float(global_auc),
        "fold_auc_std": float(np.std(best.fold_aucs)),
        "effective_rank": float(erank),
        "mean_max_corr": float(np.mean([f.max_corr for f in features])) if features else 0.0,
        "n_features_global": int(sum(c.n_columns for c in report.scored)),
        "n_features_best_config": int(best.n_columns),
        "n_configs": len(report.per_config),
        "n_output_alts": len(graph.alternatives(OUTPUT)),
        "n_clusters": len({f.cluster for f in features}),
        "n_nodes": len(graph.nodes) + n_globals_node,
        "max_depth": max(graph.max_depth() - 1, 0),
        "total_alternatives": graph.total_alternatives,
        "multi_alt_nodes": sum(1 for n, alts in graph.nodes.items() if n != OUTPUT and len(alts) >= 2),
    }
    return DiagnosticsBundle(context, features, subnodes, fit)
