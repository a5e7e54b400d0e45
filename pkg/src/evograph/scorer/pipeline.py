"""Graph scoring: Phase 1 refinement, then a cached sweep over configurations
with cross-validated ridge readouts."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..graph.configs import config_product, enumerate_configs, project
from ..graph.model import OUTPUT, RIDGE_G, RIDGE_W, Configuration, EvoGraph
from ..tensor.evaluator import EvalCache, EvalError, GraphEvaluation, output_columns
from .cv import CVResult, cv_score
from .metrics import pearson, roc_auc
from .phase1 import Phase1Result, phase1_refine
from .ridge import ALPHA_GRID


class ScoringError(RuntimeError):
    """Every configuration failed; ``failures`` keeps the per-alternative errors."""

    def __init__(self, message: str, failures=(), phase1=None):
        super().__init__(message)
        self.failures = list(failures)
        self.phase1 = phase1


@dataclass(frozen=True)
class ScorerConfig:
    n_folds: int = 3
    alpha_grid: tuple = ALPHA_GRID
    cv_seed: int = 0
    irls_iters: int = 3
    irls_weight_floor: float = 1e-6
    config_cap: int = 64
    phase1_cold_iters: int = 200
    phase1_iters: int = 20
    probe_seed: int = 0

    def __post_init__(self):
        grid = tuple(float(a) for a in self.alpha_grid)
        object.__setattr__(self, "alpha_grid", grid)
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")
        if not grid or grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("alpha_grid must be positive and strictly increasing")
        if self.config_cap < 1:
            raise ValueError("config_cap must be >= 1")

    def to_json(self) -> dict:
        d = asdict(self)
        d["alpha_grid"] = list(self.alpha_grid)
        return d

    @classmethod
    def from_json(cls, d: dict | None) -> "ScorerConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scorer settings: {sorted(unknown)}")
        if "alpha_grid" in d:
            d["alpha_grid"] = tuple(d["alpha_grid"])
        return cls(**d)


@dataclass
class ConfigResult:
    config: Configuration
    mean_auc: float | None
    fold_aucs: list
    alphas: list
    n_columns: int
    error: str | None
    evaluated: frozenset  # alternatives whose evaluation was attempted
    contributing: frozenset  # alternatives behind the scored columns and fitting rules
    cv: CVResult | None = None
    columns: list = field(default_factory=list)  # column names
    owners: list = field(default_factory=list)  # output alternative per column
    column_stats: dict = field(default_factory=dict)  # name -> {ind_auc, imp, resid_sq}

    def to_json(self) -> dict:
        return {"config": self.config.to_json(), "mean_auc": self.mean_auc,
                "fold_aucs": self.fold_aucs, "alphas": self.alphas, "n_features": self.n_columns,
                "error": self.error}


@dataclass
class ScoreReport:
    per_config: list
    best_index: int
    best_score: float
    failures: list  # (alt id, config index, message)
    phase1: Phase1Result
    n_product: int
    graph: EvoGraph  # the scored graph, globals as frozen for the sweep
    best_matrix: np.ndarray | None = None
    best_weights: np.ndarray | None = None
    best_g: object = None
    cache_stats: dict = field(default_factory=dict)

    @property
    def best(self) -> ConfigResult:
        return self.per_config[self.best_index]

    @property
    def scored(self) -> list:
        return [c for c in self.per_config if c.mean_auc is not None]

    def failed_everywhere(self) -> set:
        """Alternatives that failed in every configuration that evaluated them."""
        evaluated: dict = {}
        for c in self.per_config:
            for a in c.evaluated:
                evaluated[a] = evaluated.get(a, 0) + 1
        return {a for a, n in self.failures_by_alt().items() if n >= evaluated.get(a, 0)}

    def failures_by_alt(self) -> dict:
        """Number of configurations in which each alternative failed."""
        out: dict = {}
        for alt_id, _ in {(a, i) for a, i, _ in self.failures}:
            out[alt_id] = out.get(alt_id, 0) + 1
        return out

    def participation(self) -> list:
        return [(c.mean_auc, c.contributing) for c in self.scored]

    def to_json(self) -> dict:
        scores = [c.mean_auc for c in self.scored]
        return {
            "best_index": self.best_index,
            "best_score": self.best_score,
            "best_config": self.best.config.to_json(),
            "n_configs": len(self.per_config),
            "n_configs_product": self.n_product,
            "config_auc_range": [min(scores), max(scores)] if scores else None,
            "per_config": [c.to_json() for c in self.per_config],
            "failures": [{"alt": a, "config": i, "error": m} for a, i, m in self.failures],
            "phase1": self.phase1.to_json(),
        }


def _closure_ids(graph, alt, config) -> set:
    return {a.id for a in graph.closure(alt, config)}


def _fitting_alts(graph, config) -> list:
    return [graph.selected(n, config) for n in (RIDGE_W, RIDGE_G) if graph.nodes.get(n)]


def _column_stats(X, y, cv: CVResult, names) -> dict:
    coef = np.mean(np.abs(cv.fold_coefficients), axis=0)
    total = coef.sum()
    imp = coef / total if total > 0 else np.zeros_like(coef)
    out = {}
    for j, name in enumerate(names):
        col = X[:, j]
        std = col.std()
        ind = roc_auc(col, y) if std > 0 else 0.5
        z = (col - col.mean()) / std if std > 0 else np.zeros_like(col)
        out[name] = {"ind_auc": ind, "imp": float(imp[j]),
                     "resid_sq": pearson(z * z, cv.oof_residual)}
    return out


def evaluate_config(graph, config, dataset, sc: ScorerConfig, cache: EvalCache | None,
                    index: int, failures: list):
    """Score one configuration; returns (ConfigResult, X, weights, g)."""
    ev = GraphEvaluation(graph, config, dataset, cache)
    evaluated = set()
    for alt in graph.alternatives(OUTPUT):
        evaluated |= _closure_ids(graph, alt, config)
    for alt in _fitting_alts(graph, config):
        evaluated |= _closure_ids(graph, alt, config)
    results, out_failures = output_columns(ev)
    for _, origin, msg in out_failures:
        failures.append((origin, index, msg))

    def failed(msg, origin=None):
        if origin:
            failures.append((origin, index, msg))
        return ConfigResult(config, None, [], [], 0, msg, frozenset(evaluated), frozenset()), None, None, None

    if not results:
        return failed("all outputs failed" if out_failures else "graph has no output alternatives")
    contributing = set()
    cols, names, owners = [], [], []
    n = dataset.n_samples
    for alt, value in results:
        v = np.asarray(value, dtype=np.float64).reshape(n, -1)
        cols.append(v)
        names.extend([alt.id] if np.ndim(value) == 1 else [f"{alt.id}[{j}]" for j in range(v.shape[1])])
        owners.extend([alt.id] * v.shape[1])
        contributing |= _closure_ids(graph, alt, config)
    X = np.concatenate(cols, axis=1)

    weights = None
    if graph.nodes.get(RIDGE_W):
        walt = graph.selected(RIDGE_W, config)
        try:
            raw = np.asarray(ev.node(RIDGE_W), dtype=np.float64)
        except EvalError as exc:
            return failed(f"ridge_w: {exc.message}", exc.alt_id or walt.id)
        if raw.size != n:
            return failed(f"ridge_w has shape {raw.shape}, expected ({n},)", walt.id)
        weights = np.maximum(raw.reshape(n), 0.0)
        if weights.sum() <= 0:
            return failed("ridge_w weights are all zero", walt.id)
        contributing |= _closure_ids(graph, walt, config)

    g = None
    g_errors: list = []
    if graph.nodes.get(RIDGE_G):
        galt = graph.selected(RIDGE_G, config)
        ev64 = GraphEvaluation(graph, config, dataset, None, np.float64)

        def g(r, _alt=galt, _ev=ev64):
            try:
                return np.asarray(_ev.call(_alt, [np.asarray(r, dtype=np.float64)]), dtype=np.float64)
            except EvalError as exc:
                g_errors.append(exc)
                raise
        contributing |= _closure_ids(graph, galt, config)

    y = dataset.labels
    try:
        cv = cv_score(X, y, sc.n_folds, sc.cv_seed, sc.alpha_grid, weights, g, sc.irls_iters,
                      sc.irls_weight_floor)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return failed(f"cross-validation failed: {exc}")
    if g_errors:
        failures.append((g_errors[0].alt_id or galt.id, index, f"ridge_g: {g_errors[0].message}"))
        if all(f.irls_fallback for f in cv.folds if f.fit is not None):
            contributing.discard(galt.id)
    result = ConfigResult(config, cv.mean_auc, cv.fold_aucs, [f.alpha for f in cv.folds],
                          X.shape[1], None, frozenset(evaluated), frozenset(contributing), cv,
                          names, owners, _column_stats(X, y, cv, names))
    return result, X, weights, g


def score_graph(graph: EvoGraph, dataset, sc: ScorerConfig | None = None,
                phase1_iters: int | None = None, rng: np.random.Generator | None = None,
                incumbent: Configuration | None = None) -> ScoreReport:
    """Refine globals on the incumbent path, then score up to ``config_cap`` configurations."""
    sc = sc or ScorerConfig()
    iters = sc.phase1_iters if phase1_iters is None else phase1_iters
    path = project(graph, incumbent if incumbent is not None else graph.incumbent)
    if iters > 0:
        p1 = phase1_refine(graph, path, dataset, iters, sc.probe_seed)
    else:
        p1 = Phase1Result(graph.globals, True, "disabled", 0)
    frozen = graph.with_globals(p1.store)
    configs = enumerate_configs(frozen, sc.config_cap, incumbent, rng)
    cache = EvalCache()
    per_config, failures = [], []
    best_i, best_score, best_x, best_w, best_g = -1, -np.inf, None, None, None
    for i, cfg in enumerate(configs):
        res, X, w, g = evaluate_config(frozen, cfg, dataset, sc, cache, i, failures)
        per_config.append(res)
        if res.mean_auc is not None and res.mean_auc > best_score:
            best_i, best_score, best_x, best_w, best_g = i, res.mean_auc, X, w, g
    if best_i < 0:
        first = per_config[0].error if per_config else "no configurations"
        raise ScoringError(f"all configurations failed (first: {first})", failures, p1)
    return ScoreReport(per_config, best_i, float(best_score), failures, p1,
                       config_product(frozen), frozen, best_x, best_w, best_g,
                       {"entries": len(cache), "hits": cache.hits,
                        "recomputations": cache.recomputations})


def try_score(graph, dataset, sc=None, **kw):
    """score_graph that returns ``(report, None)`` or ``(None, error text)``."""
    try:
        return score_graph(graph, dataset, sc, **kw), None
    except ScoringError as exc:
        return None, str(exc)
