"""Per-feature diagnostics from a global ridge fit on the best configuration."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..scorer.metrics import correlation_matrix, pearson, roc_auc, spearman
from ..scorer.ridge import ALPHA_GRID, AllConstantError, RidgeFit, irls_fit, loo_select_alpha, standardize

HIGH_CORR = 0.9
CLUSTER_CORR = 0.95
STAB_EPS = 1e-12


@dataclass
class FeatureDiag:
    name: str
    depth: int
    ind_auc: float
    imp: float
    sign: str
    corr: float
    max_corr: float
    n_hi_corr: int
    most_corr: str
    cluster: int
    cl_size: int
    resid_corr: float
    resid_sq: float
    w_stab: float
    effect_size: float = 0.0
    shap_row_checksum: float = 0.0  # mean |phi| over samples

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class GlobalFit:
    """The global readout: coefficients per column on the standardised scale."""
    fit: RidgeFit | None
    coefficients: np.ndarray  # zero for constant columns
    intercept: float
    Xs: np.ndarray  # standardised matrix, constant columns as zeros
    prediction: np.ndarray
    residual: np.ndarray
    alpha: float


def global_fit(X, y, weights=None, g=None, alpha_grid=ALPHA_GRID, irls_iters: int = 3,
               irls_floor: float = 1e-6) -> GlobalFit:
    """Standardise, choose alpha by LOO and fit the readout on every sample."""
    X = np.asarray(X, dtype=np.float64)
    yf = np.asarray(y, dtype=np.float64).ravel()
    n, p = X.shape
    coef = np.zeros(p)
    Xs = np.zeros((n, p))
    try:
        st = standardize(X)
    except AllConstantError:
        mean = float(np.average(yf, weights=weights))
        pred = np.full(n, mean)
        return GlobalFit(None, coef, mean, Xs, pred, yf - pred, float("nan"))
    Xs[:, st.kept] = st.Xs
    alpha, _ = loo_select_alpha(st.Xs, yf, alpha_grid, weights)
    fit = irls_fit(st.Xs, yf, alpha, weights, g, irls_iters, irls_floor)
    coef[st.kept] = fit.coefficients
    pred = Xs @ coef + fit.intercept
    return GlobalFit(fit, coef, fit.intercept, Xs, pred, yf - pred, alpha)


def shap_values(coefficients, Xs) -> tuple[np.ndarray, float]:
    """Exact linear attributions ``beta_j * (x_ij - mean_j)`` and their base value.

    Each row plus the base value reproduces the linear prediction minus its
    intercept, so ``phi.sum(1) + base + intercept == Xs @ beta + intercept``.
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    beta = np.asarray(coefficients, dtype=np.float64)
    mean = Xs.mean(axis=0)
    return beta * (Xs - mean), float(mean @ beta)


def importance(coefficients) -> np.ndarray:
    a = np.abs(np.asarray(coefficients, dtype=np.float64))
    total = a.sum()
    return a / total if total > 0 else np.zeros_like(a)


def effect_size(column, y) -> float:
    """|mean difference between classes| over the pooled standard deviation."""
    col = np.asarray(column, dtype=np.float64)
    y = np.asarray(y).ravel()
    pos, neg = col[y == 1], col[y == 0]
    if len(pos) < 2 or len(neg) < 2:
        return 0.0
    pooled = ((len(pos) - 1) * pos.var(ddof=1) + (len(neg) - 1) * neg.var(ddof=1)) \
        / (len(pos) + len(neg) - 2)
    if pooled <= 0:
        return 0.0
    return float(abs(pos.mean() - neg.mean()) / np.sqrt(pooled))


def weight_stability(fold_coefficients) -> np.ndarray:
    """Per-column std / (|mean| + eps) of coefficients across folds."""
    c = np.asarray(fold_coefficients, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] == 0:
        return np.zeros(c.shape[-1] if c.ndim else 0)
    return c.std(axis=0) / (np.abs(c.mean(axis=0)) + STAB_EPS)


def effective_rank(Xs) -> float:
    """Entropy effective rank of the singular value spectrum."""
    s = np.linalg.svd(np.asarray(Xs, dtype=np.float64), compute_uv=False)
    total = s.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError("effective rank of a zero matrix is undefined")
    p = s[s > 0] / total
    return float(np.exp(-np.sum(p * np.log(p))))


def _clusters(C: np.ndarray, threshold: float) -> np.ndarray:
    """Union-find over pairs with |corr| >= threshold; ids by first appearance."""
    p = C.shape[0]
    parent = list(range(p))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    rows, cols = np.nonzero(np.triu(np.abs(C) >= threshold, k=1))
    for i, j in zip(rows, cols):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    ids, out = {}, np.empty(p, dtype=np.int64)
    for i in range(p):
        out[i] = ids.setdefault(find(i), len(ids))
    return out


def redundancy(X) -> dict:
    """Inter-feature |Pearson| summaries: max, argmax, high-correlation count, clusters."""
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    if p < 2:
        return {"max_corr": np.zeros(p), "most_corr": [-1] * p, "n_hi_corr": np.zeros(p, int),
                "cluster": np.arange(p), "cl_size": np.ones(p, int)}
    C = correlation_matrix(X)
    A = np.abs(C)
    np.fill_diagonal(A, -1.0)
    most = A.argmax(axis=1)
    max_corr = A[np.arange(p), most]
    n_hi = (A >= HIGH_CORR).sum(axis=1)
    cluster = _clusters(C, CLUSTER_CORR)
    sizes = np.bincount(cluster)
    return {"max_corr": max_corr, "most_corr": most.tolist(), "n_hi_corr": n_hi,
            "cluster": cluster, "cl_size": sizes[cluster]}


def feature_diagnostics(X, y, names, fold_coefficients=None, weights=None, g=None,
                        depths=None, alpha_grid=ALPHA_GRID, fit: GlobalFit | None = None,
                        irls_iters: int = 3, irls_floor: float = 1e-6,
                        residual=None) -> tuple[list, GlobalFit]:
    """Diagnostic record per column of ``X`` plus the global fit they derive from.

    ``residual`` defaults to the in-sample residual of the global fit. That
    residual is nearly orthogonal to every column, so callers with
    cross-validation artifacts pass the out-of-fold residual instead.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).ravel()
    n, p = X.shape
    if len(names) != p:
        raise ValueError(f"{len(names)} names for {p} columns")
    if fit is None:
        fit = global_fit(X, y, weights, g, alpha_grid, irls_iters, irls_floor)
    imp = importance(fit.coefficients)
    red = redundancy(X)
    stab = weight_stability(fold_coefficients) if fold_coefficients is not None else np.zeros(p)
    phi, _ = shap_values(fit.coefficients, fit.Xs)
    depths = [0] * p if depths is None else list(depths)
    resid = fit.residual if residual is None else np.asarray(residual, dtype=np.float64)
    out = []
    for j in range(p):
        col = X[:, j]
        z = fit.Xs[:, j]
        constant = col.std() < 1e-12
        out.append(FeatureDiag(
            name=names[j],
            depth=int(depths[j]),
            ind_auc=0.5 if constant else roc_auc(col, y),
            imp=float(imp[j]),
            sign="-" if fit.coefficients[j] < 0 else "+",
            corr=spearman(col, y),
            max_corr=float(red["max_corr"][j]),
            n_hi_corr=int(red["n_hi_corr"][j]),
            most_corr=names[red["most_corr"][j]] if red["most_corr"][j] >= 0 else "",
            cluster=int(red["cluster"][j]),
            cl_size=int(red["cl_size"][j]),
            resid_corr=pearson(col, resid),
            resid_sq=pearson(z * z, resid),
            w_stab=float(stab[j]),
            effect_size=effect_size(col, y),
            shap_row_checksum=float(np.mean(np.abs(phi[:, j]))),
        ))
    return out, fit
