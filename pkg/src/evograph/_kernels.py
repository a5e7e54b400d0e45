"""Hot inner loops with a numba path and a pure-numpy path.

The numba versions are used when numba imports and ``EVOGRAPH_NUMBA`` is not
set to ``0``. Both paths are always importable (``*_numpy`` / ``*_numba``) so
tests can check they agree and benchmarks can compare them.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("EVOGRAPH_NUMBA", "1") != "0"


# --- tie-averaged ranks ----------------------------------------------------

def average_ranks_numpy(x: np.ndarray) -> np.ndarray:
    """1-based ranks, ties share the mean of the ranks they span."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # boundaries of runs of equal values
    new_run = np.empty(len(xs), dtype=bool)
    if len(xs):
        new_run[0] = True
        new_run[1:] = xs[1:] != xs[:-1]
    starts = np.flatnonzero(new_run)
    ends = np.append(starts[1:], len(xs))
    avg = (starts + ends + 1) / 2.0  # mean of (start+1 .. end)
    run_id = np.cumsum(new_run) - 1
    ranks = np.empty(len(xs), dtype=np.float64)
    ranks[order] = avg[run_id]
    return ranks


@njit(cache=True)
def _average_ranks_sorted(xs, order, out):
    n = xs.shape[0]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and xs[j + 1] == xs[i]:
            j += 1
        r = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            out[order[k]] = r
        i = j + 1


def average_ranks_numba(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    out = np.empty(len(x), dtype=np.float64)
    _average_ranks_sorted(x[order], order, out)
    return out


def mann_whitney_u_numpy(scores: np.ndarray, labels: np.ndarray) -> tuple[float, int, int]:
    """Return (U, n_pos, n_neg) where U counts positive>negative pairs, ties ½."""
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    ranks = average_ranks_numpy(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u), n_pos, n_neg


@njit(cache=True)
def _rank_sum_sorted(xs, lab_sorted):
    n = xs.shape[0]
    total = 0.0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and xs[j + 1] == xs[i]:
            j += 1
        r = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            if lab_sorted[k] == 1:
                total += r
        i = j + 1
    return total


def mann_whitney_u_numba(scores: np.ndarray, labels: np.ndarray) -> tuple[float, int, int]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    n_pos = int((labels == 1).sum())
    n_neg = len(labels) - n_pos
    order = np.argsort(scores, kind="mergesort")
    rsum = _rank_sum_sorted(scores[order], labels[order])
    return float(rsum - n_pos * (n_pos + 1) / 2.0), n_pos, n_neg


# --- dilated valid 1-D convolution (cross-correlation) ----------------------
# x: (n, L), w: (k, m) -> out (n, k, L - (m - 1) * dilation)

def conv1d_numpy(x: np.ndarray, w: np.ndarray, dilation: int) -> np.ndarray:
    n, length = x.shape
    k, m = w.shape
    out_len = length - (m - 1) * dilation
    taps = np.stack([x[:, j * dilation: j * dilation + out_len] for j in range(m)], axis=1)
    return np.einsum("nmt,km->nkt", taps, w, optimize=False)


def conv1d_backward_numpy(g: np.ndarray, x: np.ndarray, w: np.ndarray, dilation: int):
    n, length = x.shape
    k, m = w.shape
    out_len = g.shape[2]
    gx = np.zeros_like(x)
    gw = np.zeros_like(w)
    for j in range(m):
        lo = j * dilation
        xs = x[:, lo: lo + out_len]
        gx[:, lo: lo + out_len] += np.einsum("nkt,k->nt", g, w[:, j])
        gw[:, j] = np.einsum("nkt,nt->k", g, xs)
    return gx, gw


@njit(cache=True)
def _conv1d_kernel(x, w, dilation, out):
    n = x.shape[0]
    k, m = w.shape
    out_len = out.shape[2]
    for a in range(n):
        for b in range(k):
            for t in range(out_len):
                acc = 0.0
                for j in range(m):
                    acc += w[b, j] * x[a, t + j * dilation]
                out[a, b, t] = acc


@njit(cache=True)
def _conv1d_backward_kernel(g, x, w, dilation, gx, gw):
    n = x.shape[0]
    k, m = w.shape
    out_len = g.shape[2]
    for a in range(n):
        for b in range(k):
            for t in range(out_len):
                gv = g[a, b, t]
                if gv == 0.0:
                    continue
                for j in range(m):
                    gx[a, t + j * dilation] += gv * w[b, j]
                    gw[b, j] += gv * x[a, t + j * dilation]


def conv1d_numba(x: np.ndarray, w: np.ndarray, dilation: int) -> np.ndarray:
    n, length = x.shape
    k, m = w.shape
    out = np.empty((n, k, length - (m - 1) * dilation), dtype=np.result_type(x, w))
    _conv1d_kernel(np.ascontiguousarray(x), np.ascontiguousarray(w), int(dilation), out)
    return out


def conv1d_backward_numba(g: np.ndarray, x: np.ndarray, w: np.ndarray, dilation: int):
    gx = np.zeros_like(x)
    gw = np.zeros_like(w)
    _conv1d_backward_kernel(np.ascontiguousarray(g), np.ascontiguousarray(x),
                            np.ascontiguousarray(w), int(dilation), gx, gw)
    return gx, gw


if USE_NUMBA:
    average_ranks = average_ranks_numba
    mann_whitney_u = mann_whitney_u_numba
    conv1d = conv1d_numba
    conv1d_backward = conv1d_backward_numba
else:
    average_ranks = average_ranks_numpy
    mann_whitney_u = mann_whitney_u_numpy
    conv1d = conv1d_numpy
    conv1d_backward = conv1d_backward_numpy
