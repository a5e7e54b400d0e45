"""Synthetic structural-break dataset.

Each series is Gaussian noise around a random level and scale. Positive
series change regime at a boundary drawn from the middle of the series: the
level moves by ``mean_shift`` noise scales and the scale is multiplied or
divided by ``exp(var_shift)`` (direction chosen at random). Both shifts are
multiplied by ``magnitude``; a magnitude of 0 makes the labels uninformative.
"""
from __future__ import annotations

import numpy as np

from .tensor.dataset import Dataset

BOUNDARY_RANGE = (0.35, 0.65)


def synth_dataset(n_series: int = 400, length: int = 128, break_fraction: float = 0.3,
                  seed: int = 0, magnitude: float = 1.0, mean_shift: float = 0.8,
                  var_shift: float = 0.6) -> tuple[Dataset, dict]:
    """Return the dataset and generation metadata.

    Tensors: ``full``, ``pre``/``post`` (the series with the other segment
    zeroed), ``pre_mask``/``post_mask``, and per-series scalars ``boundary``
    (fraction of the length), ``pre_len`` and ``post_len``.
    """
    if n_series < 2 or length < 8:
        raise ValueError("need at least 2 series of length >= 8")
    if not 0.0 < break_fraction < 1.0:
        raise ValueError("break_fraction must lie strictly between 0 and 1")
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    rng = np.random.default_rng(seed)
    n_pos = int(round(n_series * break_fraction))
    labels = np.zeros(n_series, dtype=np.int64)
    labels[rng.permutation(n_series)[:n_pos]] = 1

    lo, hi = (int(np.ceil(BOUNDARY_RANGE[0] * length)), int(np.floor(BOUNDARY_RANGE[1] * length)))
    cut = rng.integers(lo, hi + 1, size=n_series)
    level = rng.standard_normal(n_series)
    scale = np.exp(0.3 * rng.standard_normal(n_series))
    noise = rng.standard_normal((n_series, length))

    pos = np.arange(length)[None, :]
    after = pos >= cut[:, None]
    jump = magnitude * mean_shift * rng.uniform(0.5, 1.5, n_series) * rng.choice([-1.0, 1.0], n_series)
    stretch = np.exp(magnitude * var_shift * rng.uniform(0.5, 1.5, n_series)
                     * rng.choice([-1.0, 1.0], n_series))
    brk = labels.astype(bool)[:, None] & after
    post_scale = np.where(brk, (scale * stretch)[:, None], scale[:, None])
    full = level[:, None] + post_scale * noise + np.where(brk, (jump * scale)[:, None], 0.0)

    pre_mask = (~after).astype(np.float32)
    post_mask = after.astype(np.float32)
    full = full.astype(np.float32)
    tensors = {
        "full": full,
        "pre": full * pre_mask,
        "post": full * post_mask,
        "pre_mask": pre_mask,
        "post_mask": post_mask,
        "boundary": (cut / length).astype(np.float32),
        "pre_len": cut.astype(np.float32),
        "post_len": (length - cut).astype(np.float32),
    }
    meta = {"n_series": n_series, "length": length, "break_fraction": break_fraction,
            "n_positive": n_pos, "seed": seed, "magnitude": magnitude,
            "mean_shift": mean_shift, "var_shift": var_shift,
            "boundary_range": list(BOUNDARY_RANGE)}
    return Dataset(tensors, labels), meta
