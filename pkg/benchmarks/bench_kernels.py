"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from evograph import _kernels as k


def cases(rng):
    scores = rng.normal(size=20_000).round(2)  # rounding forces ties
    labels = (rng.random(20_000) < 0.3).astype(np.int64)
    x = rng.normal(size=(400, 128))
    w = rng.normal(size=(4, 5))
    g = rng.normal(size=(400, 4, 128 - 4 * 2))
    return [
        ("average_ranks", lambda: k.average_ranks_numpy(scores), lambda: k.average_ranks_numba(scores)),
        ("mann_whitney_u", lambda: k.mann_whitney_u_numpy(scores, labels),
         lambda: k.mann_whitney_u_numba(scores, labels)),
        ("conv1d", lambda: k.conv1d_numpy(x, w, 2), lambda: k.conv1d_numba(x, w, 2)),
        ("conv1d_backward", lambda: k.conv1d_backward_numpy(g, x, w, 2),
         lambda: k.conv1d_backward_numba(g, x, w, 2)),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not k.NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return
    print(f"{'kernel':<18}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, f_np, f_nb in cases(np.random.default_rng(0)):
        f_nb()  # compile outside the timed region
        t_np = min(timeit.repeat(f_np, number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(f_nb, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18}{t_np:>10.3f}{t_nb:>10.3f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
