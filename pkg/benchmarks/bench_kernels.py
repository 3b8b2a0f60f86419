"""Timing comparison of the numba and numpy counting backends.

Usage: python benchmarks/bench_kernels.py [n_trials ...]

Measures the full min-cost sweep (candidate thresholds + per-cell counts)
and reports both backends side by side; CTSEVAL_NUMBA=0 environments will
only have the numpy rows.
"""

import sys
import time

import numpy as np

from ctseval import kernels


def make_data(n: int, n_cells: int = 8, seed: int = 0):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.normal(scale=3, size=n), 3)
    labels = rng.random(n) < 0.1
    cells = rng.integers(0, n_cells, size=n)
    return scores, labels, cells


def time_backend(backend: str, scores, labels, cells, n_cells: int, repeats: int = 5):
    kernels.set_backend(backend)
    thresholds = kernels.candidate_thresholds(scores)
    # one warm-up (jit compilation for numba)
    kernels.cell_error_counts(scores, labels, cells, n_cells, thresholds)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        miss, fa = kernels.cell_error_counts(scores, labels, cells, n_cells, thresholds)
        best = min(best, time.perf_counter() - t0)
    return best, (miss, fa)


def main(argv):
    sizes = [int(a) for a in argv[1:]] or [10_000, 100_000, 1_000_000]
    n_cells = 8
    print(f"{'n_trials':>10}  {'backend':>7}  {'sweep_ms':>9}  {'vs numpy':>8}")
    for n in sizes:
        scores, labels, cells = make_data(n, n_cells)
        timings = {}
        results = {}
        for backend in kernels.available_backends():
            elapsed, counts = time_backend(backend, scores, labels, cells, n_cells)
            timings[backend] = elapsed * 1e3
            results[backend] = counts
        base_ms = timings.get("numpy")
        for backend in sorted(timings, reverse=True):  # numpy first
            ms = timings[backend]
            print(f"{n:>10}  {backend:>7}  {ms:>9.2f}  {base_ms / ms:>7.2f}x")
        if len(results) == 2:
            same = all(
                np.array_equal(results["numpy"][i], results["numba"][i]) for i in (0, 1)
            )
            print(f"{'':>10}  backends agree bit-for-bit: {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
