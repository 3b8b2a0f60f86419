"""Counting kernels behind detection-cost sweeps and DET curves.

Two interchangeable backends compute per-cell miss/false-alarm counts at a
grid of candidate thresholds: a numba @njit single-pass kernel and a pure
numpy searchsorted fallback. Both return identical int64 counts, so every
result downstream is bit-reproducible regardless of backend.

Backend selection: numba when importable, unless the environment variable
CTSEVAL_NUMBA is set to 0/false/off. `set_backend()` overrides at runtime
(used by the benchmark and the cross-backend tests).
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE_TOKENS = {"0", "false", "off", "no"}

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    _HAVE_NUMBA = False


def _counts_numpy(
    scores: np.ndarray,
    is_target: np.ndarray,
    cell: np.ndarray,
    n_cells: int,
    thresholds: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    # scores ascending; per cell the masked subarrays stay sorted
    k = thresholds.shape[0]
    miss = np.empty((n_cells, k), dtype=np.int64)
    below_non = np.empty((n_cells, k), dtype=np.int64)
    n_non = np.zeros(n_cells, dtype=np.int64)
    for c in range(n_cells):
        in_cell = cell == c
        tgt_scores = scores[in_cell & is_target]
        non_scores = scores[in_cell & ~is_target]
        n_non[c] = non_scores.shape[0]
        miss[c] = np.searchsorted(tgt_scores, thresholds, side="left")
        below_non[c] = np.searchsorted(non_scores, thresholds, side="left")
    fa = n_non[:, None] - below_non
    return miss, fa


if _HAVE_NUMBA:

    @njit(cache=True)
    def _counts_numba(scores, is_target, cell, n_cells, thresholds):  # pragma: no cover
        n = scores.shape[0]
        k = thresholds.shape[0]
        miss = np.zeros((n_cells, k), dtype=np.int64)
        below_non = np.zeros((n_cells, k), dtype=np.int64)
        n_tgt = np.zeros(n_cells, dtype=np.int64)
        n_non = np.zeros(n_cells, dtype=np.int64)
        for i in range(n):
            if is_target[i]:
                n_tgt[cell[i]] += 1
            else:
                n_non[cell[i]] += 1
        run_tgt = np.zeros(n_cells, dtype=np.int64)
        run_non = np.zeros(n_cells, dtype=np.int64)
        i = 0
        for j in range(k):
            theta = thresholds[j]
            while i < n and scores[i] < theta:
                c = cell[i]
                if is_target[i]:
                    run_tgt[c] += 1
                else:
                    run_non[c] += 1
                i += 1
            for c in range(n_cells):
                miss[c, j] = run_tgt[c]
                below_non[c, j] = run_non[c]
        fa = np.empty((n_cells, k), dtype=np.int64)
        for c in range(n_cells):
            for j in range(k):
                fa[c, j] = n_non[c] - below_non[c, j]
        return miss, fa


_BACKENDS = {"numpy": _counts_numpy}
if _HAVE_NUMBA:
    _BACKENDS["numba"] = _counts_numba


def _default_backend() -> str:
    flag = os.environ.get("CTSEVAL_NUMBA", "").strip().lower()
    if flag in _DISABLE_TOKENS or not _HAVE_NUMBA:
        return "numpy"
    return "numba"


_active = _default_backend()


def get_backend() -> str:
    return _active


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {sorted(_BACKENDS)}")
    _active = name


def candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Sweep candidates: midpoints of adjacent unique scores plus -inf/+inf.

    Midpoints avoid thresholds that coincide with observed scores, so the
    accept-at-ties rule never becomes ambiguous mid-sweep.
    """
    uniq = np.unique(np.asarray(scores, dtype=np.float64))
    mid = (uniq[:-1] + uniq[1:]) * 0.5
    return np.concatenate(([-np.inf], mid, [np.inf]))


def cell_error_counts(
    scores: np.ndarray,
    is_target: np.ndarray,
    cell: np.ndarray | None,
    n_cells: int,
    thresholds: np.ndarray,
    assume_sorted: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell (miss, fa) counts at each threshold; accept rule is LLR >= theta.

    miss[c, j] = #targets in cell c with score <  thresholds[j]
    fa[c, j]   = #nontargets in cell c with score >= thresholds[j]

    `thresholds` must be ascending (candidate_thresholds output qualifies).
    Pass cell=None for a single pooled cell.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    is_target = np.ascontiguousarray(is_target, dtype=np.bool_)
    thresholds = np.ascontiguousarray(thresholds, dtype=np.float64)
    if cell is None:
        cell = np.zeros(scores.shape[0], dtype=np.int64)
        n_cells = 1
    else:
        cell = np.ascontiguousarray(cell, dtype=np.int64)
    if not assume_sorted:
        order = np.argsort(scores, kind="stable")
        scores = scores[order]
        is_target = is_target[order]
        cell = cell[order]
    return _BACKENDS[_active](scores, is_target, cell, n_cells, thresholds)
