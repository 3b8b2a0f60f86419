"""Detection error rates and normalized detection costs.

The normalized cost at a threshold theta is

    c_norm(theta) = p_miss(theta) + beta * p_fa(theta),
    beta = (c_fa / c_miss) * (1 - p_target) / p_target,

with the accept rule LLR >= theta (ties accept). Actual costs are evaluated
at the fixed threshold theta = ln(beta), per condition cell, then averaged
per source and across sources. Minimum costs equalize the per-cell trial
counts, pool each source, and sweep a single threshold over the midpoints
of adjacent unique scores plus -inf/+inf sentinels.

Per-cell error rates are exact integer-count ratios, which makes the
equalization invariant exact: replicating every trial of a cell k times
changes neither the candidate set nor any count/total quotient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .kernels import candidate_thresholds, cell_error_counts
from .trialset import ALL_CELLS, CELLS_PER_SOURCE, SOURCES, ConditionCell, TrialSetManifest


class EmptyClassError(ValueError):
    """Raised when an error rate is undefined because a class has no trials."""

    def __init__(self, class_name: str):
        self.class_name = class_name
        super().__init__(f"undefined error rate: no {class_name} trials")


class EmptyCellError(ValueError):
    """Raised by official aggregation when a condition cell lacks a class."""

    def __init__(self, cells: Sequence[ConditionCell]):
        self.cells = tuple(cells)
        names = ", ".join(str(c) for c in self.cells)
        super().__init__(f"empty condition cell(s): {names}")


@dataclass(frozen=True)
class CostParams:
    """Cost model (c_miss, c_fa, p_target); defaults give beta = 19."""

    c_miss: float = 1.0
    c_fa: float = 1.0
    p_target: float = 0.05

    def __post_init__(self):
        if self.c_miss <= 0 or self.c_fa <= 0:
            raise ValueError("c_miss and c_fa must be positive")
        if not 0.0 < self.p_target < 1.0:
            raise ValueError("p_target must lie in (0, 1)")

    @property
    def beta(self) -> float:
        return (self.c_fa / self.c_miss) * (1.0 - self.p_target) / self.p_target

    @property
    def theta_actual(self) -> float:
        return math.log(self.beta)


DEFAULT_PARAMS = CostParams()


@dataclass(frozen=True)
class CostResult:
    p_miss: float
    p_fa: float
    c_norm: float
    theta: float
    n_target: int
    n_nontarget: int


@dataclass(frozen=True)
class MinCostResult:
    c_norm: float
    theta: float
    p_miss: float
    p_fa: float


@dataclass(frozen=True)
class AggregateCost:
    per_cell: dict[ConditionCell, CostResult]
    per_source: dict[str, float]
    final: float
    skipped: tuple[ConditionCell, ...] = ()


@dataclass(frozen=True)
class AggregateMinCost:
    per_source: dict[str, MinCostResult]
    final: float
    skipped: tuple[ConditionCell, ...] = ()


def _as_arrays(scores, is_target) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(is_target, dtype=bool)
    if s.shape != t.shape:
        raise ValueError("scores and labels differ in length")
    return s, t


def error_rates(scores, is_target, theta: float) -> tuple[float, float]:
    """(p_miss, p_fa) at threshold theta; accept iff LLR >= theta."""
    s, t = _as_arrays(scores, is_target)
    n_tgt = int(np.count_nonzero(t))
    n_non = s.shape[0] - n_tgt
    if n_tgt == 0:
        raise EmptyClassError("target")
    if n_non == 0:
        raise EmptyClassError("nontarget")
    n_miss = int(np.count_nonzero(t & (s < theta)))
    n_fa = int(np.count_nonzero(~t & (s >= theta)))
    return n_miss / n_tgt, n_fa / n_non


def cost_at(scores, is_target, theta: float, params: CostParams = DEFAULT_PARAMS) -> CostResult:
    s, t = _as_arrays(scores, is_target)
    p_miss, p_fa = error_rates(s, t, theta)
    n_tgt = int(np.count_nonzero(t))
    return CostResult(
        p_miss=p_miss,
        p_fa=p_fa,
        c_norm=p_miss + params.beta * p_fa,
        theta=theta,
        n_target=n_tgt,
        n_nontarget=s.shape[0] - n_tgt,
    )


def actual_cost(scores, is_target, params: CostParams = DEFAULT_PARAMS) -> CostResult:
    """Normalized cost at the fixed operating threshold theta = ln(beta)."""
    return cost_at(scores, is_target, params.theta_actual, params)


def min_cost(
    cells: Mapping[ConditionCell, tuple[np.ndarray, np.ndarray]],
    params: CostParams = DEFAULT_PARAMS,
) -> MinCostResult:
    """Minimum equalized cost for one data source over a single swept threshold.

    `cells` maps each condition cell to its (scores, is_target) arrays. Every
    cell must contain both classes. Equalization gives each cell equal total
    target mass and equal total nontarget mass, i.e. the pooled error rates
    are plain means of the per-cell rates. Ties on the minimum return the
    smallest candidate threshold.
    """
    items = [(cell, *_as_arrays(s, t)) for cell, (s, t) in cells.items()]
    if not items:
        raise EmptyCellError([])
    empty = [
        cell
        for cell, s, t in items
        if np.count_nonzero(t) == 0 or np.count_nonzero(~t) == 0
    ]
    if empty:
        raise EmptyCellError(empty)

    pooled = np.concatenate([s for _, s, _ in items])
    labels = np.concatenate([t for _, _, t in items])
    cell_ids = np.concatenate(
        [np.full(s.shape[0], i, dtype=np.int64) for i, (_, s, _) in enumerate(items)]
    )
    thresholds = candidate_thresholds(pooled)
    miss, fa = cell_error_counts(pooled, labels, cell_ids, len(items), thresholds)
    n_tgt = np.array([np.count_nonzero(t) for _, _, t in items], dtype=np.float64)
    n_non = np.array([t.shape[0] - np.count_nonzero(t) for _, _, t in items], dtype=np.float64)
    p_miss = np.mean(miss / n_tgt[:, None], axis=0)
    p_fa = np.mean(fa / n_non[:, None], axis=0)
    c_norm = p_miss + params.beta * p_fa
    j = int(np.argmin(c_norm))  # first minimum = smallest threshold
    return MinCostResult(
        c_norm=float(c_norm[j]),
        theta=float(thresholds[j]),
        p_miss=float(p_miss[j]),
        p_fa=float(p_fa[j]),
    )


def _normalized_weights(
    cells: Sequence[ConditionCell], weights: Mapping[ConditionCell, float] | None
) -> np.ndarray:
    if weights is None:
        return np.full(len(cells), 1.0 / len(cells))
    w = np.array([float(weights.get(c, 0.0)) for c in cells])
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("cell weights must be nonnegative with a positive sum")
    return w / w.sum()


def cells_of_source(
    llr: np.ndarray, manifest: TrialSetManifest, source: str
) -> dict[ConditionCell, tuple[np.ndarray, np.ndarray]]:
    """Split aligned scores into the 4 condition cells of one source."""
    out = {}
    for cell in CELLS_PER_SOURCE[source]:
        idx = ALL_CELLS.index(cell)
        mask = manifest.cell_code == idx
        out[cell] = (llr[mask], manifest.is_target[mask])
    return out


def aggregate_actual(
    llr: np.ndarray,
    manifest: TrialSetManifest,
    params: CostParams = DEFAULT_PARAMS,
    weights: Mapping[ConditionCell, float] | None = None,
    partial: bool = False,
) -> AggregateCost:
    """Actual cost per cell, per source, and final (mean over sources).

    `llr` is aligned to manifest row order (see Submission.align). With
    partial=False an empty cell is an error; with partial=True empty cells
    are skipped and reported in `skipped`.
    """
    llr = np.asarray(llr, dtype=np.float64)
    if llr.shape[0] != len(manifest):
        raise ValueError("scores are not aligned with the manifest")
    theta = params.theta_actual
    present_sources = {
        src for i, src in enumerate(SOURCES) if np.any(manifest.source_code == i)
    }
    per_cell: dict[ConditionCell, CostResult] = {}
    skipped: list[ConditionCell] = []
    for i, cell in enumerate(ALL_CELLS):
        if cell.source not in present_sources:
            continue  # source absent from this manifest entirely
        mask = manifest.cell_code == i
        t = manifest.is_target[mask]
        if np.count_nonzero(t) == 0 or np.count_nonzero(~t) == 0:
            skipped.append(cell)
            continue
        per_cell[cell] = cost_at(llr[mask], t, theta, params)
    if skipped and not partial:
        raise EmptyCellError(skipped)

    per_source: dict[str, float] = {}
    for src in SOURCES:
        present = [c for c in CELLS_PER_SOURCE[src] if c in per_cell]
        if not present:
            continue
        w = _normalized_weights(present, weights)
        per_source[src] = float(
            np.dot(w, [per_cell[c].c_norm for c in present])
        )
    if not per_source:
        raise EmptyCellError(list(ALL_CELLS))
    final = float(np.mean(list(per_source.values())))
    return AggregateCost(per_cell, per_source, final, tuple(skipped))


def aggregate_min(
    llr: np.ndarray,
    manifest: TrialSetManifest,
    params: CostParams = DEFAULT_PARAMS,
    partial: bool = False,
) -> AggregateMinCost:
    """Minimum cost per source (equalized pooled sweep), averaged across sources."""
    llr = np.asarray(llr, dtype=np.float64)
    if llr.shape[0] != len(manifest):
        raise ValueError("scores are not aligned with the manifest")
    usable: dict[str, dict[ConditionCell, tuple[np.ndarray, np.ndarray]]] = {}
    skipped: list[ConditionCell] = []
    for i, src in enumerate(SOURCES):
        if not np.any(manifest.source_code == i):
            continue  # source absent from this manifest entirely
        cells = {}
        for cell, (s, t) in cells_of_source(llr, manifest, src).items():
            if np.count_nonzero(t) == 0 or np.count_nonzero(~t) == 0:
                skipped.append(cell)
                continue
            cells[cell] = (s, t)
        if cells:
            usable[src] = cells
    if skipped and not partial:
        raise EmptyCellError(skipped)
    per_source = {src: min_cost(cells, params) for src, cells in usable.items()}
    if not per_source:
        raise EmptyCellError(list(ALL_CELLS))
    final = float(np.mean([r.c_norm for r in per_source.values()]))
    return AggregateMinCost(per_source, final, tuple(skipped))


@dataclass(frozen=True)
class ScoreReport:
    """Full scoring record for one submission against one manifest."""

    actual: AggregateCost
    minimum: AggregateMinCost
    params: CostParams = field(default_factory=CostParams)

    @property
    def final_actual(self) -> float:
        return self.actual.final

    @property
    def final_min(self) -> float:
        return self.minimum.final


def score_submission(
    llr: np.ndarray,
    manifest: TrialSetManifest,
    params: CostParams = DEFAULT_PARAMS,
    weights: Mapping[ConditionCell, float] | None = None,
    partial: bool = False,
) -> ScoreReport:
    return ScoreReport(
        actual=aggregate_actual(llr, manifest, params, weights, partial),
        minimum=aggregate_min(llr, manifest, params, partial),
        params=params,
    )
