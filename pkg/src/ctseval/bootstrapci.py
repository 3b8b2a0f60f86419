"""Bootstrap confidence intervals for the actual detection cost.

Resampling draws enrollment models with replacement (the unique-model
space); a drawn model carries all of its trials, duplicated by its draw
multiplicity. Each resample yields one aggregate actual cost; the interval
is the pair of empirical quantiles (linear interpolation, the type-7
convention) around the requested level.

Because the actual cost at a fixed threshold is linear in trial
multiplicities, resample costs are computed from a per-model x per-cell
count table rather than by materializing duplicated trials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import CostParams, DEFAULT_PARAMS, aggregate_actual
from .trialset import ALL_CELLS, SOURCES, TrialSetManifest

GENERATOR_NAME = "PCG64"
QUANTILE_RULE = "linear"


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class BootstrapConfig:
    n_resamples: int = 1000
    level: float = 0.95
    seed: int = 0
    two_level: bool = False  # additionally resample the test-segment space

    def __post_init__(self):
        if self.n_resamples < 1:
            raise ValueError("n_resamples must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")


@dataclass
class CiResult:
    point: float
    lo: float
    hi: float
    resample_costs: np.ndarray
    n_redraws: int
    seed: int
    generator: str = GENERATOR_NAME
    quantile_rule: str = QUANTILE_RULE

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _model_cell_tables(
    llr: np.ndarray, manifest: TrialSetManifest, theta: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per (model, cell): target/miss/nontarget/false-alarm trial counts at theta."""
    n_models = len(manifest.model_table)
    joint = manifest.model_code.astype(np.int64) * 8 + manifest.cell_code
    size = n_models * 8
    tgt = manifest.is_target
    miss = tgt & (llr < theta)
    fa = ~tgt & (llr >= theta)
    shape = (n_models, 8)
    return (
        np.bincount(joint[tgt], minlength=size).reshape(shape).astype(np.float64),
        np.bincount(joint[miss], minlength=size).reshape(shape).astype(np.float64),
        np.bincount(joint[~tgt], minlength=size).reshape(shape).astype(np.float64),
        np.bincount(joint[fa], minlength=size).reshape(shape).astype(np.float64),
    )


def _cost_from_cells(
    t_counts: np.ndarray,
    miss_counts: np.ndarray,
    n_counts: np.ndarray,
    fa_counts: np.ndarray,
    required: np.ndarray,
    beta: float,
) -> float | None:
    """Aggregate actual cost from per-cell counts; None if a required cell is empty."""
    if np.any(t_counts[required] == 0) or np.any(n_counts[required] == 0):
        return None
    per_source = []
    for s_i, _ in enumerate(SOURCES):
        cells = np.nonzero(required[s_i * 4 : (s_i + 1) * 4])[0] + s_i * 4
        if cells.size == 0:
            continue
        c_norm = miss_counts[cells] / t_counts[cells] + beta * (
            fa_counts[cells] / n_counts[cells]
        )
        # same arithmetic as metrics.aggregate_actual (uniform dot, then mean)
        w = np.full(cells.size, 1.0 / cells.size)
        per_source.append(float(np.dot(w, c_norm)))
    return float(np.mean(per_source))


def bootstrap_cost(
    llr: np.ndarray,
    manifest: TrialSetManifest,
    params: CostParams = DEFAULT_PARAMS,
    config: BootstrapConfig = BootstrapConfig(),
) -> CiResult:
    """Bootstrap the aggregate actual cost over the enrollment-model space.

    Each resample draws as many model ids (with replacement) as the manifest
    has distinct models. A resample that empties a required condition cell
    is redrawn and counted in n_redraws; the run aborts after
    10 * n_resamples total draws. Draw k derives its own generator from
    (seed, k), so fixed inputs reproduce the cost vector bit for bit.
    """
    llr = np.asarray(llr, dtype=np.float64)
    models_present = np.unique(manifest.model_code)
    if models_present.size < 2:
        raise BootstrapError("bootstrap needs at least 2 distinct enrollment models")
    point = aggregate_actual(llr, manifest, params).final
    t_tab, miss_tab, n_tab, fa_tab = _model_cell_tables(llr, manifest, params.theta_actual)
    t_tab = t_tab[models_present]
    miss_tab = miss_tab[models_present]
    n_tab = n_tab[models_present]
    fa_tab = fa_tab[models_present]
    required = (t_tab.sum(axis=0) + n_tab.sum(axis=0)) > 0

    seg_code = manifest.segment_code.astype(np.int64)
    n_segments = len(manifest.segment_table)
    model_of_row = np.searchsorted(models_present, manifest.model_code)

    n_models = models_present.size
    beta = params.beta
    costs = np.empty(config.n_resamples, dtype=np.float64)
    n_redraws = 0
    draw = 0
    max_draws = 10 * config.n_resamples
    filled = 0
    while filled < config.n_resamples:
        if draw >= max_draws:
            raise BootstrapError(
                f"aborted after {max_draws} draws: resamples keep emptying a condition cell"
            )
        rng = np.random.default_rng([config.seed, draw])
        draw += 1
        mult = np.bincount(
            rng.integers(0, n_models, size=n_models), minlength=n_models
        ).astype(np.float64)
        if config.two_level:
            seg_mult = np.bincount(
                rng.integers(0, n_segments, size=n_segments), minlength=n_segments
            ).astype(np.float64)
            row_w = mult[model_of_row] * seg_mult[seg_code]
            tgt = manifest.is_target
            miss_rows = tgt & (llr < params.theta_actual)
            fa_rows = ~tgt & (llr >= params.theta_actual)
            cell = manifest.cell_code
            t_c = np.bincount(cell[tgt], weights=row_w[tgt], minlength=8)
            m_c = np.bincount(cell[miss_rows], weights=row_w[miss_rows], minlength=8)
            n_c = np.bincount(cell[~tgt], weights=row_w[~tgt], minlength=8)
            f_c = np.bincount(cell[fa_rows], weights=row_w[fa_rows], minlength=8)
        else:
            t_c = mult @ t_tab
            m_c = mult @ miss_tab
            n_c = mult @ n_tab
            f_c = mult @ fa_tab
        cost = _cost_from_cells(t_c, m_c, n_c, f_c, required, beta)
        if cost is None:
            n_redraws += 1
            continue
        costs[filled] = cost
        filled += 1

    alpha = 1.0 - config.level
    lo = float(np.quantile(costs, alpha / 2.0, method="linear"))
    hi = float(np.quantile(costs, 1.0 - alpha / 2.0, method="linear"))
    return CiResult(
        point=point,
        lo=lo,
        hi=hi,
        resample_costs=costs,
        n_redraws=n_redraws,
        seed=config.seed,
    )
