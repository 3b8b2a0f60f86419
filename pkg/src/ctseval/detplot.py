"""DET curve points on normal-deviate axes and equi-cost contours.

Curves are emitted as data (theta, p_fa, p_miss, probit_fa, probit_miss);
rendering is left to the web client or external tools. The probit transform
is the inverse standard normal CDF, computed with a rational approximation
polished by one Halley step, accurate to well below 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import candidate_thresholds, cell_error_counts
from .metrics import CostParams, DEFAULT_PARAMS, EmptyClassError, actual_cost

# Rational approximation coefficients for the inverse normal CDF
# (Acklam's algorithm; max |relative error| ~1.15e-9 before refinement).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def probit(p: float) -> float:
    """Inverse standard normal CDF on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probit requires 0 < p < 1, got {p}")
    # reflect the upper half so the tail is always evaluated where erfc is
    # accurate; 1 - p is exact for p >= 0.5
    if p > 0.5:
        return -probit(1.0 - p)
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    else:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    # one Halley refinement; x <= 0 here, so erfc(-x/sqrt 2) keeps full
    # relative precision even deep in the tail
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * _SQRT_2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def probit_array(p: np.ndarray) -> np.ndarray:
    return np.array([probit(float(v)) for v in np.asarray(p, dtype=np.float64)])


@dataclass(frozen=True)
class DetMarker:
    kind: str  # "actual" | "min"
    theta: float
    p_fa: float
    p_miss: float
    c_norm: float


@dataclass(frozen=True)
class DetCurve:
    """Step curve of (p_fa, p_miss) operating points, ordered by rising p_fa.

    `probit_fa`/`probit_miss` apply the normal-deviate transform after
    clamping exact 0/1 endpoints into [1/(2n), 1 - 1/(2n)] for the relevant
    class size; `p_fa`/`p_miss` keep the exact values.
    """

    thresholds: np.ndarray
    p_fa: np.ndarray
    p_miss: np.ndarray
    probit_fa: np.ndarray
    probit_miss: np.ndarray
    n_target: int
    n_nontarget: int
    markers: tuple[DetMarker, ...] = ()


def _clamped_probit(p: np.ndarray, n: int) -> np.ndarray:
    lo = 1.0 / (2.0 * n)
    return probit_array(np.clip(p, lo, 1.0 - lo))


def det_points(scores, is_target, params: CostParams = DEFAULT_PARAMS, markers: bool = True) -> DetCurve:
    """DET operating points at every candidate threshold.

    One point per midpoint of adjacent unique scores plus the -inf/+inf
    sentinels, so a 6-score pool yields 7 steps and the curve always covers
    the (p_fa, p_miss) = (1, 0) and (0, 1) corners.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(is_target, dtype=bool)
    n_tgt = int(np.count_nonzero(t))
    n_non = int(s.shape[0] - n_tgt)
    if n_tgt == 0:
        raise EmptyClassError("target")
    if n_non == 0:
        raise EmptyClassError("nontarget")
    thresholds = candidate_thresholds(s)
    miss, fa = cell_error_counts(s, t, None, 1, thresholds)
    p_miss = miss[0] / n_tgt
    p_fa = fa[0] / n_non
    # ascending thresholds give descending p_fa; flip so p_fa rises
    thresholds = thresholds[::-1].copy()
    p_miss = p_miss[::-1].copy()
    p_fa = p_fa[::-1].copy()

    marks: tuple[DetMarker, ...] = ()
    if markers:
        act = actual_cost(s, t, params)
        beta = params.beta
        c_all = p_miss + beta * p_fa
        j = int(np.argmin(c_all))
        marks = (
            DetMarker("actual", act.theta, act.p_fa, act.p_miss, act.c_norm),
            DetMarker("min", float(thresholds[j]), float(p_fa[j]), float(p_miss[j]), float(c_all[j])),
        )
    return DetCurve(
        thresholds=thresholds,
        p_fa=p_fa,
        p_miss=p_miss,
        probit_fa=_clamped_probit(p_fa, n_non),
        probit_miss=_clamped_probit(p_miss, n_tgt),
        n_target=n_tgt,
        n_nontarget=n_non,
        markers=marks,
    )


def equi_cost_contour(c: float, params: CostParams = DEFAULT_PARAMS, n_points: int = 200) -> np.ndarray:
    """Points (p_fa, p_miss) with p_miss + beta*p_fa = c, clipped to the unit square."""
    if c <= 0:
        raise ValueError("cost level must be positive")
    beta = params.beta
    fa_lo = max(0.0, (c - 1.0) / beta)
    fa_hi = min(c / beta, 1.0)
    if fa_lo > fa_hi:
        return np.empty((0, 2))
    p_fa = np.linspace(fa_lo, fa_hi, n_points)
    p_miss = c - beta * p_fa
    return np.column_stack([p_fa, p_miss])


def curve_rows(curve: DetCurve) -> list[tuple[float, float, float, float, float]]:
    """Rows (theta, p_fa, p_miss, probit_fa, probit_miss) for TSV emission."""
    return [
        (
            float(curve.thresholds[i]),
            float(curve.p_fa[i]),
            float(curve.p_miss[i]),
            float(curve.probit_fa[i]),
            float(curve.probit_miss[i]),
        )
        for i in range(curve.thresholds.shape[0])
    ]


def save_curve(curve: DetCurve, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("theta\tp_fa\tp_miss\tprobit_fa\tprobit_miss\n")
        for row in curve_rows(curve):
            f.write("\t".join(repr(v) for v in row) + "\n")
        for m in curve.markers:
            f.write(f"# marker\t{m.kind}\t{m.theta!r}\t{m.p_fa!r}\t{m.p_miss!r}\t{m.c_norm!r}\n")
