"""Scoring: CRPS from quantile grids, RMSE, RMSPE, interval coverage.

The CRPS estimator consumes M quantile values per prediction point taken at
the evenly spaced levels m/(M+1), m = 1..M:

    crps ~= (1/M) sum_m |q_m - y| - (1/(2 M^2)) sum_{m,m'} |q_m - q_m'|

The default path evaluates the double sum in O(M log M) via sorting; the
quadratic reference path is kept for verification and must agree to 1e-12.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "quantile_grid",
    "crps_from_quantiles",
    "rmse",
    "rmspe",
    "coverage",
    "MetricReport",
    "evaluate",
]


def quantile_grid(m=99):
    """Evaluation levels m/(M+1); for M=99 these are 0.01..0.99."""
    if m < 1:
        raise ValueError("grid size must be >= 1")
    return np.arange(1, m + 1, dtype=np.float64) / (m + 1)


def crps_from_quantiles(y, quantiles, method="sorted"):
    """CRPS per prediction point from a matrix of quantile values.

    Args:
        y: targets, shape (n,) (or scalar with a 1-d quantile vector).
        quantiles: (n, M) quantile values; rows need not be sorted.
        method: "sorted" for the O(M log M) path, "pairwise" for the
            O(M^2) reference path.

    Returns (n,) CRPS values.
    """
    q = np.asarray(quantiles, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scalar = q.ndim == 1
    if scalar:
        q = q[None, :]
        y = np.atleast_1d(y)
    if q.ndim != 2 or y.shape[0] != q.shape[0]:
        raise ValueError("quantiles must be (n, M) matching y of length n")
    n, m = q.shape
    term1 = np.mean(np.abs(q - y[:, None]), axis=1)
    if method == "sorted":
        s = np.sort(q, axis=1)
        # sum_{i<j} (s_j - s_i) = sum_k (2k - M + 1) s_k for sorted rows;
        # the full double sum is twice that
        w = 2.0 * np.arange(m) - m + 1.0
        pair_sum = 2.0 * (s @ w)
    elif method == "pairwise":
        pair_sum = np.abs(q[:, :, None] - q[:, None, :]).sum(axis=(1, 2))
    else:
        raise ValueError(f"unknown method {method!r}")
    out = term1 - pair_sum / (2.0 * m * m)
    return out[0] if scalar else out


def rmse(predictions, targets):
    """Root mean squared error."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError("predictions and targets must have the same shape")
    if p.size == 0:
        raise ValueError("rmse of empty arrays is undefined")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def rmspe(predictions, targets):
    """Root mean squared percentage error, in percent units.

    rmspe = sqrt(mean((100 (pred - y) / y)^2)). Raises on any zero target.
    """
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError("predictions and targets must have the same shape")
    if p.size == 0:
        raise ValueError("rmspe of empty arrays is undefined")
    if np.any(t == 0):
        raise ValueError("rmspe undefined: targets contain exact zeros")
    return float(np.sqrt(np.mean((100.0 * (p - t) / t) ** 2)))


def coverage(targets, lower, upper):
    """Fraction of targets inside [lower, upper].

    Crossed intervals raise: a model whose interval endpoints swap order is
    broken and should fail loudly rather than quietly reporting coverage.
    """
    t = np.asarray(targets, dtype=np.float64)
    lo = np.asarray(lower, dtype=np.float64)
    hi = np.asarray(upper, dtype=np.float64)
    if not (t.shape == lo.shape == hi.shape):
        raise ValueError("targets, lower, upper must share a shape")
    if t.size == 0:
        raise ValueError("coverage of empty arrays is undefined")
    if np.any(lo > hi):
        k = int(np.argmax(lo > hi))
        raise ValueError(
            f"crossed interval at index {k}: lower {lo[k]!r} > upper {hi[k]!r}"
        )
    return float(np.mean((t >= lo) & (t <= hi)))


@dataclass
class MetricReport:
    """Evaluation summary for one fitted predictor on one test set."""

    rmse: float
    crps: float
    coverage90: float
    rmspe: Optional[float]
    n_test: int
    crps_per_point: np.ndarray

    def row(self):
        return {
            "rmse": self.rmse,
            "rmspe": self.rmspe,
            "crps": self.crps,
            "coverage90": self.coverage90,
        }


def evaluate(predictor, dataset, m_grid=99):
    """Score a fitted predictor on a held-out dataset.

    The predictor must expose predict_quantiles(x, levels) -> (n, L) and
    point(x) -> (n,). Targets are the noiseless truth column when the
    dataset carries one, otherwise the observed responses. The 90% interval
    uses the 0.05 and 0.95 grid levels (exact grid members for M=99).
    """
    levels = quantile_grid(m_grid)
    targets = dataset.truth if getattr(dataset, "truth", None) is not None else dataset.y
    targets = np.asarray(targets, dtype=np.float64)
    q = predictor.predict_quantiles(dataset.x, levels)
    crps_points = crps_from_quantiles(targets, q)
    point = np.asarray(predictor.point(dataset.x), dtype=np.float64)
    lo_idx = int(np.argmin(np.abs(levels - 0.05)))
    hi_idx = int(np.argmin(np.abs(levels - 0.95)))
    cov = coverage(targets, q[:, lo_idx], q[:, hi_idx])
    try:
        rel = rmspe(point, targets)
    except ValueError:
        rel = None
    return MetricReport(
        rmse=rmse(point, targets),
        crps=float(np.mean(crps_points)),
        coverage90=cov,
        rmspe=rel,
        n_test=targets.shape[0],
        crps_per_point=crps_points,
    )
