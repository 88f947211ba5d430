"""Distribution-matching loss between predicted and survey CSAT.

The loss is the sum of three terms, one per product requirement: the gap in
share of satisfied calls (class >= 4), the gap in mean score, and the MSE
between the two count vectors after scaling each to unit L2 length.
"""

from __future__ import annotations

import numpy as np

from .domain import EmptyDistribution, LossBreakdown, OrdinalDistribution

#: Divisor of the squared-difference sum (vector length).  Set to 1 for a
#: plain sum of squares.
MSE_DIVISOR = 5.0

#: ``delta_pct_satisfied`` scale per unit setting.
PCT_UNITS = {"fraction": 1.0, "points": 100.0}

_CLASS_VALUES = np.arange(1.0, 6.0)


def _counts(dist) -> np.ndarray:
    arr = dist.as_array() if isinstance(dist, OrdinalDistribution) else np.asarray(dist, dtype=np.float64)
    if arr.sum() <= 0:
        raise EmptyDistribution("distribution has no calls")
    return arr


def mean_of(dist: OrdinalDistribution) -> float:
    c = _counts(dist)
    return float((c * _CLASS_VALUES).sum() / c.sum())


def pct_satisfied(dist: OrdinalDistribution) -> float:
    c = _counts(dist)
    return float((c[3] + c[4]) / c.sum())


def normalize_unit(dist: OrdinalDistribution) -> np.ndarray:
    c = _counts(dist)
    return c / np.sqrt((c * c).sum())


def _summaries(counts: np.ndarray):
    """Row-wise (pct satisfied, mean, unit vector) for a ``(k, 5)`` array."""
    c = counts.astype(np.float64, copy=False)
    total = c[:, 0] + c[:, 1] + c[:, 2] + c[:, 3] + c[:, 4]
    pct = (c[:, 3] + c[:, 4]) / total
    mean = (c[:, 0] + 2.0 * c[:, 1] + 3.0 * c[:, 2] + 4.0 * c[:, 3] + 5.0 * c[:, 4]) / total
    sq = c * c
    norm = np.sqrt(sq[:, 0] + sq[:, 1] + sq[:, 2] + sq[:, 3] + sq[:, 4])
    return pct, mean, c / norm[:, None]


def batch_loss_terms(pred_counts: np.ndarray, obs_counts, pct_units: str = "fraction"):
    """Loss terms for many predicted distributions against one observed one.

    Returns ``(delta_pct, delta_mean_signed, mse, total)``, each shape ``(k,)``.
    Rows of ``pred_counts`` with zero total yield NaN.  This is the single
    arithmetic path: :func:`loss_between` calls it with ``k = 1`` so the
    optimizer and the reports agree bit for bit.
    """
    scale = PCT_UNITS[pct_units]
    pred = np.atleast_2d(np.asarray(pred_counts))
    obs = np.atleast_2d(np.asarray(obs_counts, dtype=np.float64))
    with np.errstate(invalid="ignore", divide="ignore"):
        p_pct, p_mean, p_unit = _summaries(pred)
        o_pct, o_mean, o_unit = _summaries(obs)
    d_pct = np.abs(p_pct - o_pct) * scale
    d_mean = p_mean - o_mean
    d = p_unit - o_unit
    sq = d * d
    mse = (sq[:, 0] + sq[:, 1] + sq[:, 2] + sq[:, 3] + sq[:, 4]) / MSE_DIVISOR
    total = d_pct + np.abs(d_mean) + mse
    return d_pct, d_mean, mse, total


def loss_between(
    pred: OrdinalDistribution, obs: OrdinalDistribution, pct_units: str = "fraction"
) -> LossBreakdown:
    """Loss of predicted distribution ``pred`` against observed ``obs``."""
    p = _counts(pred)
    o = _counts(obs)
    d_pct, d_mean, mse, _ = batch_loss_terms(p[None, :], o, pct_units)
    return LossBreakdown(
        delta_pct_satisfied=float(d_pct[0]),
        delta_mean=float(abs(d_mean[0])),
        mse=float(mse[0]),
        delta_mean_signed=float(d_mean[0]),
    )


def breakdown_at(terms, index: int) -> LossBreakdown:
    """Pick row ``index`` out of :func:`batch_loss_terms` output."""
    d_pct, d_mean, mse, _ = terms
    return LossBreakdown(
        delta_pct_satisfied=float(d_pct[index]),
        delta_mean=float(abs(d_mean[index])),
        mse=float(mse[index]),
        delta_mean_signed=float(d_mean[index]),
    )
