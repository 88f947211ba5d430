"""Probability -> 1..5 pCSAT mapping through four ordered thresholds."""

from __future__ import annotations

import numpy as np

from .domain import EmptyInput, OrdinalDistribution, Thresholds, as_table, N_CLASSES

#: "strict": a probability equal to a threshold lands on the more satisfied
#: side (class 1 needs p > t12).  "inclusive" flips every boundary.
BOUNDARY_MODES = ("strict", "inclusive")


def _check_mode(boundary_mode: str) -> str:
    if boundary_mode not in BOUNDARY_MODES:
        raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}, got {boundary_mode!r}")
    return "left" if boundary_mode == "strict" else "right"


def map_proba(p: float, th: Thresholds, boundary_mode: str = "strict") -> int:
    """Map one low-CSAT probability to a pCSAT class."""
    if boundary_mode == "strict":
        above = (p > th.t12, p > th.t23, p > th.t34, p > th.t45)
    else:
        _check_mode(boundary_mode)
        above = (p >= th.t12, p >= th.t23, p >= th.t34, p >= th.t45)
    return N_CLASSES - sum(above)


def map_probas(p, th: Thresholds, boundary_mode: str = "strict") -> np.ndarray:
    """Vectorised :func:`map_proba`; returns an ``int64`` array of classes."""
    side = _check_mode(boundary_mode)
    n_below = np.searchsorted(th.ascending(), np.asarray(p, dtype=np.float64), side=side)
    return N_CLASSES - n_below


def map_all(calls, th: Thresholds, boundary_mode: str = "strict") -> OrdinalDistribution:
    """Distribution of pCSAT over ``calls`` (labeled or not).

    ``calls`` is a sequence of ScoredCall, a CallTable, or a bare array of
    probabilities.
    """
    if isinstance(calls, np.ndarray):
        proba = calls
    else:
        proba = as_table(calls).proba
    if len(proba) == 0:
        raise EmptyInput("cannot map an empty set of calls")
    classes = map_probas(proba, th, boundary_mode)
    return OrdinalDistribution(tuple(np.bincount(classes, minlength=N_CLASSES + 1)[1:]))


def counts_for_candidates(
    sorted_proba: np.ndarray, candidates: np.ndarray, boundary_mode: str = "strict"
) -> np.ndarray:
    """Class counts for many threshold quadruples at once.

    ``sorted_proba`` must be ascending; ``candidates`` has shape ``(k, 4)``
    with columns ``t12, t23, t34, t45``.  Returns a ``(k, 5)`` int array whose
    rows match ``map_all`` for the corresponding thresholds.
    """
    # calls on the satisfied side of each threshold
    side = "right" if boundary_mode == "strict" else "left"
    _check_mode(boundary_mode)
    n = sorted_proba.size
    below = np.searchsorted(sorted_proba, candidates, side=side)
    out = np.empty((candidates.shape[0], N_CLASSES), dtype=np.int64)
    out[:, 0] = n - below[:, 0]
    out[:, 1] = below[:, 0] - below[:, 1]
    out[:, 2] = below[:, 1] - below[:, 2]
    out[:, 3] = below[:, 2] - below[:, 3]
    out[:, 4] = below[:, 3]
    return out
