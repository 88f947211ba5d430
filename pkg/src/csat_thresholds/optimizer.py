"""Threshold fitting.

:func:`fit_random_search` is the production method: draw four uniform values
per iteration, sort them into a candidate, keep whichever candidate scores
the lowest loss.  All candidates of one fit are scored in a single
vectorised pass, which is equivalent to the sequential loop because the
update rule ("replace only if strictly lower") picks the first minimiser.

:func:`fit_exhaustive` enumerates every distinct assignment of calls to
classes and is only meant as a test oracle on small pools.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .domain import CsatError, EmptyInput, LossBreakdown, Thresholds, labeled_arrays, N_CLASSES
from .loss import batch_loss_terms, breakdown_at
from .mapping import counts_for_candidates

DEFAULT_ITERATIONS = 5000
#: Initial best-so-far before any candidate is scored.
BEST_LOSS_INIT = 1000.0
#: Candidates scored per vectorised batch.
_CHUNK = 1 << 15


class NoCandidates(CsatError, ValueError):
    pass


class TooLarge(CsatError, ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    thresholds: Thresholds
    loss: LossBreakdown
    iterations_run: int
    iteration_of_best: int  # 0 means the warm start was never beaten
    seed: int | None
    warm_start_won: bool = False
    trace: np.ndarray | None = None  # best-so-far total after each iteration


def derive_seed(seed: int, *parts) -> int:
    """Stable 64-bit stream seed for ``(seed, *parts)``.

    Used to give every (trial, group, condition) cell its own generator so
    results do not depend on execution order.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(repr((int(seed),) + tuple(str(p) for p in parts)).encode())
    return int.from_bytes(h.digest(), "little")


def draw_candidates(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` candidate quadruples, each row strictly descending in (0, 1).

    Rows with a tie or an exact 0.0 are redrawn from the same generator,
    in row order, so the stream stays reproducible.
    """
    cand = -np.sort(-rng.random((n, 4)), axis=1)
    while True:
        bad = np.flatnonzero(
            (cand[:, 3] <= 0.0) | (cand[:, 0] == cand[:, 1]) | (cand[:, 1] == cand[:, 2]) | (cand[:, 2] == cand[:, 3])
        )
        if bad.size == 0:
            return cand
        cand[bad] = -np.sort(-rng.random((bad.size, 4)), axis=1)


def _prepare(pool):
    proba, label = labeled_arrays(pool)
    if proba.size == 0:
        raise EmptyInput("pool has no surveyed calls")
    order = np.argsort(proba, kind="stable")
    obs = np.bincount(label, minlength=N_CLASSES + 1)[1:]
    return proba[order], obs


def fit_random_search(
    pool,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    warm_start: Thresholds | None = None,
    *,
    boundary_mode: str = "strict",
    pct_units: str = "fraction",
    return_trace: bool = False,
) -> FitResult:
    """Random-search thresholds that best reproduce the pool's survey mix.

    Only surveyed calls in ``pool`` take part.  With ``warm_start`` given it
    is scored first (iteration 0) and is only replaced by a strictly better
    candidate.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    sorted_proba, obs = _prepare(pool)
    if iterations == 0 and warm_start is None:
        raise NoCandidates("zero iterations and no warm start")

    rng = np.random.default_rng(seed)
    best_total = BEST_LOSS_INIT
    best = None  # (iteration, thresholds row, terms, index)
    if warm_start is not None:
        row = np.array([warm_start.as_tuple()])
        terms = batch_loss_terms(counts_for_candidates(sorted_proba, row, boundary_mode), obs, pct_units)
        if terms[3][0] < best_total:
            best_total = terms[3][0]
            best = (0, warm_start, terms, 0)

    traces = []
    done = 0
    while done < iterations:
        k = min(_CHUNK, iterations - done)
        cand = draw_candidates(rng, k)
        terms = batch_loss_terms(counts_for_candidates(sorted_proba, cand, boundary_mode), obs, pct_units)
        totals = terms[3]
        i = int(np.argmin(totals))
        if totals[i] < best_total:
            best_total = totals[i]
            best = (done + i + 1, Thresholds.from_sequence(cand[i]), terms, i)
        if return_trace:
            traces.append(totals)
        done += k

    if best is None:
        raise NoCandidates(f"no candidate scored below {BEST_LOSS_INIT}")
    iteration, thresholds, terms, index = best

    trace = None
    if return_trace:
        all_totals = np.concatenate(traces) if traces else np.empty(0)
        start = BEST_LOSS_INIT
        if warm_start is not None:
            start = min(start, float(batch_loss_terms(
                counts_for_candidates(sorted_proba, np.array([warm_start.as_tuple()]), boundary_mode),
                obs, pct_units)[3][0]))
        trace = np.minimum.accumulate(np.concatenate([[start], all_totals]))[1:]

    return FitResult(
        thresholds=thresholds,
        loss=breakdown_at(terms, index),
        iterations_run=iterations,
        iteration_of_best=iteration,
        seed=int(seed) if seed is not None else None,
        warm_start_won=warm_start is not None and iteration == 0,
        trace=trace,
    )


def _representatives(positions: tuple[int, ...], edges: np.ndarray) -> Thresholds:
    """Concrete thresholds for a choice of gap positions.

    ``positions`` are gap indices for ``(t12, t23, t34, t45)``; gap ``k`` is
    the open interval ``(edges[k], edges[k + 1])``.  Several thresholds
    sharing one gap are spread evenly inside it.
    """
    values = [0.0] * 4
    for gap, members in itertools.groupby(range(4), key=lambda j: positions[j]):
        members = list(members)
        lo, hi = edges[gap], edges[gap + 1]
        r = len(members)
        for rank, j in enumerate(members):
            values[j] = hi - (hi - lo) * (rank + 1) / (r + 1)
    return Thresholds.from_sequence(values)


def _enumerate(pool, max_distinct: int, pct_units: str):
    """All feasible gap combinations of a pool with their loss terms."""
    proba, label = labeled_arrays(pool)
    if proba.size == 0:
        raise EmptyInput("pool has no surveyed calls")
    values = np.unique(proba)
    m = values.size
    if m > max_distinct:
        raise TooLarge(f"{m} distinct probabilities exceeds max_distinct={max_distinct}")

    edges = np.concatenate([[0.0], values, [1.0]])
    feasible = edges[1:] > edges[:-1]
    per_value = np.array([np.count_nonzero(proba == v) for v in values])
    # calls in gaps 0..k-1, i.e. on the satisfied side of a threshold in gap k
    below_gap = np.concatenate([[0], np.cumsum(per_value)])
    n = proba.size

    combos = np.array(
        [c for c in itertools.combinations_with_replacement(range(m + 1), 4)
         if all(feasible[k] for k in c)],
        dtype=np.int64,
    )
    if combos.size == 0:
        raise NoCandidates("no feasible threshold placement")
    # columns ascending -> (t45, t34, t23, t12)
    b = below_gap[combos]
    counts = np.stack(
        [n - b[:, 3], b[:, 3] - b[:, 2], b[:, 2] - b[:, 1], b[:, 1] - b[:, 0], b[:, 0]], axis=1
    )
    obs = np.bincount(label, minlength=N_CLASSES + 1)[1:]
    return combos, edges, batch_loss_terms(counts, obs, pct_units)


def fit_exhaustive(
    pool,
    max_distinct: int = 40,
    *,
    boundary_mode: str = "strict",
    pct_units: str = "fraction",
) -> FitResult:
    """Global optimum over all threshold equivalence classes.

    With ``m`` distinct probabilities there are ``m + 1`` gaps a threshold can
    sit in (below the smallest value, between neighbours, above the largest);
    every threshold position inside one gap induces the same class
    assignment under either boundary mode.  All ``C(m + 4, 4)``
    non-increasing gap choices are scored.  Gaps that are empty inside
    (0, 1), from a value at exactly 0 or 1, are skipped since no valid
    threshold can sit there.
    """
    combos, edges, terms = _enumerate(pool, max_distinct, pct_units)
    i = int(np.argmin(terms[3]))
    positions = tuple(int(k) for k in combos[i][::-1])
    return FitResult(
        thresholds=_representatives(positions, edges),
        loss=breakdown_at(terms, i),
        iterations_run=len(combos),
        iteration_of_best=i + 1,
        seed=None,
    )


def optimum_hit_probability(pool, max_distinct: int = 40, tol: float = 1e-9, *, pct_units: str = "fraction") -> float:
    """Chance that one uniform sorted draw lands on an optimal assignment.

    A draw falls in gap combination ``(a <= b <= c <= d)`` with probability
    ``4! / prod(multiplicity!) * prod(gap widths)``; this sums that over all
    combinations whose loss is within ``tol`` of the optimum.  Random search
    with ``k`` iterations then finds the optimum with probability
    ``1 - (1 - p) ** k``.
    """
    combos, edges, terms = _enumerate(pool, max_distinct, pct_units)
    totals = terms[3]
    best = combos[totals <= totals.min() + tol]
    widths = np.diff(edges)
    mass = 0.0
    for c in best:
        _, mult = np.unique(c, return_counts=True)
        mass += 24.0 / np.prod([math.factorial(r) for r in mult]) * float(np.prod(widths[c]))
    return mass
