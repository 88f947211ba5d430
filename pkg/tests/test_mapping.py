import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csat_thresholds.domain import EmptyInput, ScoredCall, Thresholds
from csat_thresholds.mapping import counts_for_candidates, map_all, map_proba, map_probas

TH = Thresholds(0.8, 0.6, 0.4, 0.2)


def _calls(probas):
    return [ScoredCall(f"c{i}", "g", dt.date(2024, 1, 1), p) for i, p in enumerate(probas)]


# hand-enumerated: p at 0, each threshold, and 1
BOUNDARY_TABLE = [
    (0.0, 5, 5),
    (0.2, 5, 4),
    (0.4, 4, 3),
    (0.6, 3, 2),
    (0.8, 2, 1),
    (1.0, 1, 1),
    (0.1, 5, 5),
    (0.3, 4, 4),
    (0.5, 3, 3),
    (0.7, 2, 2),
    (0.9, 1, 1),
]


@pytest.mark.parametrize("p, strict, inclusive", BOUNDARY_TABLE)
def test_boundary_table(p, strict, inclusive):
    assert map_proba(p, TH) == strict
    assert map_proba(p, TH, "inclusive") == inclusive
    assert map_probas([p], TH)[0] == strict
    assert map_probas([p], TH, "inclusive")[0] == inclusive


def test_single_confident_call():
    th = Thresholds(0.9, 0.7, 0.5, 0.3)
    assert map_proba(0.93, th) == 1
    assert map_all(_calls([0.93]), th).counts == (1, 0, 0, 0, 0)


def test_map_all_examples():
    assert map_all(_calls([0.0] * 10), TH).counts == (0, 0, 0, 0, 10)
    th = Thresholds(0.9, 0.7, 0.5, 0.3)
    assert map_all(_calls([0.05, 0.35, 0.55, 0.75, 0.95]), th).counts == (1, 1, 1, 1, 1)


def test_map_all_empty():
    with pytest.raises(EmptyInput):
        map_all([], TH)


def test_unknown_boundary_mode():
    with pytest.raises(ValueError):
        map_probas([0.5], TH, "sideways")


sorted_quads = st.lists(st.floats(0.01, 0.99), min_size=4, max_size=4, unique=True).map(
    lambda v: Thresholds(*sorted(v, reverse=True))
)


@given(sorted_quads, st.lists(st.floats(0.0, 1.0), min_size=1, max_size=50), st.sampled_from(["strict", "inclusive"]))
def test_vectorised_matches_scalar(th, probas, mode):
    assert map_probas(probas, th, mode).tolist() == [map_proba(p, th, mode) for p in probas]


@given(sorted_quads, st.floats(0, 1), st.floats(0, 1))
def test_monotone(th, a, b):
    lo, hi = min(a, b), max(a, b)
    assert map_proba(lo, th) >= map_proba(hi, th)


@given(sorted_quads, st.floats(0.0, 0.009), st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_raising_thresholds_never_lowers_pcsat(th, delta, probas):
    raised = Thresholds(*(min(t + delta, 0.999) for t in th.as_tuple())) if th.t12 + delta < 0.999 else th
    before = map_probas(probas, th)
    after = map_probas(probas, raised)
    assert np.all(after >= before)


@given(sorted_quads, st.lists(st.floats(0, 1), min_size=1, max_size=60))
def test_candidate_counts_match_map_all(th, probas):
    cand = np.array([th.as_tuple()])
    for mode in ("strict", "inclusive"):
        counts = counts_for_candidates(np.sort(probas), cand, mode)[0]
        assert tuple(counts) == map_all(np.array(probas), th, mode).counts
