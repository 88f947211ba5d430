import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csat_thresholds.domain import (
    BadTimestamp, CallTable, GroupTrainingStats, InvalidThresholds, LossBreakdown, OrdinalDistribution,
    OutOfRangeLabel, OutOfRangeProba, ScoredCall, Thresholds, labeled_arrays, validate_call,
)


def _record(**kw):
    base = {"call_id": "c1", "group_id": "g1", "date": "2024-06-17", "proba": "0.93", "survey_csat": "1"}
    base.update(kw)
    return base


def test_validate_call_happy_path():
    call = validate_call(_record())
    assert call.proba == 0.93
    assert call.survey_csat == 1
    assert call.timestamp == dt.date(2024, 6, 17)


def test_validate_call_rejects_proba_above_one():
    with pytest.raises(OutOfRangeProba) as exc:
        validate_call(_record(proba="1.2"), row=7)
    assert exc.value.row == 7
    assert exc.value.reason == "OutOfRangeProba"


def test_validate_call_missing_label_is_unsurveyed():
    call = validate_call(_record(proba="0.5", survey_csat=""))
    assert call.survey_csat is None
    assert not call.labeled


@pytest.mark.parametrize("label", ["0", "6", "2.5", "x"])
def test_validate_call_rejects_bad_label(label):
    with pytest.raises(OutOfRangeLabel):
        validate_call(_record(survey_csat=label))


@pytest.mark.parametrize("proba", ["nan", "-0.01", "abc"])
def test_validate_call_rejects_bad_proba(proba):
    with pytest.raises(OutOfRangeProba):
        validate_call(_record(proba=proba))


def test_validate_call_rejects_bad_date():
    with pytest.raises(BadTimestamp):
        validate_call(_record(date="17/06/2024"))


@pytest.mark.parametrize(
    "values",
    [(0.8, 0.6, 0.4, 0.4), (0.2, 0.4, 0.6, 0.8), (0.8, 0.6, 0.7, 0.2), (1.0, 0.6, 0.4, 0.2), (0.8, 0.6, 0.4, 0.0)],
)
def test_thresholds_reject_bad_order_or_range(values):
    with pytest.raises(InvalidThresholds):
        Thresholds(*values)


@given(st.lists(st.floats(0.001, 0.999), min_size=4, max_size=4))
def test_thresholds_accept_only_strictly_descending(values):
    strictly_desc = all(a > b for a, b in zip(values, values[1:]))
    if strictly_desc:
        assert Thresholds(*values).as_tuple() == tuple(values)
    else:
        with pytest.raises(InvalidThresholds):
            Thresholds(*values)


@given(st.lists(st.integers(1, 5), max_size=200))
def test_distribution_round_trip(labels):
    dist = OrdinalDistribution.from_labels(labels)
    assert dist.total == len(labels)
    assert all(dist.counts[i - 1] == labels.count(i) for i in range(1, 6))


def test_loss_breakdown_total_is_sum():
    lb = LossBreakdown(0.1, 0.2, 0.3)
    assert abs(lb.total - 0.6) < 1e-12
    with pytest.raises(ValueError):
        LossBreakdown(-0.1, 0.0, 0.0)


def test_group_stats_split():
    stats = GroupTrainingStats.from_labels("g", np.array([1, 2, 3, 4, 5, 5]))
    assert (stats.n_responses, stats.n_high, stats.n_low) == (6, 3, 3)
    with pytest.raises(ValueError):
        GroupTrainingStats("g", 5, 2, 2)


def test_call_table_sequence_behaviour():
    calls = [
        ScoredCall("a", "g1", dt.date(2024, 1, 1), 0.3, 4),
        ScoredCall("b", "g1", dt.date(2024, 1, 2), 0.7, None),
    ]
    table = CallTable.from_calls(calls)
    assert len(table) == 2
    assert list(table) == calls
    assert table[1] == calls[1]
    assert table[np.array([True, False])].to_calls() == calls[:1]
    proba, label = labeled_arrays(table)
    assert proba.tolist() == [0.3] and label.tolist() == [4]
    with pytest.raises(ValueError):
        table.proba[0] = 0.5
