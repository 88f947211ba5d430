import datetime as dt

import numpy as np
import pytest
from scipy import stats

from csat_thresholds.domain import CallTable
from csat_thresholds.experiment import bin_for
from csat_thresholds.optimizer import fit_exhaustive
from csat_thresholds.synthdata import (
    InvalidConfig, SynthConfig, beta_link, daily_prior, generate, group_ids, group_prior, small_pool,
)

SHORT = dict(start=dt.date(2024, 1, 1), end=dt.date(2024, 1, 30))


def test_full_response_rate_labels_everything():
    table = generate(SynthConfig(n_groups=1, calls_per_group_per_day=1000 / 30, survey_response_rate=1.0, **SHORT))
    assert len(table) > 0
    assert np.all(table.label > 0)


def test_degenerate_link_is_perfectly_fittable():
    # near-point-mass class means: the classes are separable
    cfg = SynthConfig(proba_link=beta_link((0.9, 0.7, 0.5, 0.3, 0.1), 1e7))
    proba, label = small_pool(np.random.default_rng(0), 30, cfg)
    assert fit_exhaustive((proba, label)).loss.total < 1e-6


def test_label_marginal_matches_prior():
    cfg = SynthConfig(n_groups=3, calls_per_group_per_day=200, survey_response_rate=0.5, seed=4, **SHORT)
    table = generate(cfg)
    for i, gid in enumerate(group_ids(cfg.n_groups)):
        label = table.label[(table.group_id == gid) & (table.label > 0)]
        observed = np.bincount(label, minlength=6)[1:]
        expected = group_prior(cfg, i) * observed.sum()
        assert stats.chisquare(observed, expected).pvalue > 0.001


def test_link_means_monotone():
    cfg = SynthConfig(n_groups=1, calls_per_group_per_day=300, survey_response_rate=1.0, **SHORT)
    table = generate(cfg)
    means = [table.proba[table.label == c].mean() for c in range(1, 6)]
    assert all(a > b for a, b in zip(means, means[1:]))
    with pytest.raises(InvalidConfig):
        SynthConfig(proba_link=beta_link((0.1, 0.3, 0.5, 0.7, 0.9), 8))


def test_deterministic_and_seed_sensitive():
    cfg = SynthConfig(n_groups=3, **SHORT)
    assert generate(cfg) == generate(cfg)
    other = generate(SynthConfig(n_groups=3, seed=1, **SHORT))
    assert not np.array_equal(other.proba[:10], generate(cfg).proba[:10])


def test_dates_and_columns():
    table = generate(SynthConfig(n_groups=2, **SHORT))
    assert isinstance(table, CallTable)
    assert table.day.min() >= np.datetime64(SHORT["start"])
    assert table.day.max() <= np.datetime64(SHORT["end"])
    assert np.all((table.proba >= 0) & (table.proba <= 1))
    assert len(set(table.call_id)) == len(table)


def test_volume_bins_all_populated():
    rates = (1, 8, 25, 60, 120)
    cfg = SynthConfig(n_groups=5, calls_per_group_per_day=rates, survey_response_rate=0.2,
                      start=dt.date(2024, 1, 1), end=dt.date(2024, 2, 29))
    table = generate(cfg)
    bins = set()
    for gid in group_ids(5):
        bins.add(bin_for(int(np.count_nonzero((table.group_id == gid) & (table.label > 0)))))
    assert bins == {"1-50", "51-200", "201-500", "501-1000", ">1000"}


def test_drift_moves_prior():
    cfg = SynthConfig(drift=(1e-3, 0, 0, 0, -1e-3), **SHORT)
    prior = daily_prior(cfg, np.full(5, 0.2))
    assert prior[0, 0] == pytest.approx(0.2)
    assert prior[-1, 0] > prior[0, 0]
    np.testing.assert_allclose(prior.sum(axis=1), 1.0)


@pytest.mark.parametrize(
    "kw",
    [{"n_groups": 0}, {"survey_response_rate": 0.0}, {"csat_prior": (1, 1, 1, 1)},
     {"calls_per_group_per_day": (1, 2)}, {"end": dt.date(2020, 1, 1)}, {"group_proba_shift_sd": -1}],
)
def test_invalid_configs(kw):
    with pytest.raises(InvalidConfig):
        SynthConfig(**kw)
