"""Rolling-trial evaluation harness.

Each trial fits thresholds on a training window and scores five conditions
per eligible group:

* ``baseline``          fixed thresholds, test window
* ``global_threshold``  one fit on the pooled training calls, test window
* ``group_threshold``   the group's own fit, test window
* ``train_period``      the group's own fit, back on its training window
* ``bootstrap_train``   the group's own fit on with-replacement resamples of
                        its training window (metrics averaged over resamples)

Trials are independent work units.  Every random draw comes from a stream
seeded by :func:`~csat_thresholds.optimizer.derive_seed` over the run seed,
trial index and what is being fitted or resampled, so results do not depend
on the number of workers or the order trials run in.
"""

from __future__ import annotations

import datetime as dt
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import CallTable, CsatError, GroupTrainingStats, LossBreakdown, Thresholds, as_table, N_CLASSES
from .loss import batch_loss_terms, breakdown_at
from .mapping import map_probas
from .optimizer import DEFAULT_ITERATIONS, FitResult, derive_seed, fit_random_search
from .strategy import StrategyConfig, eligibility

log = logging.getLogger(__name__)

CONDITIONS = ("baseline", "global_threshold", "group_threshold", "train_period", "bootstrap_train")
TEST_CONDITIONS = CONDITIONS[:3]


class InsufficientData(CsatError, ValueError):
    pass


@dataclass(frozen=True)
class TrialWindows:
    start_date: dt.date
    train_days: int = 60
    test_days: int = 120
    stride_days: int = 30
    n_trials: int = 7

    def __post_init__(self):
        if min(self.train_days, self.test_days, self.stride_days) < 1 or self.n_trials < 1:
            raise ValueError("day counts and n_trials must all be >= 1")

    def train_window(self, k: int) -> tuple[dt.date, dt.date]:
        """Half-open ``[start, end)`` training window of trial ``k``."""
        start = self.start_date + dt.timedelta(days=k * self.stride_days)
        return start, start + dt.timedelta(days=self.train_days)

    def test_window(self, k: int) -> tuple[dt.date, dt.date]:
        start = self.train_window(k)[1]
        return start, start + dt.timedelta(days=self.test_days)

    @property
    def end_date(self) -> dt.date:
        """Exclusive end of the last test window."""
        return self.test_window(self.n_trials - 1)[1]


@dataclass(frozen=True)
class VolumeBin:
    label: str
    lower: int
    upper: int | None  # None = unbounded

    def contains(self, n: int) -> bool:
        return n >= self.lower and (self.upper is None or n <= self.upper)


DEFAULT_BINS = (
    VolumeBin("1-50", 1, 50),
    VolumeBin("51-200", 51, 200),
    VolumeBin("201-500", 201, 500),
    VolumeBin("501-1000", 501, 1000),
    VolumeBin(">1000", 1001, None),
)


def bin_for(n_responses: int, bins: Sequence[VolumeBin] = DEFAULT_BINS) -> str | None:
    for b in bins:
        if b.contains(n_responses):
            return b.label
    return None


@dataclass(frozen=True)
class ConditionReport:
    trial_index: int
    group_id: str
    condition: str
    bin: str | None
    metrics: LossBreakdown
    n_train_responses: int
    n_test_responses: int

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")


@dataclass(frozen=True)
class SkipRecord:
    trial_index: int
    group_id: str
    reason: str


@dataclass
class ExperimentResult:
    reports: list[ConditionReport]
    skips: list[SkipRecord] = field(default_factory=list)
    #: fits where the baseline warm start was never beaten, per trial
    warm_start_wins: list[tuple[int, str]] = field(default_factory=list)
    n_excluded: int = 0


@dataclass(frozen=True)
class HarnessSettings:
    iterations: int = DEFAULT_ITERATIONS
    bootstrap_resamples: int = 200
    boundary_mode: str = "strict"
    pct_units: str = "fraction"
    seed: int = 0


def _window_mask(day: np.ndarray, window: tuple[dt.date, dt.date]) -> np.ndarray:
    lo, hi = (np.datetime64(d, "D") for d in window)
    return (day >= lo) & (day < hi)


def evaluate(proba: np.ndarray, label: np.ndarray, th: Thresholds, settings: HarnessSettings) -> LossBreakdown:
    """Loss of ``th`` on labeled calls: pCSAT mix vs survey mix, same calls."""
    pred = np.bincount(map_probas(proba, th, settings.boundary_mode), minlength=N_CLASSES + 1)[1:]
    obs = np.bincount(label, minlength=N_CLASSES + 1)[1:]
    return breakdown_at(batch_loss_terms(pred, obs, settings.pct_units), 0)


def bootstrap_evaluate(
    proba: np.ndarray, label: np.ndarray, th: Thresholds, resamples: int,
    rng: np.random.Generator, settings: HarnessSettings,
) -> LossBreakdown:
    """Mean loss components over same-size with-replacement resamples."""
    n = proba.size
    pred = map_probas(proba, th, settings.boundary_mode)
    idx = rng.integers(n, size=(resamples, n))
    offset = (np.arange(resamples) * (N_CLASSES + 1))[:, None]
    size = resamples * (N_CLASSES + 1)
    pred_counts = np.bincount((offset + pred[idx]).ravel(), minlength=size).reshape(resamples, -1)[:, 1:]
    obs_counts = np.bincount((offset + label[idx]).ravel(), minlength=size).reshape(resamples, -1)[:, 1:]
    d_pct, d_mean, mse, _ = batch_loss_terms(pred_counts, obs_counts, settings.pct_units)
    return LossBreakdown(
        delta_pct_satisfied=float(d_pct.mean()),
        delta_mean=float(np.abs(d_mean).mean()),
        mse=float(mse.mean()),
        delta_mean_signed=float(d_mean.mean()),
    )


def _fit(proba, label, pool_key, trial_index, cfg: StrategyConfig, settings: HarnessSettings) -> FitResult:
    # the stream depends on which groups are pooled, not on which condition asked
    seed = derive_seed(settings.seed, trial_index, "fit", *pool_key)
    return fit_random_search(
        (proba, label), settings.iterations, seed, warm_start=cfg.baseline_thresholds,
        boundary_mode=settings.boundary_mode, pct_units=settings.pct_units,
    )


def check_coverage(table: CallTable, windows: TrialWindows) -> None:
    if len(table) == 0:
        raise InsufficientData("no calls")
    first = np.datetime64(windows.start_date, "D")
    last = np.datetime64(windows.end_date, "D") - np.timedelta64(1, "D")
    if table.day.min() > first or table.day.max() < last:
        raise InsufficientData(
            f"data spans {table.day.min()}..{table.day.max()}, trials need {first}..{last}"
        )


def run_trial(
    table: CallTable, windows: TrialWindows, k: int, cfg: StrategyConfig,
    settings: HarnessSettings, bins: Sequence[VolumeBin] = DEFAULT_BINS,
) -> ExperimentResult:
    """All five conditions for trial ``k``."""
    labeled = table.label > 0
    train = _window_mask(table.day, windows.train_window(k)) & labeled
    test = _window_mask(table.day, windows.test_window(k)) & labeled

    gids = table.group_id
    groups = sorted(set(gids[train]) | set(gids[test]))
    train_idx = {g: np.flatnonzero(train & (gids == g)) for g in groups}
    test_idx = {g: np.flatnonzero(test & (gids == g)) for g in groups}
    proba = np.asarray(table.proba)
    label = np.asarray(table.label, dtype=np.int64)

    stats = {g: GroupTrainingStats.from_labels(g, label[train_idx[g]]) for g in groups}
    eligible = [g for g in groups if eligibility(stats[g], cfg)]
    result = ExperimentResult(reports=[], n_excluded=len(groups) - len(eligible))
    if not eligible:
        raise InsufficientData(f"trial {k}: no eligible group")

    pooled = np.concatenate([train_idx[g] for g in eligible])
    global_fit = _fit(proba[pooled], label[pooled], tuple(eligible), k, cfg, settings)
    if global_fit.warm_start_won:
        result.warm_start_wins.append((k, "*global*"))

    for g in eligible:
        tr, te = train_idx[g], test_idx[g]
        n_train, n_test = tr.size, te.size
        if n_test == 0:
            skip = SkipRecord(k, g, "no test-window responses")
            log.info("skip trial %d group %s: %s", k, g, skip.reason)
            result.skips.append(skip)
            continue
        fit = _fit(proba[tr], label[tr], (g,), k, cfg, settings)
        if fit.warm_start_won:
            result.warm_start_wins.append((k, g))
        rng = np.random.default_rng(derive_seed(settings.seed, k, g, "bootstrap_train"))
        metrics = {
            "baseline": evaluate(proba[te], label[te], cfg.baseline_thresholds, settings),
            "global_threshold": evaluate(proba[te], label[te], global_fit.thresholds, settings),
            "group_threshold": evaluate(proba[te], label[te], fit.thresholds, settings),
            "train_period": evaluate(proba[tr], label[tr], fit.thresholds, settings),
            "bootstrap_train": bootstrap_evaluate(
                proba[tr], label[tr], fit.thresholds, settings.bootstrap_resamples, rng, settings
            ),
        }
        b = bin_for(n_train, bins)
        for cond in CONDITIONS:
            result.reports.append(ConditionReport(k, g, cond, b, metrics[cond], n_train, n_test))
    return result


def _run_one(args):
    return run_trial(*args)


def run_experiment(
    calls,
    windows: TrialWindows,
    cfg: StrategyConfig = StrategyConfig(),
    settings: HarnessSettings = HarnessSettings(),
    bins: Sequence[VolumeBin] = DEFAULT_BINS,
    workers: int = 1,
    trial_order: Sequence[int] | None = None,
) -> ExperimentResult:
    """Run every trial and merge results in trial order.

    ``trial_order`` only changes execution order (useful for checking that it
    does not matter); output is always sorted by trial index.
    """
    table = as_table(calls)
    check_coverage(table, windows)
    order = list(trial_order) if trial_order is not None else list(range(windows.n_trials))
    if sorted(order) != list(range(windows.n_trials)):
        raise ValueError("trial_order must be a permutation of the trial indices")
    jobs = [(table, windows, k, cfg, settings, tuple(bins)) for k in order]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(j) for j in jobs]
    by_trial = dict(zip(order, outcomes))

    merged = ExperimentResult(reports=[])
    for k in range(windows.n_trials):
        part = by_trial[k]
        merged.reports.extend(part.reports)
        merged.skips.extend(part.skips)
        merged.warm_start_wins.extend(part.warm_start_wins)
        merged.n_excluded += part.n_excluded
    return merged


def run_trials(
    calls,
    windows: TrialWindows,
    cfg: StrategyConfig = StrategyConfig(),
    bootstrap_resamples: int = 200,
    seed: int = 0,
    **kwargs,
) -> list[ConditionReport]:
    """Convenience wrapper returning just the per-cell reports."""
    settings_fields = {k: kwargs.pop(k) for k in ("iterations", "boundary_mode", "pct_units") if k in kwargs}
    settings = HarnessSettings(bootstrap_resamples=bootstrap_resamples, seed=seed, **settings_fields)
    return run_experiment(calls, windows, cfg, settings, **kwargs).reports


METRICS = ("delta_pct_satisfied", "delta_mean_signed", "delta_mean", "mse", "total")


@dataclass(frozen=True)
class BinCell:
    bin: str
    condition: str
    n: int
    delta_pct_satisfied: float
    delta_mean_signed: float
    delta_mean: float
    mse: float
    total: float


def aggregate_bins(
    reports: Sequence[ConditionReport], bins: Sequence[VolumeBin] = DEFAULT_BINS
) -> list[BinCell]:
    """Mean of each metric per (bin, condition) over (group, trial) cells.

    Binning uses each report's training-window response count.  Cells with
    no members are left out.
    """
    acc: dict[tuple[str, str], list[ConditionReport]] = {}
    for r in reports:
        b = bin_for(r.n_train_responses, bins)
        if b is not None:
            acc.setdefault((b, r.condition), []).append(r)
    out = []
    for b in bins:
        for cond in CONDITIONS:
            members = acc.get((b.label, cond))
            if not members:
                continue
            means = {m: float(np.mean([getattr(r.metrics, m) for r in members])) for m in METRICS}
            out.append(BinCell(b.label, cond, len(members), **means))
    return out


def bin_table(cells: Sequence[BinCell], metric: str = "total") -> dict[str, dict[str, float]]:
    """``{bin: {condition: value}}`` view of :func:`aggregate_bins` output."""
    table: dict[str, dict[str, float]] = {}
    for c in cells:
        table.setdefault(c.bin, {})[c.condition] = getattr(c, metric)
    return table
