"""Synthetic multi-group call populations.

Each group (call center) gets its own class prior drawn from a Dirichlet.
Every call draws a true CSAT class from that prior, then a low-CSAT
probability from the class's Beta distribution, and is surveyed with a fixed
probability.  Optional knobs add a per-group classifier bias (a logit shift
of the probability) and a linear per-day drift of the class prior.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit, logit

from .domain import CallTable, CsatError, N_CLASSES
from .optimizer import derive_seed


class InvalidConfig(CsatError, ValueError):
    pass


def beta_link(means: Sequence[float], concentration: float) -> tuple[tuple[float, float], ...]:
    """Beta ``(a, b)`` pairs with the given means and common ``a + b``."""
    return tuple((m * concentration, (1.0 - m) * concentration) for m in means)


# J-shaped survey mix: mostly 5s, a bump at 1.
DEFAULT_PRIOR = (3.0, 1.0, 1.2, 2.5, 12.0)
DEFAULT_LINK = beta_link((0.85, 0.65, 0.45, 0.25, 0.10), 8.0)


@dataclass(frozen=True)
class SynthConfig:
    n_groups: int = 10
    #: scalar rate for every group, or one rate per group
    calls_per_group_per_day: float | Sequence[float] = 20.0
    start: dt.date = dt.date(2023, 6, 24)
    end: dt.date = dt.date(2024, 6, 17)  # inclusive
    survey_response_rate: float = 0.08
    csat_prior: tuple[float, ...] = DEFAULT_PRIOR
    proba_link: tuple[tuple[float, float], ...] = DEFAULT_LINK
    #: sd of a per-group additive shift on logit(proba); 0 disables it
    group_proba_shift_sd: float = 0.0
    #: per-day additive change to the class prior, applied from ``drift_start``
    drift: tuple[float, ...] | None = None
    drift_start: dt.date | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_groups < 1:
            raise InvalidConfig("n_groups must be >= 1")
        if self.end < self.start:
            raise InvalidConfig(f"empty date range {self.start}..{self.end}")
        if not (0.0 < self.survey_response_rate <= 1.0):
            raise InvalidConfig("survey_response_rate must be in (0, 1]")
        if len(self.csat_prior) != N_CLASSES or min(self.csat_prior) <= 0:
            raise InvalidConfig("csat_prior needs 5 positive concentrations")
        if len(self.proba_link) != N_CLASSES or any(a <= 0 or b <= 0 for a, b in self.proba_link):
            raise InvalidConfig("proba_link needs 5 positive (a, b) pairs")
        means = [a / (a + b) for a, b in self.proba_link]
        if not all(x > y for x, y in zip(means, means[1:])):
            raise InvalidConfig(f"class means of proba_link must strictly decrease: {means}")
        rates = np.atleast_1d(np.asarray(self.calls_per_group_per_day, dtype=float))
        if rates.size not in (1, self.n_groups) or np.any(rates < 0):
            raise InvalidConfig("calls_per_group_per_day must be a non-negative scalar or one rate per group")
        if self.group_proba_shift_sd < 0:
            raise InvalidConfig("group_proba_shift_sd must be >= 0")
        if self.drift is not None and len(self.drift) != N_CLASSES:
            raise InvalidConfig("drift needs 5 per-day shifts")

    def rates(self) -> np.ndarray:
        rates = np.atleast_1d(np.asarray(self.calls_per_group_per_day, dtype=float))
        return np.broadcast_to(rates, (self.n_groups,)).copy()

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1


def group_ids(n_groups: int) -> list[str]:
    width = max(3, len(str(n_groups - 1)))
    return [f"g{i:0{width}d}" for i in range(n_groups)]


def daily_prior(cfg: SynthConfig, base: np.ndarray) -> np.ndarray:
    """``(n_days, 5)`` class probabilities after drift."""
    n_days = cfg.n_days
    if cfg.drift is None:
        return np.broadcast_to(base, (n_days, N_CLASSES))
    origin = (cfg.drift_start or cfg.start) - cfg.start
    elapsed = np.clip(np.arange(n_days) - origin.days, 0, None)
    prior = base[None, :] + elapsed[:, None] * np.asarray(cfg.drift, dtype=float)[None, :]
    prior = np.clip(prior, 1e-9, None)
    return prior / prior.sum(axis=1, keepdims=True)


def _group_rng(cfg: SynthConfig, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(cfg.seed, "synth", index))


def group_prior(cfg: SynthConfig, index: int) -> np.ndarray:
    """The class prior group ``index`` was generated with (before drift)."""
    return _group_rng(cfg, index).dirichlet(np.asarray(cfg.csat_prior, dtype=float))


def generate_group(cfg: SynthConfig, index: int, group_id: str, rate: float) -> dict[str, np.ndarray]:
    rng = _group_rng(cfg, index)
    base = rng.dirichlet(np.asarray(cfg.csat_prior, dtype=float))  # must stay the first draw
    shift = rng.normal(0.0, cfg.group_proba_shift_sd) if cfg.group_proba_shift_sd > 0 else 0.0

    per_day = rng.poisson(rate, size=cfg.n_days)
    day_index = np.repeat(np.arange(cfg.n_days), per_day)
    n = day_index.size

    cdf = np.cumsum(daily_prior(cfg, base), axis=1)[day_index]
    u = rng.random(n)
    true_class = 1 + np.minimum((u[:, None] > cdf).sum(axis=1), N_CLASSES - 1)

    a = np.array([ab[0] for ab in cfg.proba_link])[true_class - 1]
    b = np.array([ab[1] for ab in cfg.proba_link])[true_class - 1]
    proba = rng.beta(a, b)
    if shift:
        with np.errstate(divide="ignore"):
            proba = expit(logit(proba) + shift)
    proba = np.clip(proba, 0.0, 1.0)

    surveyed = rng.random(n) < cfg.survey_response_rate
    label = np.where(surveyed, true_class, 0).astype(np.int8)
    days = np.datetime64(cfg.start, "D") + day_index.astype("timedelta64[D]")
    call_id = np.array([f"{group_id}-{i:07d}" for i in range(n)], dtype=object)
    return {
        "call_id": call_id,
        "group_id": np.full(n, group_id, dtype=object),
        "day": days,
        "proba": proba,
        "label": label,
    }


def generate(cfg: SynthConfig) -> CallTable:
    """Deterministic synthetic call table, ordered by (group, date, index)."""
    parts = [
        generate_group(cfg, i, gid, rate)
        for i, (gid, rate) in enumerate(zip(group_ids(cfg.n_groups), cfg.rates()))
    ]
    return CallTable(**{k: np.concatenate([p[k] for p in parts]) for k in parts[0]})


def small_pool(rng: np.random.Generator, n_labeled: int, cfg: SynthConfig | None = None):
    """A single group's ``(proba, label)`` sample of ``n_labeled`` surveyed calls.

    Handy for optimizer tests: same prior/link model as :func:`generate`
    without dates or unsurveyed calls.
    """
    cfg = cfg or SynthConfig()
    prior = rng.dirichlet(np.asarray(cfg.csat_prior, dtype=float))
    label = 1 + rng.choice(N_CLASSES, size=n_labeled, p=prior)
    a = np.array([ab[0] for ab in cfg.proba_link])[label - 1]
    b = np.array([ab[1] for ab in cfg.proba_link])[label - 1]
    return rng.beta(a, b), label
