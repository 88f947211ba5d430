"""Which thresholds each group gets: global, per-group, or hybrid by volume."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .domain import CsatError, DEFAULT_BASELINE, GroupTrainingStats, Thresholds
from .optimizer import FitResult

MODES = ("global", "per_group", "hybrid")
PROVENANCES = ("baseline", "global", "per_group")


class MissingFit(CsatError, KeyError):
    pass


@dataclass(frozen=True)
class StrategyConfig:
    mode: str = "hybrid"
    hybrid_cutoff: float = 200  # survey responses; float so math.inf is allowed
    min_high: int = 5
    min_low: int = 5
    baseline_thresholds: Thresholds = DEFAULT_BASELINE

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.hybrid_cutoff >= 0):
            raise ValueError("hybrid_cutoff must be >= 0")
        if self.min_high < 0 or self.min_low < 0:
            raise ValueError("min_high and min_low must be >= 0")


@dataclass(frozen=True)
class Assignment:
    thresholds: Thresholds
    provenance: str


def eligibility(stats: GroupTrainingStats, cfg: StrategyConfig) -> bool:
    """True when the group has enough high and low responses to be fitted."""
    return stats.n_high >= cfg.min_high and stats.n_low >= cfg.min_low


def uses_group_fit(stats: GroupTrainingStats, cfg: StrategyConfig) -> bool:
    if cfg.mode == "global":
        return False
    if cfg.mode == "per_group":
        return True
    return stats.n_responses >= cfg.hybrid_cutoff


def assign_thresholds(
    groups: Mapping[str, GroupTrainingStats],
    global_fit: FitResult | None,
    per_group_fits: Mapping[str, FitResult],
    cfg: StrategyConfig,
) -> dict[str, Assignment]:
    """Thresholds and their provenance for every group in ``groups``.

    Ineligible groups fall back to ``cfg.baseline_thresholds`` so that every
    call can still be scored.  In hybrid mode a group with exactly
    ``hybrid_cutoff`` responses gets its own fit.
    """
    out = {}
    for gid, stats in groups.items():
        if not eligibility(stats, cfg):
            out[gid] = Assignment(cfg.baseline_thresholds, "baseline")
        elif uses_group_fit(stats, cfg):
            if gid not in per_group_fits:
                raise MissingFit(f"no per-group fit for eligible group {gid!r}")
            out[gid] = Assignment(per_group_fits[gid].thresholds, "per_group")
        else:
            if global_fit is None:
                raise MissingFit("global fit required but not given")
            out[gid] = Assignment(global_fit.thresholds, "global")
    return out


def parse_cutoff(value) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(value)
