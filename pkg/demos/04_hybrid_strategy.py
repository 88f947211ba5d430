"""
Hybrid thresholds: global below a volume cutoff, per group above it
===================================================================
"""

import datetime as dt

import numpy as np

from csat_thresholds import StrategyConfig, SynthConfig, assign_thresholds, fit_random_search, generate
from csat_thresholds.domain import GroupTrainingStats
from csat_thresholds.strategy import eligibility

cfg = SynthConfig(
    n_groups=6,
    calls_per_group_per_day=(0.5, 2, 6, 20, 60, 150),
    start=dt.date(2024, 1, 1),
    end=dt.date(2024, 2, 29),
    group_proba_shift_sd=0.4,
    seed=3,
)
table = generate(cfg)
labeled = table.take(np.flatnonzero(table.label > 0))

strategy = StrategyConfig(mode="hybrid", hybrid_cutoff=200)
stats = {
    g: GroupTrainingStats.from_labels(g, labeled.label[labeled.group_id == g])
    for g in sorted(set(labeled.group_id))
}

# %%
# One global fit on every eligible group, plus a fit per group above the cutoff.
eligible = [g for g, s in stats.items() if eligibility(s, strategy)]
pooled = labeled.take(np.flatnonzero(np.isin(labeled.group_id, eligible)))
global_fit = fit_random_search(pooled, seed=0, warm_start=strategy.baseline_thresholds)
own = {
    g: fit_random_search(labeled.take(np.flatnonzero(labeled.group_id == g)), seed=1)
    for g in eligible if stats[g].n_responses >= strategy.hybrid_cutoff
}

for g, a in assign_thresholds(stats, global_fit, own, strategy).items():
    t = ", ".join(f"{x:.3f}" for x in a.thresholds.as_tuple())
    print(f"{g}  n={stats[g].n_responses:5d}  {a.provenance:9s}  ({t})")
