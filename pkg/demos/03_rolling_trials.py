"""
Five conditions over seven rolling trials
==========================================

Each trial fits on 60 days and tests on the following 120; the window
slides by 30 days.  Groups are binned by how many survey responses they had
in training.  Small groups do better with thresholds fitted on everyone;
large groups do better with their own.
"""

import datetime as dt

import numpy as np

from csat_thresholds import (
    HarnessSettings, StrategyConfig, SynthConfig, TrialWindows, aggregate_bins, generate, run_experiment,
)
from csat_thresholds.experiment import bin_table
from csat_thresholds.synthdata import beta_link

start = dt.date(2023, 6, 24)
windows = TrialWindows(start)

# 20 groups from a few dozen to a few thousand training responses
targets = np.geomspace(25, 4000, 20)
cfg = SynthConfig(
    n_groups=20,
    calls_per_group_per_day=tuple(targets / (60 * 0.2)),
    start=start,
    end=windows.end_date - dt.timedelta(days=1),
    survey_response_rate=0.2,
    csat_prior=(7.5, 2.5, 3.0, 6.25, 30.0),
    proba_link=beta_link((0.97, 0.92, 0.85, 0.72, 0.45), 10.0),
    seed=1,
)
table = generate(cfg)
print(len(table), "calls,", int((table.label > 0).sum()), "surveyed")

# %%
# Fewer iterations and resamples than the defaults keep this quick.
result = run_experiment(table, windows, StrategyConfig(), HarnessSettings(iterations=2000, bootstrap_resamples=50))
cells = aggregate_bins(result.reports)

# %%
# Mean total loss per volume bin and condition.
conds = ("baseline", "global_threshold", "group_threshold", "train_period", "bootstrap_train")
print(f"{'bin':10s}" + "".join(f"{c[:12]:>14s}" for c in conds))
for b, row in bin_table(cells).items():
    print(f"{b:10s}" + "".join(f"{row.get(c, float('nan')):14.4f}" for c in conds))

# %%
# bootstrap_train minus train_period isolates sampling noise; it shrinks
# as groups get bigger.
