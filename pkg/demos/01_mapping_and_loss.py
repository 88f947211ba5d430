"""
From a probability to a 1-5 score, and how far off a score mix is
=================================================================

A binary classifier gives each call a probability of low satisfaction.
Four descending thresholds cut [0, 1] into five pCSAT classes.
"""

import numpy as np

from csat_thresholds import OrdinalDistribution, Thresholds, loss_between, map_all, map_probas

# %%
# A very confident "unhappy" call lands in class 1; an almost certainly
# happy one in class 5.
th = Thresholds(0.9, 0.7, 0.5, 0.3)
print(map_probas([0.93, 0.62, 0.05], th))

# %%
# A probability sitting exactly on a threshold goes to the more satisfied
# side by default.  ``boundary_mode="inclusive"`` flips that.
print(map_probas([0.7], th), map_probas([0.7], th, "inclusive"))

# %%
# Compare the predicted mix against the survey mix of the same calls.
rng = np.random.default_rng(0)
survey = OrdinalDistribution((12, 3, 4, 10, 71))
proba = rng.beta(2, 6, size=100)
pred = map_all(proba, th)
print("predicted", pred.counts, "surveyed", survey.counts)

# %%
# The loss adds three parts: gap in share of satisfied calls (4 or 5),
# gap in mean score, and MSE of the unit-normalised count vectors.
lb = loss_between(pred, survey)
for k, v in lb.to_dict().items():
    print(f"{k:22s} {v:.4f}")
