"""
Random search against the exhaustive optimum
=============================================

On a small pool every distinct way of splitting the calls into five classes
can be enumerated, which gives the true optimum.  Random search draws
sorted uniform quadruples and keeps the best.
"""

import numpy as np

from csat_thresholds import fit_exhaustive, fit_random_search
from csat_thresholds.optimizer import optimum_hit_probability
from csat_thresholds.synthdata import small_pool

rng = np.random.default_rng(5)
pool = small_pool(rng, 20)

oracle = fit_exhaustive(pool)
print("optimum", round(oracle.loss.total, 6), oracle.thresholds.as_tuple())

# %%
# How often does a single random draw land on an optimal split?  That decides
# how many iterations random search needs.
q = optimum_hit_probability(pool)
print(f"hit probability per draw {q:.2e}; P(found in 5000) = {1 - (1 - q) ** 5000:.3f}")

# %%
# The running best over iterations.
res = fit_random_search(pool, iterations=5000, seed=42, return_trace=True)
for it in (10, 100, 500, 1000, 5000):
    print(f"after {it:5d} iterations  best loss {res.trace[it - 1]:.6f}")
print("found optimum:", res.loss.total - oracle.loss.total <= 1e-9)

# %%
# Starting from known thresholds never hurts: they are iteration 0.
from csat_thresholds.domain import DEFAULT_BASELINE

warm = fit_random_search(pool, iterations=500, seed=1, warm_start=DEFAULT_BASELINE)
print("warm start kept:", warm.warm_start_won, "loss", round(warm.loss.total, 6))
