"""
Exponential tracking
====================

An orbit started off the manifold approaches the orbit on it at an
exponential rate.  Both are driven by the same noise path.
"""
import os

import numpy as np

from koper_slow import plots
from koper_slow.config import ExperimentConfig
from koper_slow.experiments import cutoff_params, cutoff_setup
from koper_slow.manifold import exponential_tracking, lp_iterate

out = os.environ.get("KOPER_OUT_DIR", "demo_out")
os.makedirs(out, exist_ok=True)

p = cutoff_params(ExperimentConfig("tracking"))
for seed in range(3):
    setup = cutoff_setup(p, seed, t_max=0.01, trunc_tol=1e-8)
    h = lp_iterate(setup, -2.3, -0.5).h
    res = exponential_tracking(setup, (h, -2.3, -0.5), (h + 0.1, -2.3, -0.5), 0.01, 1e-5)
    print(f"seed {seed}: c2 = {res.c2_fit:.1f}  (fast rate at the anchor, per unit time)")

# %%
# The log-distance is close to a straight line; its slope is c2.
t = res.times[res.times >= 0.005]
ld = res.log_distances[res.times >= 0.005]
intercept = float(np.mean(ld - res.c2_fit * t))
plots.fit_svg(res.times, res.log_distances, res.c2_fit, intercept, os.path.join(out, "tracking.svg"))
