"""
Symmetric alpha-stable noise
============================

Sample two-sided Levy paths, check the self-similarity law numerically and
look at how the jumps thin out as alpha approaches 2.
"""
import os

import numpy as np

from koper_slow import plots
from koper_slow.noise import ks_self_similarity, sample_uniform_path, shift

out = os.environ.get("KOPER_OUT_DIR", "demo_out")
os.makedirs(out, exist_ok=True)

# %%
# A path lives on a grid that straddles zero; ``omega(0) = 0``.
path = sample_uniform_path(1.6, -1.0, 4.0, 1e-3, seed=0)
print("support", path.t_min, path.t_max, "value at 0:", path.at(0.0))

# %%
# The shift re-anchors the same samples: ``omega(. + s) - omega(s)``.
moved = shift(path, 0.5)
print("shifted path at 0.25:", moved.at(0.25), "=", path.at(0.75) - path.at(0.5))

# %%
# Heavier tails for smaller alpha.  Largest single increment per path:
series = {}
for alpha in (1.1, 1.5, 1.9):
    p = sample_uniform_path(alpha, 0.0, 4.0, 1e-3, seed=1)
    series[f"alpha {alpha}"] = p.values[p.grid >= 0]
    print(f"alpha={alpha}: largest jump {np.abs(np.diff(series[f'alpha {alpha}'])).max():.3f}")
plots.timeseries_svg(np.arange(4001) * 1e-3, series, os.path.join(out, "stable_paths.svg"),
                     title="alpha-stable paths")

# %%
# Self-similarity: ``c**(-1/alpha) L_c`` has the law of ``L_1``.
for seed in range(3):
    stat, pval = ks_self_similarity(1.5, 0.05, 10_000, seed)
    print(f"seed {seed}: KS statistic {stat:.4f}, p-value {pval:.3f}")

# %%
# alpha = 2 is Brownian motion with variance 2 per unit time.
bm = sample_uniform_path(2.0, 0.0, 1000.0, 0.01, seed=0)
inc = np.diff(bm.values[bm.grid >= 0])
print("alpha=2 variance per unit time:", inc.var(ddof=1) / 0.01)
