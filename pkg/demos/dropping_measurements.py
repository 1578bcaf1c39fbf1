"""Recover a sparse vector while measurements go missing.

Three ways to lose rows are compared on one instance: a random subset, the
worst of several random subsets, and the largest-magnitude measurements.

Run: python demos/dropping_measurements.py
"""

import numpy as np

from demolab.harness import ExperimentConfig, TrialContext, scan_d_max, trial_seed

cfg = ExperimentConfig(n=256, k=5, m_grid=(60, 90, 120), trials=1, r_submatrices=20, master_seed=3)

print(" m   random  worst-of-20  largest-first")
for m in cfg.m_grid:
    ctx = TrialContext(m, cfg, trial_seed(cfg, m, 0))
    row = [scan_d_max(lambda d, p=p: ctx.level_ok(p, d), m - cfg.k) for p in cfg.policies]
    print(f"{m:3d}  {row[0]:6d}  {row[1]:11d}  {row[2]:13d}")

ctx = TrialContext(120, cfg, trial_seed(cfg, 120, 0))
y = np.abs(ctx.y)
print(f"\nthe adversary removes the biggest |y_i| first: {np.sort(y)[::-1][:4].round(3)} ...")
