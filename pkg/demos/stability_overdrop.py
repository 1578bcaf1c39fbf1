"""Compressible signals with more rows dropped than the sparsity budget allows.

The error grows gradually rather than breaking down, and the ratio of error to
best-term tail stays in a narrow band.

Run: python demos/stability_overdrop.py   (about a minute)
"""

from demolab import ExperimentConfig, stability_experiment

cfg = ExperimentConfig(n=512, k=13, m_grid=(64,), trials=10, master_seed=1)
rows = stability_experiment(cfg, d_base=6, d_extra_grid=[1, 3, 5])
print("extra  K~  mean error  max error  c3_hat")
for r in rows:
    print(f"{r.d_extra:5d}  {r.k_tilde:2d}  {r.mean_error:10.4f}  {r.max_error:9.4f}  {r.c3_hat:6.3f}")
