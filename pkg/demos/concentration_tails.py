"""Tail of ||[I | Phi] u||^2 around ||u||^2 against the exponential bound.

Run: python demos/concentration_tails.py
"""

from demolab import ConcentrationConfig, concentration_experiment

print("  M   eta   empirical   bound      cross-term var (obs / predicted)")
for m, eta in [(16, 0.5), (32, 0.5), (64, 0.5), (64, 0.3)]:
    rep = concentration_experiment(ConcentrationConfig(m, 32, eta, 20_000, seed=m))
    print(f"{m:3d}  {eta:4.1f}  {rep.empirical_tail:9.2e}  {rep.bound:9.2e}  "
          f"{rep.cross_term_variance:.4f} / {rep.cross_term_variance_target:.4f}")

# Only half the mass sits on the identity part, so the tail is far from tight.
