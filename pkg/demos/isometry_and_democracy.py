"""How close is a small Gaussian matrix to an isometry, and does that survive row loss?

Run: python demos/isometry_and_democracy.py
"""

from demolab import (
    augment_identity,
    democracy_certificate,
    exact_rip,
    generate,
    monte_carlo_rip,
)

phi = generate(40, 20, seed=1)
exact = exact_rip(phi, 3)
print(f"40x20 Gaussian, order 3: delta = {exact.delta:.3f}")
print(f"  worst compression on columns {exact.worst_low_subset.to_list()}")
print(f"  worst expansion on columns {exact.worst_high_subset.to_list()}")

# sampling only ever sees a subset of supports, so it can only underestimate
for samples in (50, 500, 2000):
    est = monte_carlo_rip(phi, 3, samples, seed=0)
    print(f"  {samples:5d} sampled supports -> delta >= {est.delta:.3f}")

# Losing up to two rows: every submatrix with at least 38 rows is checked
cert = democracy_certificate(phi, 38, 2, delta_bound=0.9)
print(f"\nall row subsets of size >= 38 at order 2: worst delta {cert.worst_delta:.3f} "
      f"({cert.gammas_checked} subsets, holds={cert.holds})")
# Deleting rows shrinks norms, which can cut the expansion side of delta, so
# the worst subset is not necessarily the smallest one.
print(f"  worst subset keeps {len(cert.worst_gamma)} of {phi.rows} rows")

# The augmented matrix [I | Phi] carries the democracy argument
a = augment_identity(phi)
print(f"\n[I | Phi] is {a.rows}x{a.cols}; order-2 delta = {exact_rip(a, 2).delta:.3f}")
