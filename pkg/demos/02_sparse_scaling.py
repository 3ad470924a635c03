"""
Sparse tricks
=============

With at most ``s`` nonzero coordinates allowed, the scaled width is the
expected norm of the ``s`` largest coordinates of ``X``, which grows like
``sqrt(s ln(en/s))`` instead of ``sqrt(n)``.
"""

import math

from fakewidth import SeedSpec, SparseNorm, StandardGaussian, bracket_detectability_radius, estimate_scaled_width

print(f"{'n':>4} {'s':>3} {'2w':>7} {'bracket':>17} {'2sqrt(s ln(en/s))':>18}")
for n, s in [(100, 1), (100, 5), (100, 20), (200, 5), (200, 20), (400, 5)]:
    T = SparseNorm(n, s)
    dist = StandardGaussian(n)
    w = estimate_scaled_width(T, dist, 20_000, SeedSpec(n + s))
    b = bracket_detectability_radius(T, dist, 5_000, SeedSpec(n * s))
    ref = 2 * math.sqrt(s * math.log(math.e * n / s))
    print(f"{n:4d} {s:3d} {2 * w.mean:7.3f} [{b.r_lower:6.2f}, {b.r_upper:6.2f}] {ref:18.3f}")

# %%
# Doubling n barely moves the bracket for fixed s; raising s moves it a lot.
