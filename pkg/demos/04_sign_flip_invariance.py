"""
Sign flips keep the law of the data
===================================

For a highly symmetric trick set the insider's move is to reverse the signs
of ``x`` on its best support.  Which coordinates get flipped depends only on
``|x|``, so the fake has exactly the law of ``X`` whenever coordinates are
symmetric and independent.
"""

from collections import Counter
import itertools

import numpy as np

from fakewidth import IIDSymmetricBounded, NormThreshold, SeedSpec, SignFlip, SparseNorm, StandardGaussian, invariance_check

# %%
# Exhaustive check on the 256 Rademacher vectors in R^8.
T = SparseNorm(8, 2)
cube = np.array(list(itertools.product([-1.0, 1.0], repeat=8)))
fakes, ok = SignFlip(T).attack_batch(cube, 1.0)
counts = Counter(map(tuple, fakes))
print("all flips succeed:", ok.all(), "| distinct fakes:", len(counts), "| max multiplicity:", max(counts.values()))
print(invariance_check(T, IIDSymmetricBounded(8), 1.0, 1, SeedSpec(0)).to_dict())

# %%
# Gaussian data: Kolmogorov-Smirnov on the norm and five random projections.
rep = invariance_check(NormThreshold(64), StandardGaussian(64), 4.0, 10_000, SeedSpec(1))
for name, stat, p in rep.ks:
    print(f"{name:>11}: D = {stat:.4f}, p = {p:.3f}")
