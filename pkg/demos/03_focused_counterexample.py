"""
When the scaled width overestimates
===================================

Every trick in the half-coordinate set has first coordinate +1/2 or -1/2,
so at radius ``r`` a fake moves ``x_1`` by ``r/2``.  A detector that looks
only at ``x_1`` catches that, even though the scaled width of the set grows
like ``sqrt(n)``.
"""

import math

from fakewidth import (
    FixedTrick,
    FocusSet,
    FocusedDetector,
    HalfCoordinate,
    SeedSpec,
    StandardGaussian,
    analytic_scaled_width,
    bracket_detectability_radius,
    error_rates,
    focused_width_upper_bound,
    verify_polar_condition,
)

n = 100
T = HalfCoordinate(n)
dist = StandardGaussian(n)
print(f"2 * scaled width = {2 * analytic_scaled_width(T):.3f}")

# %%
# S = {+-2 e_1} meets every trick: <t, +-2 e_1> = +-2 t_1 = +-1.
S = FocusSet.axis(n, 0, 2.0)
print("polar condition for {+-2 e_1}:", bool(verify_polar_condition(T, S)))
print("polar condition for {+-e_1}:  ", bool(verify_polar_condition(T, FocusSet.axis(n, 0, 1.0))))

bound, chosen = focused_width_upper_bound(T, [S, T], dist, 20_000, SeedSpec(1))
print(f"focused width bound {bound.mean:.4f} (2 sqrt(2/pi) = {2 * math.sqrt(2 / math.pi):.4f})")

# %%
# At r = 100 the focused detector makes no mistakes.
det = FocusedDetector.from_focus_set(S, 100.0)
er = error_rates(det, FixedTrick.canonical(T), dist, 100.0, 10_000, SeedSpec(2))
print(f"r = 100: fpr {er.fpr}, fnr {er.fnr}")

b = bracket_detectability_radius(T, dist, 10_000, SeedSpec(3), focus=S)
print(f"bracket with the focused detector: [{b.r_lower:.2f}, {b.r_upper:.2f}]")
