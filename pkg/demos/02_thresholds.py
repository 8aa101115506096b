"""
How much heterogeneity, and how much engagement?
================================================

Starting from reported summary numbers (ITT -0.761 on HbA1c, mean
engagement 0.814), find the gamma below which the effect spread
xi = Delta(1) - Delta(0) exceeds 0.25, and the engagement level above
which the effect reaches 0.5 in magnitude.
"""

import numpy as np

from late_bounds import TransformSpec, bounds, engagement_for_effect_threshold, gamma_for_xi_threshold, late_estimate, xi

itt, mu = -0.761, 0.814
h = TransformSpec.identity()

g_star = gamma_for_xi_threshold(itt, mu, 0.25)
print(f"|xi| > 0.25 whenever gamma < {g_star:.3f}")
for g in (0.0, 0.5, g_star, 0.9):
    print(f"  gamma {g:.3f}: xi = {xi(itt, mu, g).xi:+.3f}")

print()
for g in (0.0, 0.25, 0.5, 0.75):
    res = engagement_for_effect_threshold(itt, mu, g, h, 0.5)
    if res.status == "solved":
        print(f"gamma {g:.2f}: |Delta(a)| >= 0.5 once a >= {res.a_star:.3f}")
    else:
        print(f"gamma {g:.2f}: {res.status} (no crossing inside [0, 1])")

# sharp bounds: between the ITT and the Wald ratio itt * h(a) / mu
print()
for a in np.linspace(0, 1, 6):
    lo, hi = bounds(itt, mu, h, a)
    mid = late_estimate(itt, mu, 0.5, h, a).delta
    print(f"a = {a:.1f}: [{lo:+.3f}, {hi:+.3f}]   gamma = 0.5 gives {mid:+.3f}")

# a coarsened transform: any engagement above 80% counts as full
h80 = TransformSpec.threshold(0.8)
res = engagement_for_effect_threshold(itt, 0.6, 0.2, h80, 0.5)
print(f"\nthreshold transform: crossing at the cut point {res.a_star} (unique: {res.unique})")
