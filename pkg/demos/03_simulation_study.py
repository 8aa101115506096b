"""
A small Monte Carlo study
=========================

Replicate one cell of the simulation design at desk scale, then show the
bias that follows from specifying the wrong gamma. Set K higher for
tighter numbers; LATE_BOUNDS_THREADS=4 runs iterations in parallel.
"""

import sys

import numpy as np

from late_bounds.simulate import misspecification_sweep, monte_carlo, design_scenario

K = int(sys.argv[1]) if len(sys.argv) > 1 else 100

spec = design_scenario(0.5, "mid", 250)
mc = monte_carlo(spec, K=K, B=100, seed=1)
print(f"{spec.name}: true mu_A = {mc.mu_a:.4f}, gamma0 = {mc.gamma0:g}, K = {K}")
print(f"{'quantity':<24}{'truth':>8}{'Est':>8}{'ESE':>8}{'SE_LST':>8}{'SE_B':>8}")
for r in mc.summary_rows():
    print(f"{r['quantity']:<24}{r['truth']:8.3f}{r['est']:8.3f}{r['ese']:8.3f}{r['se_lst']:8.3f}{r['se_b']:8.3f}")

# bias of Delta_gamma(a) when gamma is misspecified (truth: gamma0 = 0.5)
gammas = np.linspace(0, 1, 5)
sweep = misspecification_sweep(spec, gammas, (0.0, 1.0), K=K, seed=2)
print("\nspecified gamma   bias Delta(0)   bias Delta(1)")
for g, (b0, b1) in zip(gammas, sweep.bias):
    print(f"{g:15.2f}{b0:16.3f}{b1:16.3f}")
