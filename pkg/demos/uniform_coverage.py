"""
Tracking a quantile without a learning rate
===========================================

With i.i.d. Uniform[0, 1] scores the ideal radius is the 0.9 quantile, 0.9.
The KT bettor starts at radius 0 and has no step size to tune.
"""

import numpy as np

from coinconf import StreamConfig, run_scores
from coinconf.experiments import regret

scores = np.random.default_rng(0).uniform(0, 1, 100_000)

for updater in ("kt", "ons"):
    trace = run_scores(scores, StreamConfig(alpha=0.1, updater=updater))
    print(f"{updater}: coverage {trace.covered.mean():.4f}, "
          f"final-10% mean radius {trace.radius[-10_000:].mean():.4f}")

# How the radius approaches the quantile: early steps swing, later ones settle.
trace = run_scores(scores, StreamConfig())
for t in (10, 100, 1_000, 10_000, 100_000):
    print(f"t={t:>6}  radius {trace.radius[t - 1]:.4f}  wealth {trace.wealth[t - 1]:.3g}")

# Average regret against the best constant radius shrinks with T.
for T in (1_000, 10_000, 100_000):
    curve, best = regret(trace[:T], alpha=0.1)
    print(f"T={T:>6}  R_T/T = {curve[-1] / T:.5f}  (best fixed radius {best:.3f})")
