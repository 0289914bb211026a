"""
Several steps ahead with an AR(3) forecaster
============================================

An AR(3) model is refit every H steps and rolled forward recursively to
forecast steps 1..H. Each lead time gets its own conformal predictor, since
errors grow with the horizon.
"""

import numpy as np

from coinconf import StreamConfig, run_multi_horizon

rng = np.random.default_rng(3)
y = np.zeros(5_000)
for t in range(3, len(y)):
    y[t] = 0.5 * y[t - 1] + 0.2 * y[t - 2] - 0.1 * y[t - 3] + rng.standard_normal()

traces = run_multi_horizon(y, StreamConfig(alpha=0.1, horizon=5), p=3)
for k, tr in enumerate(traces, start=1):
    tail = tr[50:]
    print(f"step {k}: coverage {tail.covered.mean():.3f}, mean width {tail.width.mean():.3f}")
