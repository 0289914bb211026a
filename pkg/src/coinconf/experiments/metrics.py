"""Coverage, width and regret summaries of conformal traces.

Functions take either a :class:`~coinconf.engine.Trace` or a batch dict as
returned by :func:`~coinconf.engine.run_scores`; array inputs may carry a
leading seed axis, with statistics computed along the last (time) axis.
Rolling windows are trailing: entry ``i`` summarises steps ``i - w + 1 .. i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..quantile_loss import QuantileLevel, pinball_loss

GRID_POINTS = 1001
GRID_SPAN = 1.5


def _col(trace, name):
    if isinstance(trace, dict):
        return np.asarray(trace[name])
    return np.asarray(getattr(trace, name))


def widths(trace) -> np.ndarray:
    return 2.0 * np.maximum(_col(trace, "radius"), 0.0)


def rolling_mean(x, window: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if not 1 <= window <= n:
        raise ValueError(f"window {window} must lie in [1, {n}]")
    c = np.cumsum(x, axis=-1)
    zero = np.zeros(x.shape[:-1] + (1,))
    c = np.concatenate([zero, c], axis=-1)
    return (c[..., window:] - c[..., :-window]) / window


@dataclass
class MetricsReport:
    coverage: float
    mean_width: float
    rolling_coverage: np.ndarray
    rolling_width: np.ndarray
    width_deviation: Optional[np.ndarray] = None
    regret_curve: Optional[np.ndarray] = None
    best_fixed: Optional[float] = None
    window: int = 100
    burn_in: int = 0
    n: int = 0

    @property
    def miscoverage(self) -> float:
        return 1.0 - self.coverage


def coverage_metrics(trace, window: int = 100, burn_in: int = 0,
                     deviation_window: Optional[int] = 10) -> MetricsReport:
    """Empirical and rolling coverage and width after discarding ``burn_in`` steps.

    Scalars are averaged over every axis, so for a batch they are the mean
    over seeds of each seed's figure; rolling series keep their seed axis.
    """
    covered = _col(trace, "covered")[..., burn_in:].astype(float)
    width = widths(trace)[..., burn_in:]
    n = covered.shape[-1]
    if n == 0:
        raise ValueError("trace is empty after burn-in")
    if window > n:
        raise ValueError(f"window {window} exceeds trace length {n}")
    dev = None
    if deviation_window is not None and n >= deviation_window:
        dev = width_deviation(width, deviation_window)
    return MetricsReport(
        coverage=float(covered.mean()),
        mean_width=float(width.mean()),
        rolling_coverage=rolling_mean(covered, window),
        rolling_width=rolling_mean(width, window),
        width_deviation=dev,
        window=window,
        burn_in=burn_in,
        n=n,
    )


def width_deviation(trace_or_widths, window: int = 10) -> np.ndarray:
    """Rolling sample standard deviation (``ddof=1``) of interval widths."""
    if isinstance(trace_or_widths, np.ndarray) or isinstance(trace_or_widths, (list, tuple)):
        w = np.asarray(trace_or_widths, dtype=float)
    else:
        w = widths(trace_or_widths)
    if window < 2:
        raise ValueError("window must be at least 2")
    if w.shape[-1] < window:
        raise ValueError(f"trace of length {w.shape[-1]} is shorter than window {window}")
    return sliding_window_view(w, window, axis=-1).std(axis=-1, ddof=1)


def local_coverage_deviation(trace, alpha: float, half_window: int = 10) -> np.ndarray:
    """``|mean miss over a window of 2*half_window steps - alpha|``."""
    miss = 1.0 - _col(trace, "covered").astype(float)
    return np.abs(rolling_mean(miss, 2 * half_window) - alpha)


def default_grid(scores, points: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, GRID_SPAN * float(np.max(scores)), points)


def cumulative_losses(scores, grid, level: QuantileLevel, chunk: int = 4096) -> np.ndarray:
    """Total pinball loss of each fixed radius in ``grid`` over ``scores``."""
    scores = np.asarray(scores, dtype=float)
    grid = np.asarray(grid, dtype=float)
    total = np.zeros(grid.shape)
    for i in range(0, scores.shape[0], chunk):
        block = scores[i:i + chunk, None]
        total += pinball_loss(grid[None, :], block, level).sum(axis=0)
    return total


def regret(trace, alpha: float, grid=None):
    """Regret curve against the best fixed radius on ``grid``.

    Returns ``(curve, best)`` where ``curve[t]`` is the cumulative pinball
    loss of the trace's radii minus that of ``best`` over steps ``1..t+1``.
    The best radius minimises total loss; ties go to the smaller radius.
    """
    scores = _col(trace, "score").astype(float)
    radii = _col(trace, "radius").astype(float)
    if scores.ndim != 1:
        raise ValueError("regret works on one stream at a time")
    level = QuantileLevel.from_alpha(alpha)
    grid = default_grid(scores) if grid is None else np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty comparator grid")
    best = float(grid[int(np.argmin(cumulative_losses(scores, grid, level)))])
    curve = np.cumsum(pinball_loss(radii, scores, level) - pinball_loss(best, scores, level))
    return curve, best
