"""Synthetic linear regression with coefficient changepoints.

``Y_t = X_t @ beta_t + eps_t`` with ``X_t ~ N(0, I_4)``, ``eps_t ~ N(0, sigma^2)``
and ``beta_t`` piecewise constant over segments.

Randomness: ``ChangepointSpec.seed`` feeds a ``numpy.random.SeedSequence`` that is
spawned into one child per segment; each child drives a PCG64 generator that
draws the segment's features (row-major, ``(length, d)``) and then its noise.
Normals come from numpy's ziggurat sampler.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from ..engine import StreamConfig, run_scores
from ..forecasters import DEFAULT_DECAY, RecursiveLeastSquares

DEFAULT_SEGMENTS: Tuple = (
    (500, (2.0, 1.0, 0.0, 0.0)),
    (1000, (0.0, -2.0, -1.0, 0.0)),
    (500, (0.0, 0.0, 2.0, 1.0)),
)


@dataclass(frozen=True)
class ChangepointSpec:
    segments: Tuple = DEFAULT_SEGMENTS
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.segments:
            raise ValueError("changepoint spec needs at least one segment")
        dims = {len(beta) for _, beta in self.segments}
        if len(dims) != 1:
            raise ValueError("all segments must share the coefficient dimension")
        if any(n <= 0 for n, _ in self.segments):
            raise ValueError("segment lengths must be positive")
        if self.noise < 0:
            raise ValueError("noise scale must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.segments[0][1])

    @property
    def length(self) -> int:
        return sum(n for n, _ in self.segments)

    @property
    def boundaries(self) -> list:
        return list(np.cumsum([n for n, _ in self.segments])[:-1])

    def coefficients(self) -> np.ndarray:
        """Per-step true coefficients, shape ``(T, d)``."""
        return np.concatenate([np.tile(np.asarray(b, float), (n, 1)) for n, b in self.segments])


def generate_changepoint(spec: ChangepointSpec = ChangepointSpec()):
    """Features ``X`` of shape ``(T, d)`` and responses ``y`` of shape ``(T,)``."""
    children = np.random.SeedSequence(spec.seed).spawn(len(spec.segments))
    xs, ys = [], []
    for (n, beta), child in zip(spec.segments, children):
        rng = np.random.Generator(np.random.PCG64(child))
        X = rng.standard_normal((n, spec.dim))
        eps = rng.standard_normal(n)
        xs.append(X)
        ys.append(X @ np.asarray(beta, float) + spec.noise * eps)
    return np.concatenate(xs), np.concatenate(ys)


def generate_batch(seeds: Iterable[int], spec: ChangepointSpec = ChangepointSpec()):
    """Stacked data for several seeds: ``X`` (S, T, d), ``y`` (S, T)."""
    pairs = [generate_changepoint(ChangepointSpec(spec.segments, spec.noise, int(s)))
             for s in seeds]
    return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])


def online_least_squares_scores(X, y, decay=None):
    """Absolute residuals of an online (weighted) least-squares forecaster.

    The forecast for step ``t`` uses only rows before ``t`` and is 0 until
    ``d`` rows are available. Works on a single stream ``(T, d)`` or a batch
    ``(S, T, d)``; returns ``(y_hat, scores)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    batch = X.shape[:-2]
    T, d = X.shape[-2:]
    rls = RecursiveLeastSquares(d, decay, batch=batch)
    y_hat = np.zeros(y.shape)
    for t in range(T):
        if rls.n >= d:
            coef = rls.solve()
            y_hat[..., t] = np.einsum("...j,...j->...", X[..., t, :], coef)
        rls.add(X[..., t, :], y[..., t])
    return y_hat, np.abs(y - y_hat)


@dataclass
class ChangepointRun:
    """Scores shared by every method plus per-method batched results."""

    y: np.ndarray
    y_hat: np.ndarray
    scores: np.ndarray
    results: Dict[str, dict] = field(default_factory=dict)
    configs: Dict[str, StreamConfig] = field(default_factory=dict)


def run_changepoint(configs: Sequence[StreamConfig], seeds: Sequence[int],
                    forecaster: str = "ols", spec: ChangepointSpec = ChangepointSpec(),
                    decay: float = DEFAULT_DECAY) -> ChangepointRun:
    """Run every config on the same seeds.

    The forecaster does not depend on the radii, so scores are computed once
    per seed and reused by all methods. ``forecaster`` is ``"ols"`` or
    ``"wls"`` (geometric weights with ``decay``).
    """
    if len(seeds) == 0:
        raise ValueError("need at least one seed")
    if forecaster not in ("ols", "wls"):
        raise ValueError(f"unknown forecaster {forecaster!r}")
    X, y = generate_batch(seeds, spec)
    y_hat, scores = online_least_squares_scores(X, y, decay if forecaster == "wls" else None)
    run = ChangepointRun(y=y, y_hat=y_hat, scores=scores)
    for cfg in configs:
        run.results[cfg.label] = run_scores(scores, cfg)
        run.configs[cfg.label] = cfg
    return run
