"""The online conformal loop.

At every step the current radius ``s_t`` and a point forecast ``y_hat`` define
the closed interval ``[y_hat - s_t, y_hat + s_t]``. Once the response arrives
the score ``S_t = |y - y_hat|`` decides coverage (``S_t <= s_t``), the pinball
subgradient at level ``1 - alpha`` is formed and the radius updater advances
exactly once.

Radii produced by the betting strategies may be negative. They are kept
signed in the trace; the interval they define is empty and its width is
reported as zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .forecasters import ARForecaster, PersistenceForecaster
from .quantile_loss import QuantileLevel, pinball_subgradient
from .updaters import (
    GRADIENT_STRATEGIES,
    KTState,
    ONSState,
    STRATEGIES,
    UpdaterState,
    kt_step,
    ons_step,
    reset,
    update,
    wealth_of,
)


class StreamFaultedError(RuntimeError):
    """Raised when stepping a stream that has already seen a non-finite value."""


class StreamError(ValueError):
    """A step of a batch run failed; ``index`` is the offending position."""

    def __init__(self, index: int, message: str):
        super().__init__(f"step {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class StreamConfig:
    """Settings of one conformal stream.

    ``alpha`` must lie in ``(0, 1/2)``. ``eta`` is required for ``ogd`` and
    ``sfogd``; ``fixed_radius`` is only read by ``fixed``.
    """

    alpha: float = 0.1
    updater: str = "kt"
    eta: Optional[float] = None
    fixed_radius: Optional[float] = None
    horizon: int = 1
    burn_in: int = 50
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if self.updater not in STRATEGIES:
            raise ValueError(f"unknown updater {self.updater!r}; expected one of {STRATEGIES}")
        if self.updater in GRADIENT_STRATEGIES and self.eta is None:
            raise ValueError(f"updater {self.updater!r} requires a learning rate eta")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        self.new_updater()

    @property
    def level(self) -> QuantileLevel:
        return QuantileLevel.from_alpha(self.alpha)

    def new_updater(self, shape=None) -> UpdaterState:
        return reset(self.updater, eta=self.eta, radius=self.fixed_radius, shape=shape)

    @property
    def label(self) -> str:
        if self.updater in GRADIENT_STRATEGIES:
            return f"{self.updater}(eta={self.eta:g})"
        return self.updater


@dataclass(frozen=True)
class PredictionInterval:
    center: float
    radius: float

    @property
    def lower(self) -> float:
        return self.center - self.radius

    @property
    def upper(self) -> float:
        return self.center + self.radius

    @property
    def empty(self) -> bool:
        return self.radius < 0

    @property
    def width(self) -> float:
        return 2.0 * max(self.radius, 0.0)

    def __contains__(self, y) -> bool:
        return self.lower <= y <= self.upper


@dataclass(frozen=True)
class StepTrace:
    """One row of a stream trace.

    ``wealth`` is the bettor's wealth after this step's update (``W_t``);
    ``None`` for gradient strategies. ``y`` and ``y_hat`` are ``nan`` in
    score-only streams.
    """

    t: int
    y: float
    y_hat: float
    score: float
    radius: float
    covered: bool
    width: float
    g: float
    wealth: Optional[float] = None

    @property
    def lower(self) -> float:
        return self.y_hat - self.radius

    @property
    def upper(self) -> float:
        return self.y_hat + self.radius


@dataclass
class Trace:
    """Column-oriented trace; every field is an array of equal length.

    ``wealth`` is all-``nan`` for gradient strategies.
    """

    t: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray
    score: np.ndarray
    radius: np.ndarray
    covered: np.ndarray
    g: np.ndarray
    wealth: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @property
    def width(self) -> np.ndarray:
        return 2.0 * np.maximum(self.radius, 0.0)

    @property
    def lower(self) -> np.ndarray:
        return self.y_hat - self.radius

    @property
    def upper(self) -> np.ndarray:
        return self.y_hat + self.radius

    def __getitem__(self, idx) -> "Trace":
        return Trace(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    @classmethod
    def empty(cls) -> "Trace":
        return cls.from_rows([])

    @classmethod
    def from_rows(cls, rows: Sequence[StepTrace]) -> "Trace":
        def col(name, dtype=float):
            return np.array([getattr(r, name) for r in rows], dtype=dtype)

        wealth = np.array([np.nan if r.wealth is None else r.wealth for r in rows], dtype=float)
        return cls(t=col("t", int), y=col("y"), y_hat=col("y_hat"), score=col("score"),
                   radius=col("radius"), covered=col("covered", bool), g=col("g"),
                   wealth=wealth)

    @classmethod
    def concat(cls, parts: Sequence["Trace"]) -> "Trace":
        return cls(**{f.name: np.concatenate([getattr(p, f.name) for p in parts])
                      for f in fields(cls)})

    def rows(self) -> List[StepTrace]:
        out = []
        for i in range(len(self)):
            w = self.wealth[i]
            out.append(StepTrace(
                t=int(self.t[i]), y=float(self.y[i]), y_hat=float(self.y_hat[i]),
                score=float(self.score[i]), radius=float(self.radius[i]),
                covered=bool(self.covered[i]), width=float(self.width[i]), g=float(self.g[i]),
                wealth=None if np.isnan(w) else float(w)))
        return out


def _finite(v) -> bool:
    return v is not None and math.isfinite(v)


class ConformalStream:
    """A single online conformal predictor.

    Parameters
    ----------
    config : StreamConfig
    forecaster : object, optional
        Anything with ``predict(x)`` and ``update(x, y)``; defaults to
        persistence. Unused by :meth:`step_score`.
    """

    def __init__(self, config: StreamConfig, forecaster=None):
        self.config = config
        self.level = config.level
        self.forecaster = PersistenceForecaster() if forecaster is None else forecaster
        self.state = config.new_updater()
        self.t = 0
        self.faulted = False

    @property
    def radius(self) -> float:
        return self.state.radius

    def interval(self, x=None) -> PredictionInterval:
        """Interval for the next response, built before it is revealed."""
        return PredictionInterval(center=self.forecaster.predict(x), radius=self.state.radius)

    def _fault(self, message: str):
        self.faulted = True
        raise ValueError(message)

    def _check_live(self):
        if self.faulted:
            raise StreamFaultedError("stream saw a non-finite value and refuses further steps")

    def _advance(self, score: float, y: float, y_hat: float) -> StepTrace:
        s = self.state.radius
        g = pinball_subgradient(s, score, self.level)
        self.state = update(self.state, g)
        self.t += 1
        return StepTrace(t=self.t, y=y, y_hat=y_hat, score=score, radius=s,
                         covered=score <= s, width=2.0 * max(s, 0.0), g=g,
                         wealth=wealth_of(self.state))

    def step(self, y: float, x=None):
        """Forecast, reveal ``y``, score it and update the radius.

        Returns the interval that was issued and the trace row.
        """
        self._check_live()
        interval = self.interval(x)
        if not _finite(interval.center):
            self._fault(f"non-finite forecast {interval.center}")
        if not _finite(y):
            self._fault(f"non-finite response {y}")
        y = float(y)
        score = abs(y - interval.center)
        row = self._advance(score, y, interval.center)
        self.forecaster.update(x, y)
        return interval, row

    def step_score(self, score: float) -> StepTrace:
        """Advance on a precomputed nonconformity score, bypassing the forecaster."""
        self._check_live()
        if not _finite(score):
            self._fault(f"non-finite score {score}")
        if score < 0:
            self._fault(f"nonconformity scores must be nonnegative, got {score}")
        return self._advance(float(score), math.nan, math.nan)


class MultiHorizonConformal:
    """One independent updater per forecast step ``k = 1..H``.

    All ``H`` forecasts of a block are issued before any of its responses is
    revealed; afterwards each updater advances exactly once on its own step's
    subgradient.
    """

    def __init__(self, config: StreamConfig):
        self.config = config
        self.level = config.level
        self.horizon = config.horizon
        self.states = [config.new_updater() for _ in range(self.horizon)]
        self.t = 0

    @property
    def radii(self) -> List[float]:
        return [st.radius for st in self.states]

    def intervals(self, forecasts) -> List[PredictionInterval]:
        if len(forecasts) != self.horizon:
            raise ValueError(f"expected {self.horizon} forecasts, got {len(forecasts)}")
        return [PredictionInterval(float(f), st.radius) for f, st in zip(forecasts, self.states)]

    def step_block(self, ys, forecasts):
        if len(ys) != self.horizon:
            raise ValueError(f"expected a block of {self.horizon} responses, got {len(ys)}")
        intervals = self.intervals(forecasts)
        rows = []
        for k, (y, iv) in enumerate(zip(ys, intervals)):
            if not (_finite(y) and _finite(iv.center)):
                raise ValueError(f"non-finite value in block at step {k + 1}")
            y = float(y)
            s = iv.radius
            score = abs(y - iv.center)
            g = pinball_subgradient(s, score, self.level)
            self.states[k] = update(self.states[k], g)
            rows.append(StepTrace(t=self.t + k + 1, y=y, y_hat=iv.center, score=score, radius=s,
                                  covered=score <= s, width=2.0 * max(s, 0.0), g=g,
                                  wealth=wealth_of(self.states[k])))
        self.t += self.horizon
        return intervals, rows


def _pairs(data) -> Iterable:
    for item in data:
        if isinstance(item, tuple):
            yield item
        else:
            yield None, item


def run_stream(config: StreamConfig, forecaster, data) -> Trace:
    """Drive one stream over ``data``.

    ``data`` yields either ``(x, y)`` pairs or bare responses. Any failing
    step is re-raised as :class:`StreamError` carrying its index.
    """
    stream = ConformalStream(config, forecaster)
    rows = []
    for i, (x, y) in enumerate(_pairs(data)):
        try:
            rows.append(stream.step(y, x)[1])
        except (ValueError, StreamFaultedError) as exc:
            raise StreamError(i, str(exc)) from exc
    return Trace.from_rows(rows)


def run_scores(scores, config: StreamConfig, state: Optional[UpdaterState] = None):
    """Run the updater on precomputed scores.

    ``scores`` is one stream ``(T,)`` or a batch ``(n, T)`` of independent
    streams sharing ``config``. Returns a :class:`Trace` for one stream, or a
    dict of ``(n, T)`` arrays (``radius``, ``covered``, ``g``, ``wealth``) for
    a batch. Radii match :class:`ConformalStream` bit for bit.
    """
    scores = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(scores)):
        bad = int(np.flatnonzero(~np.isfinite(scores.reshape(-1)))[0])
        raise StreamError(bad % max(scores.shape[-1], 1), "non-finite score")
    if np.any(scores < 0):
        raise ValueError("nonconformity scores must be nonnegative")
    level = config.level
    batched = scores.ndim == 2
    T = scores.shape[-1]
    if state is None:
        state = config.new_updater(shape=scores.shape[:1] if batched else None)
    radius = np.empty(scores.shape)
    g_all = np.empty(scores.shape)
    wealth = np.full(scores.shape, np.nan)
    betting = isinstance(state, (KTState, ONSState))
    step_fn = {KTState: kt_step, ONSState: ons_step}.get(type(state), update)
    cols = scores.T if batched else scores.tolist()
    for t in range(T):
        s = state.radius
        g = pinball_subgradient(s, cols[t], level)
        state = step_fn(state, g)
        radius[..., t] = s
        g_all[..., t] = g
        if betting:
            wealth[..., t] = state.wealth
    covered = scores <= radius
    if batched:
        return {"radius": radius, "covered": covered, "g": g_all, "wealth": wealth,
                "score": scores, "state": state}
    nan = np.full(T, np.nan)
    return Trace(t=np.arange(1, T + 1), y=nan, y_hat=nan.copy(), score=scores, radius=radius,
                 covered=covered, g=g_all, wealth=wealth)


def run_multi_horizon(series, config: StreamConfig, p: int = 3) -> List[Trace]:
    """Multi-step conformal forecasting of a univariate series.

    An AR(p) model refit every ``H`` observations issues recursive ``H``-step
    forecasts; each step ``k`` owns its radius. A trailing partial block is
    dropped. Returns one :class:`Trace` per step ``k = 1..H``.
    """
    H = config.horizon
    series = np.asarray(series, dtype=float)
    model = ARForecaster(p=p, refit_every=H)
    manager = MultiHorizonConformal(config)
    per_step: List[list] = [[] for _ in range(H)]
    for start in range(0, len(series) - H + 1, H):
        block = series[start:start + H]
        forecasts = model.forecast(H)
        try:
            _, rows = manager.step_block(block, forecasts)
        except ValueError as exc:
            raise StreamError(start, str(exc)) from exc
        for k, row in enumerate(rows):
            per_step[k].append(row)
        for y in block:
            model.update(None, y)
    return [Trace.from_rows(rows) for rows in per_step]
