"""Point forecasters used inside the conformal loop.

Batch fits (``ols_fit``, ``wls_fit``, ``ar_fit``) solve the normal equations.
The online classes keep running normal-equation sums, so refitting after
every observation costs O(d^2) work plus one small solve.

All online forecasters share a two-method protocol::

    y_hat = model.predict(x)   # before the response is revealed
    model.update(x, y)         # after

``x`` is ignored by forecasters that only look at the response history.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

RIDGE_JITTER = 1e-8
# smallest/largest eigenvalue ratio below which the normal matrix is treated
# as rank deficient and regularised
RANK_TOL = 1e-10
DEFAULT_DECAY = 0.99


class NotFittedError(RuntimeError):
    pass


def solve_normal_equations(gram, moment):
    """Solve ``gram @ beta = moment`` for a symmetric PSD ``gram``.

    Leading axes are batch axes. Any matrix whose eigenvalue spread exceeds
    ``1 / RANK_TOL`` (including the all-zero matrix) gets ``RIDGE_JITTER``
    times its mean eigenvalue added to the diagonal; an all-zero system
    therefore solves to ``beta = 0``.
    """
    gram = np.asarray(gram, dtype=float)
    moment = np.asarray(moment, dtype=float)
    d = gram.shape[-1]
    eig = np.linalg.eigvalsh(gram)
    lo, hi = eig[..., 0], eig[..., -1]
    deficient = ~(lo > RANK_TOL * hi)
    if np.any(deficient):
        scale = np.trace(gram, axis1=-2, axis2=-1) / d
        scale = np.where(scale > 0, scale, 1.0)
        ridge = np.where(deficient, RIDGE_JITTER * scale, 0.0)
        gram = gram + ridge[..., None, None] * np.eye(d)
    return np.linalg.solve(gram, moment[..., None])[..., 0]


@dataclass
class LinearModel:
    """Linear predictor ``x @ coef``; ``coef`` is ``None`` until fitted."""

    dim: int
    coef: Optional[np.ndarray] = None

    @property
    def fitted(self) -> bool:
        return self.coef is not None

    def predict(self, x) -> float:
        if self.coef is None:
            raise NotFittedError("model has not been fitted")
        return float(np.asarray(x, dtype=float) @ self.coef)


@dataclass
class WeightedLinearModel(LinearModel):
    decay: float = DEFAULT_DECAY


def _design(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} responses")
    if X.shape[0] == 0:
        raise ValueError("cannot fit on an empty history")
    return X, y


def ols_fit(X, y) -> LinearModel:
    """Ordinary least squares on rows of ``X`` (n, d) against ``y`` (n,)."""
    X, y = _design(X, y)
    coef = solve_normal_equations(X.T @ X, X.T @ y)
    return LinearModel(dim=X.shape[1], coef=coef)


def decay_weights(n: int, decay: float = DEFAULT_DECAY) -> np.ndarray:
    """Weights ``decay ** (n + 1 - i)`` for rows ``i = 1..n`` (oldest first)."""
    return decay ** np.arange(n, 0, -1, dtype=float)


def wls_fit(X, y, decay: float = DEFAULT_DECAY) -> WeightedLinearModel:
    """Least squares with geometrically decaying weights favouring recent rows."""
    if not 0.0 < decay < 1.0:
        raise ValueError(f"decay must lie in (0, 1), got {decay}")
    X, y = _design(X, y)
    w = decay_weights(X.shape[0], decay)
    Xw = X * w[:, None]
    coef = solve_normal_equations(Xw.T @ X, Xw.T @ y)
    return WeightedLinearModel(dim=X.shape[1], coef=coef, decay=decay)


class RecursiveLeastSquares:
    """Running (optionally exponentially weighted) normal equations.

    With ``decay=None`` every row has weight one. Otherwise, after ``n`` rows,
    row ``i`` carries weight ``decay ** (n + 1 - i)``, matching :func:`wls_fit`.

    ``batch`` adds leading axes so that many independent regressions advance
    in lockstep; ``add`` then takes ``x`` of shape ``batch + (dim,)``.
    """

    def __init__(self, dim: int, decay: Optional[float] = None, batch: tuple = ()):
        if decay is not None and not 0.0 < decay < 1.0:
            raise ValueError(f"decay must lie in (0, 1), got {decay}")
        self.dim = dim
        self.decay = decay
        self.n = 0
        self.gram = np.zeros(batch + (dim, dim))
        self.moment = np.zeros(batch + (dim,))

    def add(self, x, y) -> None:
        x = np.asarray(x, dtype=float)
        self.gram += x[..., :, None] * x[..., None, :]
        self.moment += x * np.asarray(y, dtype=float)[..., None]
        if self.decay is not None:
            self.gram *= self.decay
            self.moment *= self.decay
        self.n += 1

    def solve(self) -> np.ndarray:
        return solve_normal_equations(self.gram, self.moment)


class OnlineLinearForecaster:
    """Linear forecaster refit on all observations seen so far.

    Predicts 0 until at least ``dim`` observations have arrived. Set
    ``decay`` for the weighted variant.
    """

    def __init__(self, dim: int, decay: Optional[float] = None, refit_every: int = 1):
        if refit_every < 1:
            raise ValueError("refit_every must be positive")
        self.rls = RecursiveLeastSquares(dim, decay)
        self.refit_every = refit_every
        self.coef: Optional[np.ndarray] = None

    def predict(self, x) -> float:
        if self.coef is None:
            return 0.0
        return float(np.asarray(x, dtype=float) @ self.coef)

    def update(self, x, y) -> None:
        self.rls.add(x, y)
        n = self.rls.n
        if n >= self.rls.dim and (self.coef is None or n % self.refit_every == 0):
            self.coef = self.rls.solve()


def persistence_forecast(history: Sequence[float]) -> float:
    """Last observed response, or 0 for an empty history."""
    return float(history[-1]) if len(history) else 0.0


class PersistenceForecaster:
    def __init__(self):
        self.last: Optional[float] = None

    def predict(self, x=None) -> float:
        return 0.0 if self.last is None else self.last

    def update(self, x, y) -> None:
        self.last = float(y)


@dataclass
class ARModel:
    """Autoregression ``y_t = intercept + sum_k phi[k] y_{t-1-k}``."""

    order: int
    phi: Optional[np.ndarray] = None
    intercept: float = 0.0
    refit_every: int = 1

    @property
    def fitted(self) -> bool:
        return self.phi is not None


def lag_matrix(series, p: int):
    """Rows ``(1, y_{t-1}, ..., y_{t-p})`` and targets ``y_t`` for ``t >= p``."""
    y = np.asarray(series, dtype=float)
    n = y.shape[0] - p
    X = np.ones((n, p + 1))
    for k in range(1, p + 1):
        X[:, k] = y[p - k:p - k + n]
    return X, y[p:]


def ar_fit(series, p: int, refit_every: int = 1) -> ARModel:
    """Least-squares AR(p) fit with intercept. Needs ``len(series) >= p + 2``."""
    if p < 1:
        raise ValueError("AR order must be positive")
    if len(series) < p + 2:
        raise ValueError(f"AR({p}) needs at least {p + 2} observations, got {len(series)}")
    X, y = lag_matrix(series, p)
    coef = solve_normal_equations(X.T @ X, X.T @ y)
    return ARModel(order=p, phi=coef[1:], intercept=float(coef[0]), refit_every=refit_every)


def ar_forecast(model: ARModel, recent, horizon: int) -> np.ndarray:
    """Recursive multi-step forecast.

    ``recent`` holds the last ``p`` observations, oldest first. Each forecast
    is appended to the lag buffer and feeds the next step.
    """
    if not model.fitted:
        raise NotFittedError("AR model has not been fitted")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    p = model.order
    if len(recent) != p:
        raise ValueError(f"need exactly {p} recent values, got {len(recent)}")
    buf = [float(v) for v in recent]
    out = np.empty(horizon)
    for k in range(horizon):
        # buf[-1] is the most recent lag
        yhat = model.intercept
        for j in range(p):
            yhat += model.phi[j] * buf[-1 - j]
        out[k] = yhat
        buf.append(yhat)
    return out


class ARForecaster:
    """Online AR(p) forecaster with a refit cadence.

    Lag rows are folded into running normal equations as observations
    arrive, so a refit gives the same coefficients as :func:`ar_fit` on the
    full history. Falls back to persistence until ``p + 2`` observations are
    available.
    """

    def __init__(self, p: int = 3, refit_every: int = 1):
        if p < 1:
            raise ValueError("AR order must be positive")
        if refit_every < 1:
            raise ValueError("refit_every must be positive")
        self.p = p
        self.refit_every = refit_every
        self.history: list = []
        self.model: Optional[ARModel] = None
        self._rls = RecursiveLeastSquares(p + 1)
        self._since_fit = 0

    def forecast(self, horizon: int = 1) -> np.ndarray:
        if self.model is None:
            return np.full(horizon, persistence_forecast(self.history))
        return ar_forecast(self.model, self.history[-self.p:], horizon)

    def predict(self, x=None) -> float:
        return float(self.forecast(1)[0])

    def update(self, x, y) -> None:
        p = self.p
        if len(self.history) >= p:
            row = np.ones(p + 1)
            row[1:] = self.history[:-p - 1:-1]
            self._rls.add(row, y)
        self.history.append(float(y))
        self._since_fit += 1
        ready = len(self.history) >= p + 2
        if ready and (self.model is None or self._since_fit >= self.refit_every):
            coef = self._rls.solve()
            self.model = ARModel(order=p, phi=coef[1:], intercept=float(coef[0]),
                                 refit_every=self.refit_every)
            self._since_fit = 0
