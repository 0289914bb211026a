"""Online rules that turn a stream of pinball subgradients into radii.

Five strategies are provided:

* ``kt``    -- Krichevsky-Trofimov coin betting (parameter free)
* ``ons``   -- coin betting with fractions chosen by an online Newton step
* ``ogd``   -- online subgradient descent with a fixed learning rate
* ``sfogd`` -- scale-free online gradient descent
* ``fixed`` -- a constant radius, used as a regret comparator

States are immutable values. Each ``*_step`` function returns a new state,
so a caller can keep the full history if it wants to. Every field may be a
Python float or a numpy array; with arrays a single call advances a batch of
independent streams elementwise, with results bit-identical to running the
streams one at a time.

The betting strategies treat the negated subgradient ``c_t = -g_t`` as the
outcome of a coin in ``[-1, 1]`` and bet the amount ``s_t = lambda_t W_{t-1}``,
which is used directly as the radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

STRATEGIES = ("kt", "ons", "ogd", "sfogd", "fixed")
GRADIENT_STRATEGIES = ("ogd", "sfogd")

# natural log; precomputed once
ONS_GAIN = 2.0 / (2.0 - math.log(3.0))


def _is_scalar(x) -> bool:
    return np.ndim(x) == 0


def _check_coin(g) -> None:
    if _is_scalar(g):
        if not abs(g) <= 1.0:
            raise ValueError(f"subgradient must lie in [-1, 1], got {g}")
    elif not np.all(np.abs(g) <= 1.0):
        raise ValueError("subgradient must lie in [-1, 1]")


def _check_eta(eta) -> None:
    if eta is None or not np.all(np.asarray(eta) > 0):
        raise ValueError(f"learning rate must be positive, got {eta}")


@dataclass(frozen=True)
class KTState:
    """Krichevsky-Trofimov bettor.

    ``t`` is the index of the round the next update belongs to, starting at 1,
    so the first update uses weights ``1/2, 1/2``.
    """

    wealth: ArrayLike = 1.0
    fraction: ArrayLike = 0.0
    t: int = 1
    radius: ArrayLike = 0.0


@dataclass(frozen=True)
class ONSState:
    wealth: ArrayLike = 1.0
    fraction: ArrayLike = 0.0
    accumulator: ArrayLike = 1.0
    radius: ArrayLike = 0.0


@dataclass(frozen=True)
class OGDState:
    radius: ArrayLike = 0.0
    eta: float = 1.0


@dataclass(frozen=True)
class SFOGDState:
    radius: ArrayLike = 0.0
    eta: float = 1.0
    grad_sq_sum: ArrayLike = 0.0


@dataclass(frozen=True)
class FixedState:
    radius: ArrayLike = 0.0


UpdaterState = Union[KTState, ONSState, OGDState, SFOGDState, FixedState]


def kt_step(state: KTState, g) -> KTState:
    """Advance the KT bettor by one round with subgradient ``g``."""
    _check_coin(g)
    t = state.t
    wealth = state.wealth - g * state.radius
    fraction = (t / (t + 1)) * state.fraction - g / (t + 1)
    return KTState(wealth=wealth, fraction=fraction, t=t + 1, radius=fraction * wealth)


def ons_step(state: ONSState, g) -> ONSState:
    """Advance the ONS bettor by one round with subgradient ``g``.

    The accumulator is updated before it is used in the Newton step, and the
    fraction is clipped to ``[-1/2, 1/2]``.
    """
    _check_coin(g)
    lam = state.fraction
    wealth = state.wealth - g * state.radius
    z = g / (1.0 - lam * g)
    acc = state.accumulator + z * z
    raw = lam - ONS_GAIN * z / acc
    if _is_scalar(raw):
        fraction = min(max(raw, -0.5), 0.5)
    else:
        fraction = np.clip(raw, -0.5, 0.5)
    return ONSState(wealth=wealth, fraction=fraction, accumulator=acc, radius=fraction * wealth)


def ogd_step(state: OGDState, g) -> OGDState:
    return OGDState(radius=state.radius - state.eta * g, eta=state.eta)


def sfogd_step(state: SFOGDState, g) -> SFOGDState:
    """Scale-free OGD step ``s - eta g / sqrt(sum g^2)``.

    While every subgradient seen so far is exactly zero the radius stays put.
    """
    gsum = state.grad_sq_sum + g * g
    if _is_scalar(gsum):
        radius = state.radius - state.eta * g / math.sqrt(gsum) if gsum > 0 else state.radius
    else:
        root = np.sqrt(gsum)
        step = np.divide(state.eta * g, root, out=np.zeros_like(root), where=gsum > 0)
        radius = state.radius - step
    return SFOGDState(radius=radius, eta=state.eta, grad_sq_sum=gsum)


def fixed_step(state: FixedState, g) -> FixedState:
    return state


_STEPS = {
    KTState: kt_step,
    ONSState: ons_step,
    OGDState: ogd_step,
    SFOGDState: sfogd_step,
    FixedState: fixed_step,
}


def update(state: UpdaterState, g) -> UpdaterState:
    """Dispatch to the step function matching ``state``."""
    return _STEPS[type(state)](state, g)


def wealth_of(state: UpdaterState) -> Optional[ArrayLike]:
    """Current wealth for betting strategies, ``None`` for the others."""
    return getattr(state, "wealth", None)


def reset(strategy: str, eta: Optional[float] = None, radius: Optional[float] = None,
          shape: Optional[tuple] = None) -> UpdaterState:
    """Fresh state for ``strategy``.

    Parameters
    ----------
    strategy : {"kt", "ons", "ogd", "sfogd", "fixed"}
    eta : float, optional
        Learning rate; required for ``ogd`` and ``sfogd``.
    radius : float, optional
        The constant radius of ``fixed`` (defaults to 0).
    shape : tuple, optional
        If given, every per-stream field is an array of this shape, so one
        state drives a batch of independent streams.
    """
    def fill(value):
        return value if shape is None else np.full(shape, value, dtype=float)

    if strategy == "kt":
        return KTState(wealth=fill(1.0), fraction=fill(0.0), t=1, radius=fill(0.0))
    if strategy == "ons":
        return ONSState(wealth=fill(1.0), fraction=fill(0.0), accumulator=fill(1.0),
                        radius=fill(0.0))
    if strategy == "ogd":
        _check_eta(eta)
        return OGDState(radius=fill(0.0), eta=float(eta))
    if strategy == "sfogd":
        _check_eta(eta)
        return SFOGDState(radius=fill(0.0), eta=float(eta), grad_sq_sum=fill(0.0))
    if strategy == "fixed":
        value = 0.0 if radius is None else float(radius)
        if not math.isfinite(value):
            raise ValueError(f"fixed radius must be finite, got {radius}")
        return FixedState(radius=fill(value))
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
