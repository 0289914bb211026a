"""Run-time checks of the KT bettor's behaviour on bounded score streams.

For scores in ``[0, D]`` and ``alpha < 1/2`` the KT conformal predictor
satisfies, at every step:

* wealth stays nonnegative, and ``W_t = 1 - sum_{i<=t} g_i s_i``;
* consecutive radii differ by at most ``2D + 1``;
* every radius satisfies ``|s_t| <= 3D + 1``;
* a radius above ``D`` is followed by a strictly smaller one;
* a sign change ``s_i >= 0 > s_{i+1}`` is undone at once: ``s_{i+2} > 0``.

:func:`theorem_probe` drives a batch of streams in lockstep and counts
violations of each property. With the ``unbounded`` adversary no bound
applies; the interesting figure is the miscoverage, which is exactly one.
Under that adversary the radius grows geometrically and overflows float64
after roughly a thousand steps, so the run stops once a radius passes
``OVERFLOW_GUARD`` and ``steps`` records how far it got.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from ..quantile_loss import QuantileLevel, pinball_subgradient
from ..updaters import kt_step, reset

ADVERSARIES = ("flipper", "constant", "random", "uniform", "unbounded")
CHECKS = ("wealth_nonnegative", "wealth_identity", "step_bound", "radius_bound",
          "overshoot_decay", "sign_recovery")
IDENTITY_RTOL = 1e-9
# stop before radii, wealth or their running sums can overflow float64
OVERFLOW_GUARD = 1e300


def random_bounded_scores(n: int, T: int, D: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` score streams of length ``T`` with values in ``[0, D]``.

    Each stream draws its own family: uniform, scaled beta, two-point
    ``{0, D}``, regime switching between random sub-intervals, or constant.
    """
    out = np.empty((n, T))
    family = rng.integers(0, 5, size=n)
    for j in range(n):
        f = family[j]
        if f == 0:
            out[j] = rng.uniform(0.0, D, T)
        elif f == 1:
            a, b = np.exp(rng.uniform(np.log(0.2), np.log(5.0), 2))
            out[j] = D * rng.beta(a, b, T)
        elif f == 2:
            out[j] = D * (rng.random(T) < rng.random())
        elif f == 3:
            length = int(rng.integers(20, 2000))
            k = -(-T // length)
            lo, hi = np.sort(rng.uniform(0.0, D, (2, k)), axis=0)
            idx = np.arange(T) // length
            out[j] = lo[idx] + (hi[idx] - lo[idx]) * rng.random(T)
        else:
            out[j] = rng.uniform(0.0, D)
    return np.clip(out, 0.0, D)


def _adversary(name: str, D: float, n: int, T: int, seed: int
               ) -> Union[np.ndarray, Callable[[np.ndarray, int], np.ndarray]]:
    if name == "flipper":
        return lambda s, t: np.where(s >= D / 2, D, 0.0)
    if name == "unbounded":
        # s + 1 is absorbed once |s| > 2**53; keep the miss strict in floating point
        return lambda s, t: np.maximum(s, 0.0) + np.maximum(1.0, np.abs(s))
    rng = np.random.default_rng(seed)
    if name == "constant":
        return np.repeat(rng.uniform(0.0, D, (n, 1)), T, axis=1)
    if name == "uniform":
        return rng.uniform(0.0, D, (n, T))
    if name == "random":
        return random_bounded_scores(n, T, D, rng)
    raise ValueError(f"unknown adversary {name!r}; expected one of {ADVERSARIES}")


@dataclass
class ProbeReport:
    D: float
    alpha: float
    T: int
    n_streams: int
    adversary: str
    violations: Dict[str, int] = field(default_factory=dict)
    first_violation: Dict[str, Optional[Tuple[int, int]]] = field(default_factory=dict)
    max_step: float = 0.0
    max_abs_radius: float = 0.0
    min_wealth: float = np.inf
    max_identity_error: float = 0.0
    miscoverage: float = 0.0
    steps: int = 0
    # per-step extrema across streams, indexed by step t = 1..steps
    extrema: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def bounded(self) -> bool:
        return self.adversary != "unbounded"

    @property
    def passed(self) -> bool:
        if not self.bounded:
            return self.miscoverage == 1.0
        return all(v == 0 for v in self.violations.values())

    def status(self, check: str) -> str:
        if not self.bounded and check != "wealth_identity":
            return "not applicable (scores unbounded)"
        return "pass" if self.violations[check] == 0 else "FAIL"

    def summary_rows(self):
        rows = []
        for c in CHECKS:
            first = self.first_violation.get(c)
            rows.append({"check": c, "status": self.status(c), "violations": self.violations[c],
                         "first_stream": "" if first is None else first[0],
                         "first_step": "" if first is None else first[1]})
        status = "expected by necessity argument" if not self.bounded else "info"
        rows.append({"check": "miscoverage", "status": status,
                     "violations": f"{self.miscoverage:.6f}", "first_stream": "",
                     "first_step": ""})
        return rows


def theorem_probe(D: float = 1.0, alpha: float = 0.1, T: int = 10_000,
                  adversary: str = "flipper", n_streams: int = 1, seed: int = 0,
                  scores: Optional[np.ndarray] = None) -> ProbeReport:
    """Drive ``n_streams`` KT conformal predictors and check every property.

    ``scores`` (shape ``(n, T)``) overrides the adversary with an explicit
    batch of streams. Steps in ``first_violation`` are 1-based.
    """
    if not D > 0:
        raise ValueError(f"score bound D must be positive, got {D}")
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    if scores is not None:
        source = np.asarray(scores, dtype=float)
        n_streams, T = source.shape
        adversary = "custom"
    else:
        source = _adversary(adversary, D, n_streams, T, seed)
    level = QuantileLevel.from_alpha(alpha)
    report = ProbeReport(D=D, alpha=alpha, T=T, n_streams=n_streams, adversary=adversary,
                         violations={c: 0 for c in CHECKS},
                         first_violation={c: None for c in CHECKS})

    def flag(check, mask, step):
        k = int(np.count_nonzero(mask))
        if k:
            report.violations[check] += k
            if report.first_violation[check] is None:
                report.first_violation[check] = (int(np.flatnonzero(mask)[0]), step)

    state = reset("kt", shape=(n_streams,))
    step_cap, radius_cap = 2 * D + 1, 3 * D + 1
    s_prev = None  # s_{t-1}
    sum_gs = np.zeros(n_streams)
    sum_abs_gs = np.zeros(n_streams)
    misses = np.zeros(n_streams)
    ext = {k: np.full(T, np.nan) for k in ("max_radius", "min_radius", "max_abs_step", "min_wealth")}
    for t in range(1, T + 1):
        s = state.radius  # s_t
        if np.max(np.abs(s)) > OVERFLOW_GUARD:
            break
        S = source(s, t) if callable(source) else source[:, t - 1]
        g = pinball_subgradient(s, S, level)
        misses += S > s
        state = kt_step(state, g)
        s_next = state.radius
        sum_gs += g * s
        sum_abs_gs += np.abs(g * s)
        err = np.abs(state.wealth - (1.0 - sum_gs))
        report.max_identity_error = max(report.max_identity_error, float(err.max()))
        flag("wealth_identity", err > IDENTITY_RTOL * (1.0 + sum_abs_gs), t)
        if report.bounded:
            flag("wealth_nonnegative", state.wealth < 0, t)
            flag("step_bound", np.abs(s_next - s) > step_cap, t)
            flag("radius_bound", np.abs(s_next) > radius_cap, t + 1)
            flag("overshoot_decay", (s > D) & ~(s_next < s), t + 1)
            if s_prev is not None:
                flag("sign_recovery", (s_prev >= 0) & (s < 0) & ~(s_next > 0), t + 1)
        ext["max_radius"][t - 1] = s.max()
        ext["min_radius"][t - 1] = s.min()
        ext["max_abs_step"][t - 1] = np.abs(s_next - s).max()
        ext["min_wealth"][t - 1] = state.wealth.min()
        s_prev = s
        report.steps = t
    n = report.steps
    report.extrema = {k: v[:n] for k, v in ext.items()}
    if n:
        report.max_step = float(ext["max_abs_step"][:n].max())
        report.max_abs_radius = float(max(ext["max_radius"][:n].max(), -ext["min_radius"][:n].min(),
                                          np.abs(state.radius).max()))
        report.min_wealth = float(ext["min_wealth"][:n].min())
    report.miscoverage = float(misses.mean() / max(n, 1))
    return report
