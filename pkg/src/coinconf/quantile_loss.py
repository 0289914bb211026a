"""Pinball (quantile) loss and its subgradient.

Every radius updater in the package consumes the subgradient computed here.
Both functions broadcast over numpy arrays so that batches of independent
streams can share one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QuantileLevel:
    """Quantile level ``beta`` of the pinball loss.

    ``complement`` holds ``1 - beta``. It is stored rather than recomputed so
    that a level built with :meth:`from_alpha` returns the miscoverage level
    ``alpha`` bit-for-bit on the covered branch (``1 - (1 - 0.1) != 0.1`` in
    floating point).
    """

    beta: float
    complement: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {self.beta}")
        if self.complement is None:
            object.__setattr__(self, "complement", 1.0 - self.beta)

    @classmethod
    def from_alpha(cls, alpha: float) -> "QuantileLevel":
        """Level ``1 - alpha`` used for conformal radii at miscoverage ``alpha``."""
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        return cls(beta=1.0 - alpha, complement=alpha)

    @property
    def lipschitz(self) -> float:
        return max(self.beta, self.complement)


def pinball_loss(s, score, level: QuantileLevel):
    """Pinball loss ``max{beta (score - s), (1 - beta)(s - score)}``.

    Nonnegative, and zero exactly when ``s == score``.
    """
    diff = np.subtract(score, s)
    out = np.maximum(level.beta * diff, -level.complement * diff)
    return float(out) if np.ndim(out) == 0 else out


def pinball_subgradient(s, score, level: QuantileLevel):
    """Subgradient ``1{score <= s} - beta`` of the pinball loss in ``s``.

    At the kink ``s == score`` the element ``1 - beta`` is returned, so a
    score lying on the boundary of the closed interval counts as covered.
    The comparison is exact; no tolerance is applied.
    """
    if np.ndim(s) == 0 and np.ndim(score) == 0:
        return level.complement if score <= s else -level.beta
    return np.where(np.less_equal(score, s), level.complement, -level.beta)
