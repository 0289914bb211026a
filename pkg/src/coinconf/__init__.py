"""Parameter-free online conformal prediction.

Prediction-interval radii are learned online from the pinball loss with
coin-betting rules (Krichevsky-Trofimov, online Newton step) that need no
learning rate, alongside OGD and scale-free OGD baselines.
"""

from .engine import (
    ConformalStream,
    MultiHorizonConformal,
    PredictionInterval,
    StepTrace,
    StreamConfig,
    StreamError,
    StreamFaultedError,
    Trace,
    run_multi_horizon,
    run_scores,
    run_stream,
)
from .quantile_loss import QuantileLevel, pinball_loss, pinball_subgradient
from .updaters import STRATEGIES, reset, update

__version__ = "0.1.0"
