"""Synthetic benchmarks, summary metrics and the KT invariant probe."""

from .changepoint import (
    DEFAULT_SEGMENTS,
    ChangepointRun,
    ChangepointSpec,
    generate_batch,
    generate_changepoint,
    online_least_squares_scores,
    run_changepoint,
)
from .metrics import (
    MetricsReport,
    coverage_metrics,
    local_coverage_deviation,
    regret,
    rolling_mean,
    width_deviation,
    widths,
)
from .probe import ADVERSARIES, CHECKS, ProbeReport, random_bounded_scores, theorem_probe
