"""Quantile LCB filter for i.i.d. streams.

The filter keeps every statistic it has seen (passed or not), forms the
empirical quantile function over that history, and passes a round exactly
when its statistic is at most a Bernstein lower confidence bound on the
level-p population quantile. Early rounds, where the confidence width
swallows the level, are ignored by construction.

Two statistic modes: the gradient dual norm, or the feature-vector norm for
losses of the form h_t(<w, x_t>) with Lipschitz scalar h_t.
"""

from __future__ import annotations

import math
from bisect import insort
from typing import List

import numpy as np

from .core import FILTERED, PASSED, ConfigError, RoundRecord, run_filtered

GRADIENT_NORM = "gradient-norm"
FEATURE_NORM = "feature-norm"
STAT_MODES = (GRADIENT_NORM, FEATURE_NORM)


def bernstein_width(p: float, delta: float, t: int) -> float:
    """sqrt(2 p (1-p) ln(1/delta) / t) + ln(1/delta) / (3 t).

    The amount by which the empirical quantile level is lowered so that the
    resulting value is, with probability 1 - delta, below the population
    level-p quantile after t observations.
    """
    if t < 1:
        raise ConfigError(f"width needs t >= 1 observations, got {t}")
    if not 0.0 < p < 1.0:
        raise ConfigError(f"quantile level must be in (0,1), got {p}")
    if not 0.0 < delta <= 1.0:
        raise ConfigError(f"confidence must be in (0,1], got {delta}")
    log_term = math.log(1.0 / delta)
    return math.sqrt(2.0 * p * (1.0 - p) * log_term / t) + log_term / (3.0 * t)


class RunningQuantiles:
    """Sorted buffer of every observed statistic with rank queries.

    Insertion keeps the buffer ordered; `quantile(q)` returns the
    ceil(q n)-th smallest stored value (the lower empirical quantile), with
    the convention that levels <= 0 and empty buffers give 0.
    """

    def __init__(self):
        self._sorted: List[float] = []

    def insert(self, value: float) -> None:
        insort(self._sorted, value)

    def __len__(self) -> int:
        return len(self._sorted)

    def quantile(self, q: float) -> float:
        if q > 1.0:
            raise ConfigError(f"quantile level must be <= 1, got {q}")
        n = len(self._sorted)
        if n == 0 or q <= 0.0:
            return 0.0
        m = math.ceil(q * n)
        return self._sorted[m - 1]

    def values(self) -> List[float]:
        return list(self._sorted)


class QuantileLCBState:
    """History of filter statistics plus the Bernstein-lowered quantile."""

    def __init__(self, p: float, delta: float):
        if not 0.0 < p < 1.0:
            raise ConfigError(f"quantile level must be in (0,1), got {p}")
        if not 0.0 < delta <= 1.0:
            raise ConfigError(f"confidence must be in (0,1], got {delta}")
        self.p = float(p)
        self.delta = float(delta)
        self.history = RunningQuantiles()

    @property
    def t_seen(self) -> int:
        return len(self.history)

    def lcb(self) -> float:
        """Lower confidence bound on the level-p statistic quantile; 0 while
        the history is empty or the width swallows the level."""
        n = self.t_seen
        if n == 0:
            return 0.0
        return self.history.quantile(self.p - bernstein_width(self.p, self.delta, n))

    def record(self, stat: float) -> None:
        self.history.insert(stat)


class QuantileFilter:
    """Filter policy: pass iff the statistic is at most the LCB computed from
    all previous rounds, then record the statistic regardless of decision.

    In feature mode the guarantee transfers from feature norms to losses
    through the scalar loss's Lipschitz constant; `lipschitz_bound` records
    it (logistic and hinge have constant 1) but plays no algorithmic role.
    """

    kind = "quantile"

    def __init__(self, p: float, horizon: int, mode: str = GRADIENT_NORM, delta=None,
                 lipschitz_bound: float = 1.0):
        if mode not in STAT_MODES:
            raise ConfigError(f"unknown statistic mode {mode!r}")
        if delta is None:
            if horizon < 2:
                raise ConfigError(f"horizon must be >= 2, got {horizon}")
            delta = float(horizon) ** -2
        self.state = QuantileLCBState(p, delta)
        self.mode = mode
        self.lipschitz_bound = float(lipschitz_bound)

    @property
    def p(self) -> float:
        return self.state.p

    def statistic(self, event, grad_dual_norm: float) -> float:
        if self.mode == FEATURE_NORM:
            return float(np.linalg.norm(event.x))
        return grad_dual_norm

    def step(self, stat: float):
        threshold = self.state.lcb()
        decision = PASSED if stat <= threshold else FILTERED
        self.state.record(stat)
        return decision, threshold


def run_quantile_filter(
    events, learner, p: float, horizon: int, mode: str = GRADIENT_NORM, delta=None
) -> List[RoundRecord]:
    """Filtered run with confidence delta = horizon^-2 unless overridden."""
    return run_filtered(events, learner, QuantileFilter(p, horizon, mode=mode, delta=delta))


def quantile_regret_bound(base_bound, diameter: float, stat_quantile: float,
                          p: float, horizon: int) -> float:
    """Expected robust regret bound for the quantile-filtered learner.

    base_bound(G, n) is the base learner's regret guarantee for n rounds with
    statistics at most G (must be concave in n). The overhead term charges
    the discarded inliers and the rare confidence failures:

        base_bound(q, p T) + D q (4 sqrt(2 p (1-p) T ln T) + 13/3 (ln T)^2 + 3)
    """
    if horizon < 2:
        raise ConfigError(f"horizon must be >= 2, got {horizon}")
    log_t = math.log(horizon)
    overhead = (
        4.0 * math.sqrt(2.0 * p * (1.0 - p) * horizon * log_t)
        + (13.0 / 3.0) * log_t * log_t
        + 3.0
    )
    return float(base_bound(stat_quantile, p * horizon)) + diameter * stat_quantile * overhead
