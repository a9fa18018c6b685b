"""Top-k gradient-norm filter for adversarial outliers.

Keeps the k+1 largest gradient dual norms seen so far (a bounded min-heap,
initialized to zeros) and filters any round whose norm exceeds twice the
post-insertion minimum of that list. With at most k outliers, the minimum is
a lower bound on the largest inlier norm, and the factor-2 slack forces the
total filtered mass to telescope geometrically.
"""

from __future__ import annotations

import heapq
import math
from bisect import insort
from typing import List, Sequence

from .core import FILTERED, PASSED, ConfigError, RoundRecord, run_filtered


class TopNormList:
    """Bounded multiset of the k+1 largest statistics observed.

    Starts as k+1 zeros. Observing a value larger than the current minimum
    evicts the minimum; both comparisons are strict, so ties neither insert
    nor filter.
    """

    def __init__(self, k: int):
        if k < 0 or k != int(k):
            raise ConfigError(f"outlier budget k must be a nonnegative integer, got {k}")
        self.k = int(k)
        self._heap = [0.0] * (self.k + 1)

    @property
    def minimum(self) -> float:
        return self._heap[0]

    def observe(self, norm: float) -> str:
        """Insert if the norm beats the minimum, then classify the round."""
        if norm < 0:
            raise ConfigError(f"norms are nonnegative, got {norm}")
        if norm > self._heap[0]:
            heapq.heapreplace(self._heap, norm)
        return FILTERED if norm > 2.0 * self._heap[0] else PASSED

    def values(self) -> List[float]:
        return sorted(self._heap)

    def __len__(self) -> int:
        return len(self._heap)


class TopKFilter:
    """Filter policy driving `run_filtered` from a TopNormList."""

    kind = "topk"

    def __init__(self, k: int):
        self.norms = TopNormList(k)

    @property
    def k(self) -> int:
        return self.norms.k

    def statistic(self, event, grad_dual_norm: float) -> float:
        return grad_dual_norm

    def step(self, stat: float):
        decision = self.norms.observe(stat)
        return decision, self.norms.minimum


def run_topk(events, learner, k: int) -> List[RoundRecord]:
    """Full filtered run; the learner is updated exactly on passed rounds."""
    return run_filtered(events, learner, TopKFilter(k))


def verify_pass_bound(trace: Sequence[RoundRecord], k: int) -> bool:
    """Every passed round's norm is at most twice the (k+1)-th largest norm
    seen up to and including that round (zero-padded).

    This is the strongest instantiation of the passed-gradient bound over all
    admissible inlier sets, recomputed from scratch.
    """
    seen: List[float] = []
    for rec in trace:
        insort(seen, rec.stat_value)
        threshold = seen[-(k + 1)] if len(seen) >= k + 1 else 0.0
        if rec.decision == PASSED and rec.stat_value > 2.0 * threshold:
            return False
    return True


def verify_filtered_mass(trace: Sequence[RoundRecord], k: int, grad_bound: float) -> bool:
    """Sum of filtered norms at most `grad_bound` is <= 2 (k+1) grad_bound."""
    if not grad_bound > 0:
        raise ConfigError(f"grad_bound must be positive, got {grad_bound}")
    total = math.fsum(
        rec.stat_value
        for rec in trace
        if rec.decision == FILTERED and rec.stat_value <= grad_bound
    )
    limit = 2.0 * (k + 1) * grad_bound
    return total <= limit * (1.0 + 1e-12)


def verify_filtered_mass_all_levels(trace: Sequence[RoundRecord], k: int) -> bool:
    """`verify_filtered_mass` for every distinct filtered norm as the level."""
    levels = sorted({rec.stat_value for rec in trace if rec.decision == FILTERED})
    return all(verify_filtered_mass(trace, k, g) for g in levels if g > 0)
