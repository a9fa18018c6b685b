"""Base online learners: gradient descent with norm-adaptive steps, and the
1/(sigma t) step schedule for strongly convex losses.

Both learners count only the updates they were actually given; rounds the
filter drops leave every accumulator untouched, so a skipped round behaves
as if it never happened.
"""

from __future__ import annotations

import math
import pickle

import numpy as np

from .core import ConfigError, Domain


def adaptive_ogd_regret_bound(diameter: float, sum_sq_passed: float) -> float:
    """Certified bound 2 D sqrt(sum of squared passed gradient norms).

    Valid for the adaptive-step learner against every comparator in the
    domain simultaneously; evaluators use it as the per-run base-learner
    term in bound checks.
    """
    if diameter < 0 or sum_sq_passed < 0:
        raise ConfigError("diameter and sum of squares must be nonnegative")
    return 2.0 * diameter * math.sqrt(sum_sq_passed)


class AdaptiveOGD:
    """Projected online gradient descent, step D / sqrt(2 sum ||g||^2).

    Needs no prior bound on gradient norms; the step shrinks with the
    accumulated squared norms of the gradients it has been fed.
    """

    kind = "adaptive-ogd"

    def __init__(self, domain: Domain, start=None):
        self.domain = domain
        if start is None:
            self.w = domain.center()
        else:
            self.w = domain.project(np.asarray(start, dtype=float))
        self.sum_sq = 0.0

    def predict(self) -> np.ndarray:
        return self.w.copy()

    def update(self, event) -> None:
        grad = np.asarray(event.subgradient(self.w), dtype=float)
        self.sum_sq += float(np.dot(grad, grad))
        if self.sum_sq <= 0.0:
            # only zero gradients so far; the step is undefined and irrelevant
            return
        eta = self.domain.diameter() / math.sqrt(2.0 * self.sum_sq)
        self.w = self.domain.project(self.w - eta * grad)

    def regret_bound(self, grad_bound: float, n_passed: float) -> float:
        """A-priori form 2 D G sqrt(n); nondecreasing in both arguments and
        concave in n."""
        return 2.0 * self.domain.diameter() * grad_bound * math.sqrt(max(n_passed, 0.0))

    def state_bytes(self) -> bytes:
        return pickle.dumps((self.w.tobytes(), self.sum_sq))

    def clone(self) -> "AdaptiveOGD":
        other = AdaptiveOGD(self.domain, start=self.w)
        other.sum_sq = self.sum_sq
        return other


class StronglyConvexOGD:
    """Projected online gradient descent with step 1/(sigma n) at the n-th
    applied update.

    The counter advances only on updates the learner receives, never on
    filtered rounds.
    """

    kind = "sc-ogd"

    def __init__(self, domain: Domain, sigma: float, start=None):
        if not sigma > 0:
            raise ConfigError(f"sigma must be positive, got {sigma}")
        self.domain = domain
        self.sigma = float(sigma)
        if start is None:
            self.w = domain.center()
        else:
            self.w = domain.project(np.asarray(start, dtype=float))
        self.passed_count = 0

    def predict(self) -> np.ndarray:
        return self.w.copy()

    def update(self, event) -> None:
        grad = np.asarray(event.subgradient(self.w), dtype=float)
        self.passed_count += 1
        eta = 1.0 / (self.sigma * self.passed_count)
        self.w = self.domain.project(self.w - eta * grad)

    def regret_bound(self, grad_bound: float, n_passed: float) -> float:
        """(G^2 / 2 sigma)(ln n + 1); the distance term of the full guarantee
        is handled separately by the evaluator's summation-form check."""
        n = max(float(n_passed), 1.0)
        return grad_bound * grad_bound / (2.0 * self.sigma) * (math.log(n) + 1.0)

    def state_bytes(self) -> bytes:
        return pickle.dumps((self.w.tobytes(), self.passed_count, self.sigma))

    def clone(self) -> "StronglyConvexOGD":
        other = StronglyConvexOGD(self.domain, self.sigma, start=self.w)
        other.passed_count = self.passed_count
        return other
