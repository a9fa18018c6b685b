"""Domains, losses, and per-round bookkeeping shared by all filters and environments.

Everything here is plain float64 numpy. The norm is Euclidean throughout
(self-dual); `L2Norm` is the extension point if another self-dual pair is
ever needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List

import numpy as np

PASSED = "passed"
FILTERED = "filtered"


class ConfigError(ValueError):
    """Raised for invalid domain, loss, filter, or experiment parameters."""


def _as_vector(x) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ConfigError(f"expected a vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class L2Norm:
    """Euclidean norm; its dual is itself."""

    kind: str = "l2"

    def norm(self, v) -> float:
        return float(np.linalg.norm(v))

    def dual(self, g) -> float:
        return float(np.linalg.norm(g))


L2 = L2Norm()


class Domain:
    """Non-empty compact convex feasible set with exact Euclidean projection."""

    dimension: int

    def project(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def center(self) -> np.ndarray:
        raise NotImplementedError

    def contains(self, w, tol: float = 0.0) -> bool:
        w = _as_vector(w)
        return bool(np.linalg.norm(w - self.project(w)) <= tol)

    def _check_dim(self, w) -> np.ndarray:
        w = _as_vector(w)
        if w.size != self.dimension:
            raise ConfigError(
                f"dimension mismatch: point has {w.size}, domain has {self.dimension}"
            )
        return w


class Ball(Domain):
    """Euclidean ball {w : ||w - center|| <= radius}."""

    def __init__(self, center, radius: float):
        self._center = _as_vector(center)
        if not radius > 0:
            raise ConfigError(f"ball radius must be positive, got {radius}")
        self.radius = float(radius)
        self.dimension = self._center.size

    def project(self, w):
        w = self._check_dim(w)
        d = w - self._center
        n = float(np.linalg.norm(d))
        if n <= self.radius:
            return w
        scale = self.radius / n
        out = self._center + d * scale
        # rounding can leave the result an ulp outside; nudge the scale down
        # until containment holds exactly, which makes project idempotent
        while float(np.linalg.norm(out - self._center)) > self.radius:
            scale = math.nextafter(scale, 0.0)
            out = self._center + d * scale
        return out

    def diameter(self):
        return 2.0 * self.radius

    def center(self):
        return self._center.copy()

    def __repr__(self):
        return f"Ball(center={self._center.tolist()}, radius={self.radius})"


class Box(Domain):
    """Axis-aligned box {w : lower <= w <= upper}, coordinate-wise."""

    def __init__(self, lower, upper):
        self.lower = _as_vector(lower)
        self.upper = _as_vector(upper)
        if self.lower.size != self.upper.size:
            raise ConfigError("box bounds must have equal length")
        if not np.all(self.lower < self.upper):
            raise ConfigError("box requires lower[i] < upper[i] for every coordinate")
        self.dimension = self.lower.size

    def project(self, w):
        w = self._check_dim(w)
        return np.clip(w, self.lower, self.upper)

    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def center(self):
        return 0.5 * (self.lower + self.upper)

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


def interval(lo: float, hi: float) -> Box:
    """One-dimensional box [lo, hi]."""
    return Box([lo], [hi])


# ---------------------------------------------------------------------------
# Loss events


class LinearLoss:
    """f(w) = <g, w>; the subgradient is the constant vector g."""

    kind = "linear"

    def __init__(self, g):
        self.g = _as_vector(g)

    def value(self, w) -> float:
        return float(np.dot(self.g, w))

    def subgradient(self, w) -> np.ndarray:
        return self.g

    def __repr__(self):
        return f"LinearLoss(g={self.g.tolist()})"


class SquaredLoss:
    """f(w) = (sigma/2) ||w - target||^2, which is sigma-strongly convex."""

    kind = "squared"

    def __init__(self, target, sigma: float):
        self.target = _as_vector(target)
        if not sigma > 0:
            raise ConfigError(f"squared loss needs sigma > 0, got {sigma}")
        self.sigma = float(sigma)

    def value(self, w) -> float:
        d = np.asarray(w, dtype=float) - self.target
        return 0.5 * self.sigma * float(np.dot(d, d))

    def subgradient(self, w) -> np.ndarray:
        return self.sigma * (np.asarray(w, dtype=float) - self.target)

    def __repr__(self):
        return f"SquaredLoss(target={self.target.tolist()}, sigma={self.sigma})"


class LogisticLoss:
    """f(w) = ln(1 + exp(-y <w, x>)) with label y in {-1, +1}."""

    kind = "logistic"

    def __init__(self, x, y: int):
        self.x = _as_vector(x)
        if y not in (-1, 1):
            raise ConfigError(f"label must be -1 or +1, got {y}")
        self.y = int(y)

    def _margin(self, w) -> float:
        return self.y * float(np.dot(self.x, w))

    def value(self, w) -> float:
        return float(np.logaddexp(0.0, -self._margin(w)))

    def subgradient(self, w) -> np.ndarray:
        z = self._margin(w)
        # s = 1 / (1 + e^z), written via tanh to stay finite for large |z|
        s = 0.5 * (1.0 - math.tanh(0.5 * z))
        return (-self.y * s) * self.x


class HingeLoss:
    """f(w) = max(0, 1 - y <w, x>); subgradient 0 at the kink."""

    kind = "hinge"

    def __init__(self, x, y: int):
        self.x = _as_vector(x)
        if y not in (-1, 1):
            raise ConfigError(f"label must be -1 or +1, got {y}")
        self.y = int(y)

    def value(self, w) -> float:
        return max(0.0, 1.0 - self.y * float(np.dot(self.x, w)))

    def subgradient(self, w) -> np.ndarray:
        if self.y * float(np.dot(self.x, w)) < 1.0:
            return -self.y * self.x
        return np.zeros_like(self.x)


# ---------------------------------------------------------------------------
# Per-round log and the filtered run loop


@dataclass
class RoundRecord:
    """One row of a run trace.

    `stat_value` is the statistic the filter examined (gradient dual norm,
    or feature norm in feature mode); `filter_stat` is the threshold it was
    compared against (current list minimum, or the quantile LCB).
    """

    t: int
    w: np.ndarray
    grad: np.ndarray
    grad_dual_norm: float
    loss_value: float
    decision: str
    filter_stat: float
    stat_value: float
    event: object = field(repr=False, default=None)


class PassAllFilter:
    """No-op filter for unfiltered baselines; every round is passed."""

    def statistic(self, event, grad_dual_norm: float) -> float:
        return grad_dual_norm

    def step(self, stat: float):
        return PASSED, math.inf


def run_filtered(events: Iterable, learner, filter_policy) -> List[RoundRecord]:
    """Run the online protocol: predict, observe loss, filter, maybe update.

    The learner is updated exactly on passed rounds; on a filtered round no
    learner method other than predict() is invoked, so its state (including
    internal accumulators) is untouched.
    """
    trace: List[RoundRecord] = []
    for t, event in enumerate(events, start=1):
        w = learner.predict()
        grad = np.asarray(event.subgradient(w), dtype=float)
        gnorm = float(np.linalg.norm(grad))
        stat = filter_policy.statistic(event, gnorm)
        decision, threshold = filter_policy.step(stat)
        if decision == PASSED:
            learner.update(event)
        trace.append(
            RoundRecord(
                t=t,
                w=w,
                grad=grad,
                grad_dual_norm=gnorm,
                loss_value=float(event.value(w)),
                decision=decision,
                filter_stat=threshold,
                stat_value=stat,
                event=event,
            )
        )
    return trace
