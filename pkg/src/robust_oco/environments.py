"""Stream generators: adversarial lower-bound constructions, contaminated
i.i.d. mixtures, heavy-tailed feature streams, and spike-injected stress
streams.

All randomness comes from numpy's counter-based Philox generator keyed by the
run seed, so a (environment, seed) pair reproduces its stream bit-for-bit on
any platform; `RNG_KIND` names the generator for run metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from .core import (
    ConfigError,
    LinearLoss,
    LogisticLoss,
    SquaredLoss,
    interval,
)

RNG_KIND = "numpy.random.Philox (4x64-10)"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _rademacher(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n) * 2 - 1


class StreamEnd(Exception):
    """Requested a round past the realized horizon."""


@dataclass
class EnvRun:
    """A realized stream plus whatever side information the construction
    defines: the adversarial comparator and inlier set, or the hidden
    contamination mask."""

    events: List
    values: Optional[np.ndarray] = None          # raw 1-d stream (gradients or targets)
    features: Optional[np.ndarray] = None        # feature streams only
    labels: Optional[np.ndarray] = None
    adversarial_u: Optional[np.ndarray] = None
    adversarial_rounds: Optional[np.ndarray] = None   # 1-based, sorted
    inlier_mask: Optional[np.ndarray] = None          # contamination: True on inlier rounds

    @property
    def horizon(self) -> int:
        return len(self.events)

    def event_at(self, t: int):
        if not 1 <= t <= len(self.events):
            raise StreamEnd(f"round {t} outside horizon {len(self.events)}")
        return self.events[t - 1]


def next_event(run: EnvRun, t: int):
    return run.event_at(t)


def adversarial_choice(run: EnvRun) -> Tuple[np.ndarray, np.ndarray]:
    """The construction's (comparator, inlier rounds); only lower-bound
    environments define one."""
    if run.adversarial_u is None or run.adversarial_rounds is None:
        raise ConfigError("this environment defines no adversarial (u, S) choice")
    return run.adversarial_u, run.adversarial_rounds


class RademacherLinearEnv:
    """i.i.d. linear losses f_t(w) = G xi_t w on [-W, W] with fair sign flips.

    After the run, the adversary draws an independent sign zeta and declares
    u = -W zeta with inliers S = {t <= k : xi_t = zeta} plus every round past
    k. Any learner's expected robust regret at that choice is G W k / 2.
    """

    kind = "rademacher-linear"
    has_adversarial_choice = True

    def __init__(self, G: float, W: float, T: int, k: int):
        if not (G > 0 and W > 0):
            raise ConfigError("G and W must be positive")
        if not (0 <= k <= T):
            raise ConfigError(f"need 0 <= k <= T, got k={k}, T={T}")
        self.G, self.W, self.T, self.k = float(G), float(W), int(T), int(k)
        self.domain = interval(-self.W, self.W)

    def _draw(self, seed: int):
        rng = make_rng(seed)
        xi = _rademacher(rng, self.T)
        zeta = int(_rademacher(rng, 1)[0])
        return xi, zeta

    def sample_values(self, seed: int) -> np.ndarray:
        xi, _ = self._draw(seed)
        return self.G * xi.astype(float)

    def realize(self, seed: int, with_events: bool = True) -> EnvRun:
        xi, zeta = self._draw(seed)
        values = self.G * xi.astype(float)
        events = [LinearLoss([v]) for v in values] if with_events else []
        early = np.nonzero(xi[: self.k] == zeta)[0] + 1
        rounds = np.concatenate([early, np.arange(self.k + 1, self.T + 1)]).astype(np.int64)
        return EnvRun(
            events=events,
            values=values,
            adversarial_u=np.array([-self.W * zeta]),
            adversarial_rounds=rounds,
        )


class StronglyConvexAdversaryEnv:
    """Squared losses (sigma/2)(w - target_t)^2 on [-W, W]: the target is
    W xi_t on the first k rounds and W zeta afterwards, with u = W zeta and
    the same inlier set as the linear construction."""

    kind = "strongly-convex-adv"
    has_adversarial_choice = True

    def __init__(self, sigma: float, W: float, T: int, k: int):
        if not (sigma > 0 and W > 0):
            raise ConfigError("sigma and W must be positive")
        if not (0 <= k <= T):
            raise ConfigError(f"need 0 <= k <= T, got k={k}, T={T}")
        self.sigma, self.W, self.T, self.k = float(sigma), float(W), int(T), int(k)
        self.domain = interval(-self.W, self.W)

    def _draw(self, seed: int):
        rng = make_rng(seed)
        xi = _rademacher(rng, self.k)
        zeta = int(_rademacher(rng, 1)[0])
        return xi, zeta

    def sample_values(self, seed: int) -> np.ndarray:
        xi, zeta = self._draw(seed)
        targets = np.full(self.T, self.W * zeta)
        targets[: self.k] = self.W * xi.astype(float)
        return targets

    def realize(self, seed: int, with_events: bool = True) -> EnvRun:
        xi, zeta = self._draw(seed)
        targets = np.full(self.T, self.W * zeta)
        targets[: self.k] = self.W * xi.astype(float)
        events = [SquaredLoss([tgt], self.sigma) for tgt in targets] if with_events else []
        early = np.nonzero(xi == zeta)[0] + 1
        rounds = np.concatenate([early, np.arange(self.k + 1, self.T + 1)]).astype(np.int64)
        return EnvRun(
            events=events,
            values=targets,
            adversarial_u=np.array([self.W * zeta]),
            adversarial_rounds=rounds,
        )


# ---------------------------------------------------------------------------
# Contaminated mixtures


class UniformLinearInliers:
    """Inlier component: linear losses with gradients Uniform(low, high),
    so the gradient norm is bounded by max(|low|, |high|) almost surely."""

    kind = "uniform-linear"

    def __init__(self, low: float = -1.0, high: float = 1.0):
        if not low < high:
            raise ConfigError("need low < high")
        self.low, self.high = float(low), float(high)

    @property
    def grad_bound(self) -> float:
        return max(abs(self.low), abs(self.high))

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=n)

    def norm_quantile(self, p: float) -> float:
        """Level-p quantile of |gradient|, by bisection on the exact CDF."""
        if not 0 < p < 1:
            raise ConfigError("quantile level must be in (0,1)")
        span = self.high - self.low

        def cdf(x):
            return (min(x, self.high) - max(-x, self.low)) / span if x > 0 else 0.0

        lo, hi = 0.0, max(abs(self.low), abs(self.high))
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if cdf(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


class PointMassOutliers:
    """Outlier component: a fixed, typically enormous, gradient magnitude
    with a random sign (or always positive)."""

    kind = "point-mass"

    def __init__(self, magnitude: float = 1e8, signed: bool = True):
        if not magnitude > 0:
            raise ConfigError("magnitude must be positive")
        self.magnitude = float(magnitude)
        self.signed = bool(signed)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        signs = _rademacher(rng, n).astype(float) if self.signed else np.ones(n)
        return self.magnitude * signs


class ParetoOutliers:
    """Outlier component with unbounded support: magnitudes with tail
    P(|g| > x) = (x / scale)^-exponent for x >= scale, random sign."""

    kind = "pareto"

    def __init__(self, exponent: float = 1.5, scale: float = 1e6, signed: bool = True):
        if not (exponent > 0 and scale > 0):
            raise ConfigError("exponent and scale must be positive")
        self.exponent, self.scale = float(exponent), float(scale)
        self.signed = bool(signed)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        mags = self.scale * (1.0 - u) ** (-1.0 / self.exponent)
        signs = _rademacher(rng, n).astype(float) if self.signed else np.ones(n)
        return mags * signs


class HuberMixtureEnv:
    """Each round flips a hidden epsilon-coin: tails draws the loss from the
    bounded inlier component, heads from the arbitrary outlier component.
    The coin is recorded in the trace for the evaluator but never shown to
    the learner."""

    kind = "huber-mixture"
    has_adversarial_choice = False

    def __init__(self, epsilon: float, inlier: UniformLinearInliers,
                 outlier=None, T: int = 1000, halfwidth: float = 1.0):
        if not 0.0 <= epsilon < 1.0:
            raise ConfigError(f"contamination rate must be in [0,1), got {epsilon}")
        if epsilon > 0 and outlier is None:
            raise ConfigError("a positive contamination rate needs an outlier component")
        if not halfwidth > 0:
            raise ConfigError("halfwidth must be positive")
        self.epsilon = float(epsilon)
        self.inlier = inlier
        self.outlier = outlier
        self.T = int(T)
        self.halfwidth = float(halfwidth)
        self.domain = interval(-self.halfwidth, self.halfwidth)

    def _draw(self, seed: int):
        rng = make_rng(seed)
        coins = rng.random(self.T) < self.epsilon
        inlier_vals = self.inlier.sample(rng, self.T)
        if self.outlier is None:
            values = inlier_vals
        else:
            outlier_vals = self.outlier.sample(rng, self.T)
            values = np.where(coins, outlier_vals, inlier_vals)
        return values, coins

    def sample_values(self, seed: int) -> np.ndarray:
        return self._draw(seed)[0]

    def realize(self, seed: int) -> EnvRun:
        values, coins = self._draw(seed)
        events = [LinearLoss([v]) for v in values]
        return EnvRun(events=events, values=values, inlier_mask=~coins)

    def sample_inlier_events(self, rng: np.random.Generator, n: int) -> List[LinearLoss]:
        return [LinearLoss([v]) for v in self.inlier.sample(rng, n)]

    def stat_quantile(self, p: float) -> Optional[float]:
        """Analytic level-p quantile of the gradient norm; only available for
        the uncontaminated case."""
        if self.epsilon == 0.0:
            return self.inlier.norm_quantile(p)
        return None


def huber_outlier_budget(epsilon: float, T: int, delta: float) -> int:
    """Filter budget k covering the contamination count with probability at
    least 1 - delta/2:

        ceil(eps T + sqrt(2 T eps (1-eps) ln(2/delta)) + (1-eps) ln(2/delta) / 3)
    """
    if not 0.0 <= epsilon <= 0.5:
        raise ConfigError(f"rate must be in [0, 1/2], got {epsilon}")
    if not 0.0 < delta <= 1.0:
        raise ConfigError(f"confidence must be in (0,1], got {delta}")
    if T < 1:
        raise ConfigError(f"horizon must be positive, got {T}")
    log_term = math.log(2.0 / delta)
    return math.ceil(
        epsilon * T
        + math.sqrt(2.0 * T * epsilon * (1.0 - epsilon) * log_term)
        + (1.0 - epsilon) * log_term / 3.0
    )


# ---------------------------------------------------------------------------
# Heavy-tailed features


class HeavyTailLogisticEnv:
    """Scalar logistic losses with Pareto-tailed features on [-1, 1].

    |X| has tail P(|X| > x) = x^-(1+gamma) on [1, inf) with a fair random
    sign, so E|X| = (1+gamma)/gamma is finite while E[X^2] diverges for
    gamma < 1. Labels are sign(X) flipped with probability `flip_prob`
    (default) or an independent fair coin (`labels="independent"`).
    """

    kind = "heavytail-logistic"
    has_adversarial_choice = False

    def __init__(self, gamma: float, T: int, flip_prob: float = 0.1,
                 labels: str = "sign-flip", halfwidth: float = 1.0):
        if not 0.0 < gamma < 1.0:
            raise ConfigError(f"tail exponent parameter must be in (0,1), got {gamma}")
        if labels not in ("sign-flip", "independent"):
            raise ConfigError(f"unknown label rule {labels!r}")
        if not 0.0 <= flip_prob <= 0.5:
            raise ConfigError(f"flip probability must be in [0, 1/2], got {flip_prob}")
        self.gamma = float(gamma)
        self.T = int(T)
        self.flip_prob = float(flip_prob)
        self.labels = labels
        self.halfwidth = float(halfwidth)
        self.domain = interval(-self.halfwidth, self.halfwidth)

    def _magnitudes(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        return (1.0 - u) ** (-1.0 / (1.0 + self.gamma))

    def _draw(self, seed: int):
        rng = make_rng(seed)
        mags = self._magnitudes(rng, self.T)
        signs = _rademacher(rng, self.T)
        x = mags * signs
        if self.labels == "independent":
            y = _rademacher(rng, self.T)
        else:
            flips = rng.random(self.T) < self.flip_prob
            y = np.where(flips, -signs, signs)
        return x, y.astype(np.int64)

    def sample_values(self, seed: int):
        return self._draw(seed)

    def realize(self, seed: int) -> EnvRun:
        x, y = self._draw(seed)
        events = [LogisticLoss([xv], int(yv)) for xv, yv in zip(x, y)]
        return EnvRun(events=events, features=x, labels=y)

    def feature_quantile(self, p: float) -> float:
        """Analytic level-p quantile of |X|: (1-p)^(-1/(1+gamma))."""
        if not 0 < p < 1:
            raise ConfigError("quantile level must be in (0,1)")
        return (1.0 - p) ** (-1.0 / (1.0 + self.gamma))

    def mean_abs_feature(self) -> float:
        return (1.0 + self.gamma) / self.gamma

    def _flip_rate(self) -> float:
        return 0.5 if self.labels == "independent" else self.flip_prob

    def risk(self, w: float) -> float:
        """Population risk E[ln(1 + exp(-y w X))] by adaptive quadrature.

        Because the label depends on X only through its sign, the risk
        reduces to an integral over the magnitude A = |X| with density
        (1+gamma) a^-(2+gamma) on [1, inf).
        """
        q = self._flip_rate()
        g = self.gamma

        def integrand(a):
            dens = (1.0 + g) * a ** (-(2.0 + g))
            clean = np.logaddexp(0.0, -w * a)
            flipped = np.logaddexp(0.0, w * a)
            return dens * ((1.0 - q) * clean + q * flipped)

        val, _ = integrate.quad(integrand, 1.0, np.inf, limit=200)
        return float(val)

    def risk_minimizer(self) -> float:
        """argmin of the population risk over the domain."""
        lo, hi = float(self.domain.lower[0]), float(self.domain.upper[0])
        res = optimize.minimize_scalar(
            self.risk, bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-10},
        )
        return float(res.x)

    def sample_events(self, rng: np.random.Generator, n: int) -> List[LogisticLoss]:
        """Fresh draws from the full feature distribution for Monte Carlo
        risk estimates."""
        mags = self._magnitudes(rng, n)
        signs = _rademacher(rng, n)
        x = mags * signs
        if self.labels == "independent":
            y = _rademacher(rng, n)
        else:
            flips = rng.random(n) < self.flip_prob
            y = np.where(flips, -signs, signs)
        return [LogisticLoss([xv], int(yv)) for xv, yv in zip(x, y)]


# ---------------------------------------------------------------------------
# Spike-injected stress streams


class SpikedAdversarialEnv:
    """Positive-drift unit-scale linear gradients with enormous adversarial
    spikes injected at fixed rounds.

    Base gradients are Uniform(base_low, base_high) with base_low >= 0, so
    the comparator sits at -halfwidth; each spike is a negative gradient of
    the given magnitude, which shoves an unfiltered learner toward the wrong
    endpoint and collapses its adaptive step size.
    """

    kind = "spiked-adversarial"
    has_adversarial_choice = False

    def __init__(self, T: int, spike_rounds, spike_magnitudes,
                 base_low: float = 0.5, base_high: float = 1.5,
                 halfwidth: float = 1.0):
        if not 0.0 <= base_low < base_high:
            raise ConfigError("need 0 <= base_low < base_high")
        if not halfwidth > 0:
            raise ConfigError("halfwidth must be positive")
        rounds = np.asarray(list(spike_rounds), dtype=np.int64)
        mags = np.asarray(list(spike_magnitudes), dtype=float)
        if rounds.size != mags.size:
            raise ConfigError("one magnitude per spike round")
        if rounds.size != np.unique(rounds).size:
            raise ConfigError("spike rounds must be distinct")
        if rounds.size and not (rounds.min() >= 1 and rounds.max() <= T):
            raise ConfigError("spike rounds must lie in [1, T]")
        if mags.size and not np.all(mags > 0):
            raise ConfigError("spike magnitudes must be positive")
        self.T = int(T)
        self.spike_rounds = rounds
        self.spike_magnitudes = mags
        self.base_low, self.base_high = float(base_low), float(base_high)
        self.halfwidth = float(halfwidth)
        self.domain = interval(-self.halfwidth, self.halfwidth)

    def _draw(self, seed: int) -> np.ndarray:
        rng = make_rng(seed)
        values = rng.uniform(self.base_low, self.base_high, size=self.T)
        if self.spike_rounds.size:
            values[self.spike_rounds - 1] = -self.spike_magnitudes
        return values

    def sample_values(self, seed: int) -> np.ndarray:
        return self._draw(seed)

    def realize(self, seed: int) -> EnvRun:
        values = self._draw(seed)
        events = [LinearLoss([v]) for v in values]
        return EnvRun(events=events, values=values)

    def with_spike_scale(self, factor: float) -> "SpikedAdversarialEnv":
        """Same environment with every spike magnitude multiplied by factor."""
        return SpikedAdversarialEnv(
            T=self.T,
            spike_rounds=self.spike_rounds,
            spike_magnitudes=self.spike_magnitudes * factor,
            base_low=self.base_low,
            base_high=self.base_high,
            halfwidth=self.halfwidth,
        )
