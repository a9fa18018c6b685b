"""Comparator oracles, robust-regret ledgers, bound checks, Monte Carlo
estimates for the lower-bound constructions, and online-to-batch conversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .core import Ball, Box, ConfigError, Domain, LinearLoss, PASSED, RoundRecord
from .environments import EnvRun, adversarial_choice, make_rng


# ---------------------------------------------------------------------------
# Comparator oracles


def offline_minimizer(events: Sequence, domain: Domain, iters: Optional[int] = None) -> np.ndarray:
    """Minimize the summed loss of `events` over the domain.

    Linear losses have a closed form. One-dimensional domains use a coarse
    grid followed by bounded scalar refinement (tolerance 1e-8 in the
    argument). Anything else falls back to projected subgradient descent
    with iterate averaging, which is an approximate oracle.
    """
    if len(events) == 0:
        return domain.center()
    if all(isinstance(e, LinearLoss) for e in events):
        v = np.sum([e.g for e in events], axis=0)
        return _linear_minimizer(v, domain)
    if domain.dimension == 1:
        return _grid_refine_1d(events, domain)
    return _subgradient_minimizer(events, domain, iters=iters)


def _linear_minimizer(v: np.ndarray, domain: Domain) -> np.ndarray:
    if isinstance(domain, Ball):
        n = float(np.linalg.norm(v))
        if n == 0.0:
            return domain.center()
        return domain.center() - domain.radius * (v / n)
    if isinstance(domain, Box):
        mid = domain.center()
        return np.where(v > 0, domain.lower, np.where(v < 0, domain.upper, mid))
    raise ConfigError(f"no linear minimizer for domain {domain!r}")


def _total_loss(events, u) -> float:
    return math.fsum(e.value(u) for e in events)


def _grid_refine_1d(events, domain: Domain, grid: int = 513) -> np.ndarray:
    lo = float(domain.project(np.array([-1e300]))[0])
    hi = float(domain.project(np.array([1e300]))[0])
    xs = np.linspace(lo, hi, grid)
    vals = [_total_loss(events, np.array([x])) for x in xs]
    i = int(np.argmin(vals))
    b_lo, b_hi = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    res = optimize.minimize_scalar(
        lambda x: _total_loss(events, np.array([x])),
        bounds=(b_lo, b_hi), method="bounded", options={"xatol": 1e-9},
    )
    return np.array([float(res.x)])


def _subgradient_minimizer(events, domain: Domain, iters: Optional[int] = None) -> np.ndarray:
    n_iter = 10 * len(events) if iters is None else iters
    u = domain.center()
    avg = np.zeros_like(u)
    diam = domain.diameter()
    sum_sq = 0.0
    for i in range(1, n_iter + 1):
        g = np.sum([e.subgradient(u) for e in events], axis=0)
        sum_sq += float(np.dot(g, g))
        if sum_sq > 0.0:
            eta = diam / math.sqrt(2.0 * sum_sq)
            u = domain.project(u - eta * g)
        avg += (u - avg) / i
    return domain.project(avg)


def best_comparator(trace: Sequence[RoundRecord], rounds, domain: Domain) -> np.ndarray:
    """The comparator maximizing the robust regret on the given rounds,
    equivalently the minimizer of the summed loss over those rounds."""
    rounds = np.asarray(rounds, dtype=np.int64)
    if rounds.size == 0:
        return domain.center()
    events = [trace[t - 1].event for t in rounds]
    return offline_minimizer(events, domain)


# ---------------------------------------------------------------------------
# Robust regret and its ledger


def robust_regret(trace: Sequence[RoundRecord], rounds, u) -> tuple:
    """(actual, linearized) robust regret of the trace against u on the given
    rounds; the linearized form dominates the actual one by convexity."""
    u = np.asarray(u, dtype=float)
    rounds = np.asarray(rounds, dtype=np.int64)
    actual = math.fsum(
        trace[t - 1].loss_value - trace[t - 1].event.value(u) for t in rounds
    )
    linear = math.fsum(
        float(np.dot(trace[t - 1].w - u, trace[t - 1].grad)) for t in rounds
    )
    return actual, linear


@dataclass
class RegretLedger:
    rounds: np.ndarray
    comparator: np.ndarray
    robust_regret: float
    linearized_robust_regret: float
    grad_bound_inliers: float       # largest gradient dual norm on the rounds
    comparator_radius: float        # max ||w_t - u|| over rounds with norm <= twice that
    passed_count: int
    filtered_count: int


def build_ledger(trace: Sequence[RoundRecord], rounds, u) -> RegretLedger:
    rounds = np.asarray(rounds, dtype=np.int64)
    u = np.asarray(u, dtype=float)
    actual, linear = robust_regret(trace, rounds, u)
    norms = np.array([rec.grad_dual_norm for rec in trace])
    g_s = float(norms[rounds - 1].max()) if rounds.size else 0.0
    radius = 0.0
    for rec in trace:
        if rec.grad_dual_norm <= 2.0 * g_s:
            radius = max(radius, float(np.linalg.norm(rec.w - u)))
    passed = sum(1 for rec in trace if rec.decision == PASSED)
    return RegretLedger(
        rounds=rounds,
        comparator=u,
        robust_regret=actual,
        linearized_robust_regret=linear,
        grad_bound_inliers=g_s,
        comparator_radius=radius,
        passed_count=passed,
        filtered_count=len(trace) - passed,
    )


def worst_natural_inliers(trace: Sequence[RoundRecord], k: int) -> np.ndarray:
    """All rounds except the k with the largest gradient dual norms."""
    norms = np.array([rec.grad_dual_norm for rec in trace])
    if k <= 0:
        return np.arange(1, len(trace) + 1, dtype=np.int64)
    if k >= len(trace):
        return np.array([], dtype=np.int64)
    drop = np.argsort(-norms, kind="stable")[:k]
    keep = np.setdiff1d(np.arange(len(trace)), drop)
    return (keep + 1).astype(np.int64)


def passed_sum_sq(trace: Sequence[RoundRecord]) -> float:
    return math.fsum(
        rec.grad_dual_norm ** 2 for rec in trace if rec.decision == PASSED
    )


def sc_passed_regret_certificate(trace: Sequence[RoundRecord], sigma: float, u) -> float:
    """Per-run certificate for the 1/(sigma n) step schedule: over passed
    rounds, with n counting them,

        (1/2) sum ||g||^2 / (sigma n)  +  (sigma/2) sum ||w - u||^2,

    an upper bound on the learner's linearized regret against u on those
    rounds."""
    u = np.asarray(u, dtype=float)
    n = 0
    grad_part = []
    dist_part = []
    for rec in trace:
        if rec.decision != PASSED:
            continue
        n += 1
        grad_part.append(rec.grad_dual_norm ** 2 / (sigma * n))
        dist_part.append(float(np.dot(rec.w - u, rec.w - u)))
    return 0.5 * math.fsum(grad_part) + 0.5 * sigma * math.fsum(dist_part)


# ---------------------------------------------------------------------------
# Bound checks


@dataclass
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    slack: float
    detail: str = ""


def check_topk_regret_bound(trace: Sequence[RoundRecord], k: int, domain: Domain,
                            base_bound_value: float,
                            rel_tol: float = 1e-6) -> BoundCheck:
    """Per-run robust regret bound for the top-k filtered learner.

    Uses the worst natural inlier set (drop the k largest-norm rounds) and
    the maximizing comparator:

        linearized robust regret <= base_bound + 4 D(u,S) G(S) (k+1).
    """
    rounds = worst_natural_inliers(trace, k)
    u = best_comparator(trace, rounds, domain)
    ledger = build_ledger(trace, rounds, u)
    rhs = base_bound_value + 4.0 * ledger.comparator_radius * ledger.grad_bound_inliers * (k + 1)
    lhs = ledger.linearized_robust_regret
    tol = rel_tol * max(1.0, abs(rhs))
    return BoundCheck(
        lhs=lhs, rhs=rhs, holds=lhs <= rhs + tol, slack=rhs - lhs,
        detail=f"G(S)={ledger.grad_bound_inliers:.6g} D(u,S)={ledger.comparator_radius:.6g}",
    )


# ---------------------------------------------------------------------------
# Monte Carlo for the lower-bound constructions


@dataclass
class MCEstimate:
    mean: float
    stderr: float
    n_seeds: int
    values: np.ndarray


def adversarial_regret_mc(env, make_trace: Callable[[EnvRun], Sequence[RoundRecord]],
                          n_seeds: int, first_seed: int = 1) -> MCEstimate:
    """Mean robust regret at the environment's adversarial (u, S) choice.

    `make_trace` runs a fresh learner/filter on the realized events of one
    seed. The per-seed regret uses actual loss values, not the linearized
    upper bound.
    """
    if n_seeds < 100:
        raise ConfigError("Monte Carlo estimates need n_seeds >= 100")
    vals = np.empty(n_seeds)
    for i in range(n_seeds):
        run = env.realize(first_seed + i)
        trace = make_trace(run)
        u, rounds = adversarial_choice(run)
        actual, _ = robust_regret(trace, rounds, u)
        vals[i] = actual
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(n_seeds))
    return MCEstimate(mean=mean, stderr=stderr, n_seeds=n_seeds, values=vals)


# ---------------------------------------------------------------------------
# Online-to-batch conversion


@dataclass
class IterateAverageResult:
    iterate_average: np.ndarray
    excess_risk: float
    stderr: float
    risk_mc_samples: int
    u_reference: np.ndarray


def online_to_batch(trace: Sequence[RoundRecord], env, risk_mc_samples: int,
                    seed: int = 0, u_reference=None) -> IterateAverageResult:
    """Average the predictions and estimate the excess risk under the
    environment's inlier distribution by fresh paired Monte Carlo.

    The reference point defaults to the minimizer found by the offline
    oracle on a large fresh sample; environments with an exact minimizer can
    pass it in directly.
    """
    w_bar = np.mean([rec.w for rec in trace], axis=0)
    rng = make_rng(seed)
    sampler = getattr(env, "sample_inlier_events", None) or env.sample_events
    if u_reference is None:
        ref_events = sampler(rng, max(risk_mc_samples, 10 * risk_mc_samples))
        u_reference = offline_minimizer(ref_events, env.domain)
    u_reference = np.asarray(u_reference, dtype=float)
    events = sampler(rng, risk_mc_samples)
    diffs = np.array([e.value(w_bar) - e.value(u_reference) for e in events])
    return IterateAverageResult(
        iterate_average=w_bar,
        excess_risk=float(diffs.mean()),
        stderr=float(diffs.std(ddof=1) / math.sqrt(len(diffs))),
        risk_mc_samples=risk_mc_samples,
        u_reference=u_reference,
    )


def huber_excess_risk_bound(D: float, G: float, epsilon: float, T: int, delta: float) -> float:
    """High-probability excess-risk bound for the tuned contaminated setting:

        12 D G eps + 2 D G (5 sqrt(2 ln(2/delta)) + 2) / sqrt(T)
                   + 2 D G (ln(2/delta) + 10) / T
    """
    log_term = math.log(2.0 / delta)
    return (
        12.0 * D * G * epsilon
        + 2.0 * D * G * (5.0 * math.sqrt(2.0 * log_term) + 2.0) / math.sqrt(T)
        + 2.0 * D * G * (log_term + 10.0) / T
    )


@dataclass
class MeanBoundReport:
    mean: float
    stderr: float
    bound: float
    holds: bool

    @property
    def ratio(self) -> float:
        return self.mean / self.bound if self.bound else math.inf


def mean_bound_report(values, bound: float, stderr_band: float = 4.0) -> MeanBoundReport:
    """Statistical check: the Monte Carlo mean is below the bound, allowing
    the stated number of standard errors."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(values.size))
    return MeanBoundReport(
        mean=mean, stderr=stderr, bound=bound,
        holds=mean <= bound + stderr_band * stderr,
    )


def quantile_bound_report(per_seed_regrets, base_bound, diameter: float,
                          stat_quantile: float, p: float, horizon: int,
                          stderr_band: float = 4.0) -> MeanBoundReport:
    """Mean robust regret over seeds against the quantile filter's expected
    robust regret bound; `base_bound(G, n)` is the base learner's
    guarantee."""
    from .quantile import quantile_regret_bound

    bound = quantile_regret_bound(base_bound, diameter, stat_quantile, p, horizon)
    return mean_bound_report(per_seed_regrets, bound, stderr_band=stderr_band)
