"""Seed-vectorized runners for one-dimensional oblivious streams.

The reference runners in `core`, `topk`, and `quantile` process one round at
a time through Python objects, which is the right shape for correctness but
too slow for Monte Carlo sweeps over thousands of seeds at horizons up to
1e5. The functions here re-implement the same semantics with one numpy row
per seed; tests pin exact decision-for-decision and trajectory equivalence
against the reference path.

Scope: scalar domains [-W, W], linear / squared / logistic losses, streams
whose filter statistics do not depend on the learner (every environment in
this package is oblivious in that sense).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import ConfigError
from .quantile import bernstein_width


@dataclass
class ScanResult:
    """Per-round outputs of a vectorized run: row i is seed i."""

    w: np.ndarray        # (n, T) predictions
    grads: np.ndarray    # (n, T) realized gradients
    passed: np.ndarray   # (n, T) filter decisions
    threshold: np.ndarray  # (n, T) value the statistic was compared against

    @property
    def passed_counts(self) -> np.ndarray:
        return self.passed.sum(axis=1)

    def passed_sum_sq(self) -> np.ndarray:
        return np.where(self.passed, self.grads * self.grads, 0.0).sum(axis=1)


def _adaptive_update(w, g, sum_sq, mask, halfwidth):
    diam = 2.0 * halfwidth
    sum_sq = sum_sq + np.where(mask, g * g, 0.0)
    eta = np.zeros_like(w)
    live = sum_sq > 0.0
    eta[live] = diam / np.sqrt(2.0 * sum_sq[live])
    stepped = np.clip(w - eta * g, -halfwidth, halfwidth)
    return np.where(mask, stepped, w), sum_sq


def _sc_update(w, g, count, mask, sigma, halfwidth):
    count = count + mask
    eta = np.zeros_like(w)
    live = count > 0
    eta[live] = 1.0 / (sigma * count[live])
    stepped = np.clip(w - eta * g, -halfwidth, halfwidth)
    return np.where(mask, stepped, w), count


def run_topk_scan(values: np.ndarray, k, halfwidth: float,
                  loss: str = "linear", learner: str = "adaptive",
                  sigma: float = None, filtered: bool = True) -> ScanResult:
    """Top-k filtered online gradient descent over a batch of seed rows.

    `values` is (n, T): signed gradients for linear losses, or targets for
    squared losses (the gradient is then sigma (w - target)). Set
    filtered=False for the pass-everything baseline.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ConfigError("values must be (n_seeds, T)")
    if loss not in ("linear", "squared"):
        raise ConfigError(f"unsupported loss kind {loss!r}")
    if learner not in ("adaptive", "sc"):
        raise ConfigError(f"unsupported learner kind {learner!r}")
    if (loss == "squared" or learner == "sc") and not (sigma and sigma > 0):
        raise ConfigError("squared losses and the sc learner need sigma > 0")
    n, T = values.shape
    if filtered:
        if k is None or k < 0:
            raise ConfigError(f"outlier budget k must be a nonnegative integer, got {k}")
        lists = np.zeros((n, int(k) + 1))
    rows = np.arange(n)
    w = np.zeros(n)
    sum_sq = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    out_w = np.empty((n, T))
    out_g = np.empty((n, T))
    out_p = np.empty((n, T), dtype=bool)
    out_thr = np.empty((n, T))
    for t in range(T):
        out_w[:, t] = w
        if loss == "linear":
            g = values[:, t]
        else:
            g = sigma * (w - values[:, t])
        a = np.abs(g)
        if filtered:
            cur_min = lists.min(axis=1)
            ins = a > cur_min
            if ins.any():
                sub = lists[ins]
                sub[np.arange(sub.shape[0]), np.argmin(sub, axis=1)] = a[ins]
                lists[ins] = sub
                cur_min[ins] = sub.min(axis=1)
            mask = a <= 2.0 * cur_min
            out_thr[:, t] = cur_min
        else:
            mask = np.ones(n, dtype=bool)
            out_thr[:, t] = np.inf
        if learner == "adaptive":
            w, sum_sq = _adaptive_update(w, g, sum_sq, mask, halfwidth)
        else:
            w, count = _sc_update(w, g, count, mask, sigma, halfwidth)
        out_g[:, t] = g
        out_p[:, t] = mask
    return ScanResult(w=out_w, grads=out_g, passed=out_p, threshold=out_thr)


# ---------------------------------------------------------------------------
# Quantile filter decisions from ranks
#
# The pass test "stat <= ceil(q n)-th smallest of the history" is equivalent
# to "fewer than ceil(q n) history values are strictly below stat", so the
# decisions follow from sequential ranks alone. Ranks are built per seed with
# ties broken later-round-first, which makes the prefix count at rank-1 equal
# the strictly-smaller count even with duplicate values.


def _fenwick_add(tree: np.ndarray, rows: np.ndarray, idx: np.ndarray) -> None:
    size = tree.shape[1] - 1
    i = idx.astype(np.int64).copy()
    while True:
        act = i <= size
        if not act.any():
            return
        r, ii = rows[act], i[act]
        tree[r, ii] += 1
        i[act] = ii + (ii & -ii)


def _fenwick_prefix(tree: np.ndarray, idx: np.ndarray) -> np.ndarray:
    total = np.zeros(tree.shape[0], dtype=np.int64)
    rows = np.arange(tree.shape[0])
    i = idx.astype(np.int64).copy()
    while True:
        act = i > 0
        if not act.any():
            return total
        r, ii = rows[act], i[act]
        total[act] += tree[r, ii]
        i[act] = ii - (ii & -ii)


def quantile_target_indices(p: float, delta: float, max_hist: int) -> np.ndarray:
    """Order-statistic index of the LCB for each history size 0..max_hist-1;
    0 marks an undefined (zero) LCB."""
    m = np.zeros(max_hist, dtype=np.int64)
    for hist in range(1, max_hist):
        q = p - bernstein_width(p, delta, hist)
        m[hist] = math.ceil(q * hist) if q > 0.0 else 0
    return m


def quantile_pass_mask(stats: np.ndarray, p: float, delta: float) -> np.ndarray:
    """Decisions of the quantile LCB filter for each round of each seed row.

    Valid because the statistics are independent of the learner, so the
    whole stream can be ranked offline.
    """
    stats = np.asarray(stats, dtype=float)
    if stats.ndim != 2:
        raise ConfigError("stats must be (n_seeds, T)")
    n, T = stats.shape
    m_idx = quantile_target_indices(p, delta, T)
    neg_time = -np.arange(T)
    ranks = np.empty((n, T), dtype=np.int64)
    for i in range(n):
        order = np.lexsort((neg_time, stats[i]))
        ranks[i, order] = np.arange(1, T + 1)
    tree = np.zeros((n, T + 1), dtype=np.int64)
    rows = np.arange(n)
    passed = np.empty((n, T), dtype=bool)
    for t in range(T):
        m = m_idx[t]
        if m >= 1:
            below = _fenwick_prefix(tree, ranks[:, t] - 1)
            passed[:, t] = below <= m - 1
        else:
            passed[:, t] = stats[:, t] <= 0.0
        _fenwick_add(tree, rows, ranks[:, t])
    return passed


def lcb_exceedance_any(stats: np.ndarray, p: float, delta: float, level_value: float) -> np.ndarray:
    """Per seed row: does the post-round LCB ever exceed `level_value`?

    LCB_t > v exactly when the target order statistic exists and fewer than
    that many of the first t statistics are <= v, so a running count settles
    every round at once.
    """
    stats = np.asarray(stats, dtype=float)
    n, T = stats.shape
    hist = np.arange(1, T + 1, dtype=float)
    log_term = math.log(1.0 / delta)
    widths = np.sqrt(2.0 * p * (1.0 - p) * log_term / hist) + log_term / (3.0 * hist)
    q = p - widths
    m = np.where(q > 0.0, np.ceil(q * hist), 0.0).astype(np.int64)
    counts = np.cumsum(stats <= level_value, axis=1)
    exceed = (m[None, :] >= 1) & (counts < m[None, :])
    return exceed.any(axis=1)


# ---------------------------------------------------------------------------
# Learner scans under precomputed decisions


def scan_adaptive_linear(grads: np.ndarray, passed: np.ndarray, halfwidth: float) -> np.ndarray:
    """Adaptive-step gradient descent over (n, T) linear gradients with a
    given pass mask; returns the (n, T) predictions."""
    grads = np.asarray(grads, dtype=float)
    n, T = grads.shape
    w = np.zeros(n)
    sum_sq = np.zeros(n)
    out = np.empty((n, T))
    for t in range(T):
        out[:, t] = w
        w, sum_sq = _adaptive_update(w, grads[:, t], sum_sq, passed[:, t], halfwidth)
    return out


def scan_adaptive_logistic(x: np.ndarray, y: np.ndarray, passed: np.ndarray,
                           halfwidth: float):
    """Adaptive-step descent on scalar logistic losses ln(1+exp(-y w x)).

    Returns (predictions, realized gradients), both (n, T). Gradients on
    filtered rounds are evaluated but never applied.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, T = x.shape
    w = np.zeros(n)
    sum_sq = np.zeros(n)
    out_w = np.empty((n, T))
    out_g = np.empty((n, T))
    for t in range(T):
        out_w[:, t] = w
        xt, yt = x[:, t], y[:, t]
        s = expit(-yt * w * xt)
        g = -yt * xt * s
        out_g[:, t] = g
        w, sum_sq = _adaptive_update(w, g, sum_sq, passed[:, t], halfwidth)
    return out_w, out_g


def linear_regret_best_comparator(w: np.ndarray, grads: np.ndarray,
                                  inlier_mask: np.ndarray, halfwidth: float) -> np.ndarray:
    """Per seed row, max over u in [-W, W] of the regret on the masked
    rounds of linear losses: sum w g + W |sum g|."""
    a = np.where(inlier_mask, grads, 0.0).sum(axis=1)
    b = np.where(inlier_mask, w * grads, 0.0).sum(axis=1)
    return b + halfwidth * np.abs(a)
