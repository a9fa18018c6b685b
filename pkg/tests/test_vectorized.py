"""The seed-vectorized runners must match the reference object path
decision-for-decision and iterate-for-iterate."""

import numpy as np

from robust_oco import (
    AdaptiveOGD,
    LinearLoss,
    LogisticLoss,
    PASSED,
    SquaredLoss,
    StronglyConvexOGD,
    interval,
    run_quantile_filter,
    run_topk,
)
from robust_oco.quantile import FEATURE_NORM, QuantileLCBState
from robust_oco.vectorized import (
    lcb_exceedance_any,
    linear_regret_best_comparator,
    quantile_pass_mask,
    run_topk_scan,
    scan_adaptive_linear,
    scan_adaptive_logistic,
)


def _reference_arrays(trace):
    w = np.array([float(rec.w[0]) for rec in trace])
    passed = np.array([rec.decision == PASSED for rec in trace])
    thr = np.array([rec.filter_stat for rec in trace])
    return w, passed, thr


class TestTopKScanEquivalence:
    def test_linear_adaptive_bit_exact(self):
        rng = np.random.default_rng(0)
        n, T, k = 8, 300, 2
        vals = rng.normal(0, 1, (n, T)) * 10.0 ** rng.integers(0, 8, (n, T))
        scan = run_topk_scan(vals, k, 1.0)
        for i in range(n):
            events = [LinearLoss([v]) for v in vals[i]]
            trace = run_topk(events, AdaptiveOGD(interval(-1, 1)), k)
            w, passed, thr = _reference_arrays(trace)
            assert np.array_equal(passed, scan.passed[i])
            assert np.array_equal(w, scan.w[i])
            assert np.array_equal(thr, scan.threshold[i])

    def test_linear_with_duplicate_norms(self):
        vals = np.array([[1.0, 1.0, -1.0, 2.0, 2.0, -2.0, 0.5] * 10] * 2)
        scan = run_topk_scan(vals, 1, 1.0)
        for i in range(2):
            events = [LinearLoss([v]) for v in vals[i]]
            trace = run_topk(events, AdaptiveOGD(interval(-1, 1)), 1)
            w, passed, _ = _reference_arrays(trace)
            assert np.array_equal(passed, scan.passed[i])
            assert np.array_equal(w, scan.w[i])

    def test_squared_sc_learner_bit_exact(self):
        rng = np.random.default_rng(1)
        n, T, k = 5, 200, 3
        targets = rng.uniform(-1, 1, (n, T))
        sigma = 1.7
        scan = run_topk_scan(targets, k, 1.0, loss="squared", learner="sc", sigma=sigma)
        for i in range(n):
            events = [SquaredLoss([v], sigma) for v in targets[i]]
            trace = run_topk(events, StronglyConvexOGD(interval(-1, 1), sigma), k)
            w, passed, _ = _reference_arrays(trace)
            assert np.array_equal(passed, scan.passed[i])
            assert np.array_equal(w, scan.w[i])

    def test_unfiltered_baseline_passes_everything(self):
        rng = np.random.default_rng(2)
        vals = rng.normal(0, 1, (3, 50))
        scan = run_topk_scan(vals, None, 1.0, filtered=False)
        assert scan.passed.all()


class TestQuantileEquivalence:
    def test_pass_mask_matches_reference_with_ties(self):
        rng = np.random.default_rng(3)
        n, T = 6, 250
        stats = np.round(rng.uniform(0, 1, (n, T)), 2)  # duplicates on purpose
        p = 0.8
        mask = quantile_pass_mask(stats, p, float(T) ** -2)
        for i in range(n):
            events = [LinearLoss([v]) for v in stats[i]]
            trace = run_quantile_filter(events, AdaptiveOGD(interval(-1, 1)), p, horizon=T)
            ref = np.array([rec.decision == PASSED for rec in trace])
            assert np.array_equal(ref, mask[i])

    def test_scan_linear_matches_reference(self):
        rng = np.random.default_rng(4)
        n, T = 4, 300
        vals = rng.uniform(-1, 1, (n, T))
        p = 0.9
        mask = quantile_pass_mask(np.abs(vals), p, float(T) ** -2)
        w = scan_adaptive_linear(vals, mask, 1.0)
        for i in range(n):
            events = [LinearLoss([v]) for v in vals[i]]
            trace = run_quantile_filter(events, AdaptiveOGD(interval(-1, 1)), p, horizon=T)
            ref_w, ref_passed, _ = _reference_arrays(trace)
            assert np.array_equal(ref_passed, mask[i])
            assert np.array_equal(ref_w, w[i])

    def test_scan_logistic_matches_reference_feature_mode(self):
        rng = np.random.default_rng(5)
        n, T = 4, 200
        x = rng.uniform(1, 6, (n, T)) * rng.choice([-1.0, 1.0], (n, T))
        y = rng.choice([-1.0, 1.0], (n, T))
        p = 0.85
        mask = quantile_pass_mask(np.abs(x), p, float(T) ** -2)
        w, grads = scan_adaptive_logistic(x, y, mask, 1.0)
        for i in range(n):
            events = [LogisticLoss([xv], int(yv)) for xv, yv in zip(x[i], y[i])]
            trace = run_quantile_filter(
                events, AdaptiveOGD(interval(-1, 1)), p, horizon=T, mode=FEATURE_NORM
            )
            ref_w, ref_passed, _ = _reference_arrays(trace)
            assert np.array_equal(ref_passed, mask[i])
            np.testing.assert_allclose(ref_w, w[i], rtol=0, atol=1e-14)
            ref_g = np.array([float(rec.grad[0]) for rec in trace])
            np.testing.assert_allclose(ref_g, grads[i], rtol=1e-12, atol=1e-15)

    def test_exceedance_matches_direct_lcb_trajectory(self):
        rng = np.random.default_rng(6)
        n, T = 10, 150
        stats = rng.uniform(0, 1, (n, T))
        p, delta, level = 0.7, 1e-3, 0.6
        got = lcb_exceedance_any(stats, p, delta, level)
        for i in range(n):
            st = QuantileLCBState(p, delta)
            flags = []
            for v in stats[i]:
                st.record(float(v))
                flags.append(st.lcb() > level)
            assert got[i] == any(flags)


class TestRegretHelper:
    def test_matches_manual_maximization(self):
        rng = np.random.default_rng(7)
        w = rng.uniform(-1, 1, (3, 40))
        g = rng.normal(0, 1, (3, 40))
        mask = rng.random((3, 40)) < 0.7
        got = linear_regret_best_comparator(w, g, mask, 1.0)
        for i in range(3):
            best = -np.inf
            for u in np.linspace(-1, 1, 2001):
                val = float(np.sum((w[i] - u) * g[i] * mask[i]))
                best = max(best, val)
            assert abs(got[i] - best) < 1e-6
