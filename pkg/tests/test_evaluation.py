"""Comparator oracle, regret ledger, bound checks, Monte Carlo estimates,
and online-to-batch conversion."""

import math

import numpy as np

from robust_oco import (
    AdaptiveOGD,
    Ball,
    LinearLoss,
    SquaredLoss,
    StronglyConvexOGD,
    adaptive_ogd_regret_bound,
    adversarial_regret_mc,
    best_comparator,
    build_ledger,
    check_topk_regret_bound,
    huber_excess_risk_bound,
    interval,
    online_to_batch,
    robust_regret,
    run_topk,
    worst_natural_inliers,
)
from robust_oco.environments import (
    HuberMixtureEnv,
    RademacherLinearEnv,
    SpikedAdversarialEnv,
    StronglyConvexAdversaryEnv,
    UniformLinearInliers,
)
from robust_oco.evaluation import (
    mean_bound_report,
    offline_minimizer,
    passed_sum_sq,
)


def _trace_from_values(values, k=1):
    events = [LinearLoss([float(v)]) for v in values]
    return run_topk(events, AdaptiveOGD(interval(-1.0, 1.0)), k)


class TestBestComparator:
    def test_linear_endpoint(self):
        trace = _trace_from_values([1.0, 1.0, 1.0], k=0)
        u = best_comparator(trace, [1, 2, 3], interval(-1.0, 1.0))
        np.testing.assert_array_equal(u, [-1.0])

    def test_zero_gradient_sum_returns_center(self):
        trace = _trace_from_values([1.0, -1.0], k=0)
        u = best_comparator(trace, [1, 2], interval(-1.0, 1.0))
        np.testing.assert_array_equal(u, [0.0])

    def test_empty_rounds_returns_center(self):
        trace = _trace_from_values([1.0], k=0)
        u = best_comparator(trace, [], interval(-0.5, 1.5))
        np.testing.assert_allclose(u, [0.5])

    def test_ball_linear_minimizer(self):
        events = [LinearLoss([3.0, 4.0])]
        u = offline_minimizer(events, Ball([0.0, 0.0], 2.0))
        np.testing.assert_allclose(u, [-1.2, -1.6])

    def test_squared_losses_match_clamped_mean(self):
        rng = np.random.default_rng(0)
        targets = rng.uniform(-2, 2, 30)
        events = [SquaredLoss([t], 1.0) for t in targets]
        u = offline_minimizer(events, interval(-1.0, 1.0))
        expected = float(np.clip(targets.mean(), -1.0, 1.0))
        assert abs(float(u[0]) - expected) < 1e-6

    def test_one_dimensional_grid_matches_exhaustive_search(self):
        # objective value within 1e-4 of an exhaustive step-1e-5 grid search
        rng = np.random.default_rng(1)
        for _ in range(5):
            targets = rng.uniform(-1.5, 1.5, 20)
            sigma = 2.0
            events = [SquaredLoss([float(t)], sigma) for t in targets]
            u = offline_minimizer(events, interval(-1.0, 1.0))
            xs = np.arange(-1.0, 1.0 + 1e-9, 1e-5)
            objective = 0.5 * sigma * ((xs[:, None] - targets[None, :]) ** 2).sum(axis=1)
            exhaustive_best = float(objective.min())
            got = sum(ev.value(u) for ev in events)
            assert got <= exhaustive_best + 1e-4

    def test_multidim_subgradient_oracle_close_to_truth(self):
        rng = np.random.default_rng(2)
        targets = rng.uniform(-0.4, 0.4, (15, 2))
        events = [SquaredLoss(t, 1.0) for t in targets]
        dom = Ball([0.0, 0.0], 1.0)
        u = offline_minimizer(events, dom)
        np.testing.assert_allclose(u, targets.mean(axis=0), atol=1e-2)


class TestRobustRegret:
    def test_empty_rounds_zero(self):
        trace = _trace_from_values([1.0, 2.0])
        assert robust_regret(trace, [], np.array([0.5])) == (0.0, 0.0)

    def test_constant_learner_at_comparator(self):
        # squared losses keep w at center when gradient is zero there
        events = [SquaredLoss([0.0], 1.0)] * 5
        trace = run_topk(events, AdaptiveOGD(interval(-1.0, 1.0)), 0)
        actual, linear = robust_regret(trace, [1, 2, 3, 4, 5], np.array([0.0]))
        assert actual == 0.0 and linear == 0.0

    def test_single_linear_round(self):
        events = [LinearLoss([2.0])]

        class Fixed:
            def predict(self):
                return np.array([1.0])

            def update(self, event):
                pass

        from robust_oco.core import PassAllFilter, run_filtered

        trace = run_filtered(events, Fixed(), PassAllFilter())
        actual, linear = robust_regret(trace, [1], np.array([-1.0]))
        assert actual == 4.0 and linear == 4.0

    def test_actual_never_exceeds_linearized(self):
        rng = np.random.default_rng(3)
        events = [
            SquaredLoss([float(rng.uniform(-1, 1))], 1.0) for _ in range(100)
        ]
        trace = run_topk(events, StronglyConvexOGD(interval(-1, 1), 1.0), 2)
        u = np.array([0.3])
        actual, linear = robust_regret(trace, list(range(1, 101)), u)
        assert actual <= linear + 1e-9


class TestLedgerAndInliers:
    def test_worst_natural_inliers_drops_largest(self):
        trace = _trace_from_values([1.0, 5.0, 2.0, 9.0])
        rounds = worst_natural_inliers(trace, 2)
        assert rounds.tolist() == [1, 3]
        assert worst_natural_inliers(trace, 0).tolist() == [1, 2, 3, 4]
        assert worst_natural_inliers(trace, 4).tolist() == []

    def test_ledger_fields(self):
        trace = _trace_from_values([1.0, -0.5, 2.0], k=0)
        rounds = np.array([1, 2])
        u = np.array([0.0])
        ledger = build_ledger(trace, rounds, u)
        assert ledger.grad_bound_inliers == 1.0
        assert ledger.passed_count + ledger.filtered_count == 3
        actual, linear = robust_regret(trace, rounds, u)
        assert ledger.robust_regret == actual
        assert ledger.linearized_robust_regret == linear

    def test_comparator_radius_empty_condition_is_zero(self):
        # every norm above twice the inlier bound: radius defaults to 0
        trace = _trace_from_values([4.0, 8.0], k=0)
        ledger = build_ledger(trace, np.array([], dtype=np.int64), np.array([0.0]))
        assert ledger.grad_bound_inliers == 0.0
        assert ledger.comparator_radius == 0.0


class TestTopKBoundCheck:
    def test_all_zero_gradients(self):
        trace = _trace_from_values([0.0] * 10, k=1)
        check = check_topk_regret_bound(trace, 1, interval(-1, 1), 0.0)
        assert check.lhs == 0.0 and check.rhs == 0.0 and check.holds

    def test_spiked_runs_hold_with_slack(self):
        for seed in range(20):
            env = SpikedAdversarialEnv(300, [50], [1e12])
            run = env.realize(seed)
            learner = AdaptiveOGD(env.domain)
            trace = run_topk(run.events, learner, 1)
            base = adaptive_ogd_regret_bound(env.domain.diameter(), passed_sum_sq(trace))
            check = check_topk_regret_bound(trace, 1, env.domain, base)
            assert check.holds and check.slack > 0

    def test_rhs_independent_of_spike_magnitude(self):
        env_a = SpikedAdversarialEnv(200, [30], [1e6])
        env_b = env_a.with_spike_scale(1e6)
        checks = []
        for env in (env_a, env_b):
            run = env.realize(7)
            trace = run_topk(run.events, AdaptiveOGD(env.domain), 1)
            base = adaptive_ogd_regret_bound(env.domain.diameter(), passed_sum_sq(trace))
            checks.append(check_topk_regret_bound(trace, 1, env.domain, base))
        assert checks[0].rhs == checks[1].rhs
        assert checks[0].lhs == checks[1].lhs


class TestAdversarialMC:
    def test_linear_mean_matches_half_k(self):
        env = RademacherLinearEnv(1.0, 1.0, 60, 6)

        def make_trace(run):
            return run_topk(run.events, AdaptiveOGD(env.domain), 6)

        est = adversarial_regret_mc(env, make_trace, 400)
        assert abs(est.mean - 3.0) <= 4 * est.stderr

    def test_sc_mean_above_quarter_k(self):
        env = StronglyConvexAdversaryEnv(1.0, 1.0, 60, 6)

        def make_trace(run):
            return run_topk(run.events, StronglyConvexOGD(env.domain, 1.0), 6)

        est = adversarial_regret_mc(env, make_trace, 400)
        assert est.mean >= 1.5 - 4 * est.stderr


class TestOnlineToBatch:
    def test_constant_learner_at_minimizer_has_zero_excess(self):
        env = HuberMixtureEnv(0.0, UniformLinearInliers(0.1, 0.5), None, 50)
        run = env.realize(1)

        class Fixed:
            def predict(self):
                return np.array([-1.0])

            def update(self, event):
                pass

        from robust_oco.core import PassAllFilter, run_filtered

        trace = run_filtered(run.events, Fixed(), PassAllFilter())
        result = online_to_batch(trace, env, risk_mc_samples=20_000, seed=5)
        np.testing.assert_allclose(result.u_reference, [-1.0])
        assert abs(result.excess_risk) <= 4 * max(result.stderr, 1e-12)

    def test_iterate_average_in_domain_and_excess_positive(self):
        env = HuberMixtureEnv(0.0, UniformLinearInliers(-0.2, 1.0), None, 400)
        run = env.realize(2)
        trace = run_topk(run.events, AdaptiveOGD(env.domain), 3)
        result = online_to_batch(trace, env, risk_mc_samples=50_000, seed=6)
        assert env.domain.contains(result.iterate_average, tol=1e-12)
        # true excess is mean * (w_bar + 1); MC estimate should agree
        mu = 0.4
        expected = mu * (float(result.iterate_average[0]) + 1.0)
        assert abs(result.excess_risk - expected) <= 5 * result.stderr + 1e-3


class TestBoundsHelpers:
    def test_huber_bound_value(self):
        # eps=0.05, D=2, G=1, T=1e4, delta=0.1
        val = huber_excess_risk_bound(2.0, 1.0, 0.05, 10_000, 0.1)
        log_term = math.log(20.0)
        expected = (
            1.2
            + 4.0 * (5.0 * math.sqrt(2 * log_term) + 2.0) / 100.0
            + 4.0 * (log_term + 10.0) / 10_000.0
        )
        assert math.isclose(val, expected, rel_tol=1e-12)

    def test_mean_bound_report(self):
        rep = mean_bound_report([1.0, 2.0, 3.0], bound=2.5)
        assert rep.holds
        rep2 = mean_bound_report([10.0, 12.0], bound=2.0)
        assert not rep2.holds

    def test_quantile_bound_report_wraps_bound_formula(self):
        from robust_oco import quantile_bound_report
        from robust_oco.quantile import quantile_regret_bound

        base = lambda g, n: 2.0 * 2.0 * g * math.sqrt(n)
        rep = quantile_bound_report([10.0, 12.0, 9.0], base, 2.0, 0.9, 0.9, 1000)
        assert rep.bound == quantile_regret_bound(base, 2.0, 0.9, 0.9, 1000)
        assert rep.holds and rep.ratio < 1.0
