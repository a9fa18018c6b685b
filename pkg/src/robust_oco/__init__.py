"""Robust online convex optimization: outlier-filtering meta-algorithms
around adaptive online learners, plus the environments and evaluators that
verify their regret guarantees empirically."""

from .core import (
    Ball,
    Box,
    ConfigError,
    FILTERED,
    HingeLoss,
    L2,
    L2Norm,
    LinearLoss,
    LogisticLoss,
    PASSED,
    PassAllFilter,
    RoundRecord,
    SquaredLoss,
    interval,
    run_filtered,
)
from .learners import AdaptiveOGD, StronglyConvexOGD, adaptive_ogd_regret_bound
from .topk import (
    TopKFilter,
    TopNormList,
    run_topk,
    verify_filtered_mass,
    verify_pass_bound,
)
from .quantile import (
    FEATURE_NORM,
    GRADIENT_NORM,
    QuantileFilter,
    QuantileLCBState,
    RunningQuantiles,
    bernstein_width,
    quantile_regret_bound,
    run_quantile_filter,
)
from .environments import (
    EnvRun,
    HeavyTailLogisticEnv,
    HuberMixtureEnv,
    ParetoOutliers,
    PointMassOutliers,
    RademacherLinearEnv,
    SpikedAdversarialEnv,
    StronglyConvexAdversaryEnv,
    UniformLinearInliers,
    adversarial_choice,
    huber_outlier_budget,
    make_rng,
)
from .evaluation import (
    BoundCheck,
    IterateAverageResult,
    MCEstimate,
    MeanBoundReport,
    RegretLedger,
    adversarial_regret_mc,
    best_comparator,
    build_ledger,
    check_topk_regret_bound,
    huber_excess_risk_bound,
    mean_bound_report,
    online_to_batch,
    quantile_bound_report,
    robust_regret,
    worst_natural_inliers,
)

__version__ = "0.1.0"
