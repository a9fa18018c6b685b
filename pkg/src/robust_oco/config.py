"""Experiment configuration: TOML in, validated component builders out.

A config names an environment, a learner, a filter, the horizon, the seeds,
and the bound checks to enforce. Invalid combinations (a quantile filter on
a construction that defines its own adversarial inlier set, a negative
outlier budget, and so on) are rejected at parse time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple

import tomli

from .core import ConfigError
from .learners import AdaptiveOGD, StronglyConvexOGD
from .quantile import FEATURE_NORM, GRADIENT_NORM, QuantileFilter
from .topk import TopKFilter
from .core import PassAllFilter
from .environments import (
    HeavyTailLogisticEnv,
    HuberMixtureEnv,
    ParetoOutliers,
    PointMassOutliers,
    RademacherLinearEnv,
    SpikedAdversarialEnv,
    StronglyConvexAdversaryEnv,
    UniformLinearInliers,
)

ENV_KINDS = (
    "rademacher-linear",
    "strongly-convex-adv",
    "huber-mixture",
    "heavytail-logistic",
    "spiked-adversarial",
)
LEARNER_KINDS = ("adaptive-ogd", "sc-ogd")
FILTER_KINDS = ("none", "topk", "quantile")
CHECK_KINDS = ("topk-bound", "pass-bound", "filtered-mass", "quantile-bound")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    T: int
    seeds: Tuple[int, ...]
    environment: Mapping
    learner: Mapping
    filter: Mapping
    checks: Tuple[str, ...] = ()
    out_dir: str = "."
    trace: bool = False
    risk_mc_samples: int = 0


def parse_seed_spec(spec) -> Tuple[int, ...]:
    """Either an explicit list of integers or a string "first..last"."""
    if isinstance(spec, str):
        parts = spec.split("..")
        if len(parts) != 2:
            raise ConfigError(f"seed range must look like '1..100', got {spec!r}")
        try:
            lo, hi = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ConfigError(f"non-integer seed range {spec!r}") from exc
        if hi < lo:
            raise ConfigError(f"empty seed range {spec!r}")
        return tuple(range(lo, hi + 1))
    if isinstance(spec, (list, tuple)):
        out = []
        for s in spec:
            if not isinstance(s, int):
                raise ConfigError(f"seeds must be integers, got {s!r}")
            out.append(s)
        if not out:
            raise ConfigError("seed list is empty")
        return tuple(out)
    raise ConfigError(f"seeds must be a list or 'first..last' string, got {spec!r}")


def _require(table: Mapping, key: str, section: str):
    if key not in table:
        raise ConfigError(f"missing field {key!r} in [{section}]")
    return table[key]


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error in {path}: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: Mapping) -> ExperimentConfig:
    for key in ("name", "T", "seeds", "environment", "learner", "filter"):
        if key not in raw:
            raise ConfigError(f"missing top-level field {key!r}")
    T = raw["T"]
    if not isinstance(T, int) or T < 1:
        raise ConfigError(f"T must be a positive integer, got {T!r}")
    checks = tuple(raw.get("checks", ()))
    for c in checks:
        if c not in CHECK_KINDS:
            raise ConfigError(f"unknown check {c!r}; valid: {CHECK_KINDS}")
    cfg = ExperimentConfig(
        name=str(raw["name"]),
        T=T,
        seeds=parse_seed_spec(raw["seeds"]),
        environment=dict(raw["environment"]),
        learner=dict(raw["learner"]),
        filter=dict(raw["filter"]),
        checks=checks,
        out_dir=str(raw.get("out", ".")),
        trace=bool(raw.get("trace", False)),
        risk_mc_samples=int(raw.get("risk_mc_samples", 0)),
    )
    # construct everything once so bad parameters fail at parse time
    env = build_environment(cfg.environment, cfg.T)
    build_learner(cfg.learner, env.domain)
    build_filter(cfg.filter, cfg.T)
    _validate_combination(cfg, env)
    return cfg


def _validate_combination(cfg: ExperimentConfig, env) -> None:
    fkind = cfg.filter.get("kind")
    if fkind == "quantile" and getattr(env, "has_adversarial_choice", False):
        raise ConfigError(
            "quantile filter assumes i.i.d. statistics; it cannot be paired "
            f"with the adversarial-choice environment {env.kind!r}"
        )
    if "topk-bound" in cfg.checks and fkind != "topk":
        raise ConfigError("check 'topk-bound' needs filter kind 'topk'")
    if "pass-bound" in cfg.checks and fkind != "topk":
        raise ConfigError("check 'pass-bound' needs filter kind 'topk'")
    if "filtered-mass" in cfg.checks and fkind != "topk":
        raise ConfigError("check 'filtered-mass' needs filter kind 'topk'")
    if "quantile-bound" in cfg.checks:
        if fkind != "quantile":
            raise ConfigError("check 'quantile-bound' needs filter kind 'quantile'")
        if _analytic_stat_quantile(env, cfg.filter) is None:
            raise ConfigError(
                "check 'quantile-bound' needs an environment with an analytic "
                "statistic quantile"
            )


def _analytic_stat_quantile(env, filter_spec: Mapping) -> Optional[float]:
    p = filter_spec.get("p")
    if p is None:
        return None
    if isinstance(env, HuberMixtureEnv):
        return env.stat_quantile(p)
    if isinstance(env, HeavyTailLogisticEnv):
        if filter_spec.get("mode", GRADIENT_NORM) == FEATURE_NORM:
            return env.feature_quantile(p)
    return None


def build_environment(spec: Mapping, T: int):
    kind = _require(spec, "kind", "environment")
    if kind == "rademacher-linear":
        return RademacherLinearEnv(
            G=float(spec.get("G", 1.0)),
            W=float(spec.get("W", 1.0)),
            T=T,
            k=int(_require(spec, "k", "environment")),
        )
    if kind == "strongly-convex-adv":
        return StronglyConvexAdversaryEnv(
            sigma=float(spec.get("sigma", 1.0)),
            W=float(spec.get("W", 1.0)),
            T=T,
            k=int(_require(spec, "k", "environment")),
        )
    if kind == "huber-mixture":
        inlier_spec = spec.get("inlier", {})
        inlier = UniformLinearInliers(
            low=float(inlier_spec.get("low", -1.0)),
            high=float(inlier_spec.get("high", 1.0)),
        )
        outlier = None
        if "outlier" in spec:
            outlier = _build_outlier(spec["outlier"])
        return HuberMixtureEnv(
            epsilon=float(_require(spec, "epsilon", "environment")),
            inlier=inlier,
            outlier=outlier,
            T=T,
            halfwidth=float(spec.get("halfwidth", 1.0)),
        )
    if kind == "heavytail-logistic":
        return HeavyTailLogisticEnv(
            gamma=float(_require(spec, "gamma", "environment")),
            T=T,
            flip_prob=float(spec.get("flip_prob", 0.1)),
            labels=str(spec.get("labels", "sign-flip")),
            halfwidth=float(spec.get("halfwidth", 1.0)),
        )
    if kind == "spiked-adversarial":
        return SpikedAdversarialEnv(
            T=T,
            spike_rounds=spec.get("spike_rounds", ()),
            spike_magnitudes=spec.get("spike_magnitudes", ()),
            base_low=float(spec.get("base_low", 0.5)),
            base_high=float(spec.get("base_high", 1.5)),
            halfwidth=float(spec.get("halfwidth", 1.0)),
        )
    raise ConfigError(f"unknown environment kind {kind!r}; valid: {ENV_KINDS}")


def _build_outlier(spec: Mapping):
    kind = _require(spec, "kind", "environment.outlier")
    if kind == "point-mass":
        return PointMassOutliers(
            magnitude=float(spec.get("magnitude", 1e8)),
            signed=bool(spec.get("signed", True)),
        )
    if kind == "pareto":
        return ParetoOutliers(
            exponent=float(spec.get("exponent", 1.5)),
            scale=float(spec.get("scale", 1e6)),
            signed=bool(spec.get("signed", True)),
        )
    raise ConfigError(f"unknown outlier kind {kind!r}; valid: point-mass, pareto")


def build_learner(spec: Mapping, domain):
    kind = _require(spec, "kind", "learner")
    if kind == "adaptive-ogd":
        return AdaptiveOGD(domain)
    if kind == "sc-ogd":
        return StronglyConvexOGD(domain, sigma=float(_require(spec, "sigma", "learner")))
    raise ConfigError(f"unknown learner kind {kind!r}; valid: {LEARNER_KINDS}")


def build_filter(spec: Mapping, T: int):
    kind = _require(spec, "kind", "filter")
    if kind == "none":
        return PassAllFilter()
    if kind == "topk":
        k = _require(spec, "k", "filter")
        if not isinstance(k, int) or k < 0:
            raise ConfigError(f"filter k must be a nonnegative integer, got {k!r}")
        return TopKFilter(k)
    if kind == "quantile":
        p = float(_require(spec, "p", "filter"))
        mode = str(spec.get("mode", GRADIENT_NORM))
        delta = spec.get("delta")
        return QuantileFilter(p, horizon=T, mode=mode,
                              delta=float(delta) if delta is not None else None)
    raise ConfigError(f"unknown filter kind {kind!r}; valid: {FILTER_KINDS}")
