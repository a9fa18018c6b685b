"""Command-line harness.

Subcommands:
  run       execute a TOML experiment config over its seed grid, write a
            per-seed summary CSV (and per-round trace CSVs with --trace),
            and enforce the requested bound checks via the exit code
  verify    run a canned desk-scale experiment and print PASS/FAIL lines
  plotdata  aggregate a summary CSV into two-column (x, y, stderr) files

Exit codes: 0 all good, 1 a bound check failed, 2 bad config or usage.
Floats are serialized with repr(), the shortest round-tripping form, so
re-running a config reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import ExperimentConfig, build_environment, build_filter, build_learner, config_from_dict, load_config, parse_seed_spec
from .core import ConfigError, PASSED, run_filtered
from .environments import HeavyTailLogisticEnv, HuberMixtureEnv
from .evaluation import (
    best_comparator,
    build_ledger,
    check_topk_regret_bound,
    mean_bound_report,
    online_to_batch,
    passed_sum_sq,
    sc_passed_regret_certificate,
    worst_natural_inliers,
)
from .learners import adaptive_ogd_regret_bound
from .quantile import FEATURE_NORM, GRADIENT_NORM, bernstein_width, quantile_regret_bound
from .topk import verify_filtered_mass_all_levels, verify_pass_bound
from .verify import VERIFY_NAMES, run_verify

WORKERS_ENV_VAR = "ROBUST_OCO_WORKERS"

SUMMARY_COLUMNS = [
    "seed",
    "T",
    "env",
    "filter",
    "filter_param",
    "learner",
    "robust_regret",
    "linearized_regret",
    "bound_value",
    "bound_satisfied",
    "passed_count",
    "filtered_count",
    "grad_bound_inliers",
    "final_filter_stat",
    "excess_risk",
]

TRACE_COLUMNS = [
    "t",
    "decision",
    "stat_value",
    "filter_stat",
    "grad_dual_norm",
    "loss_value",
    "w",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, np.floating):
        return repr(float(value))
    return str(value)


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# run


def _inlier_rounds_for(cfg: ExperimentConfig, env, trace) -> np.ndarray:
    fkind = cfg.filter["kind"]
    if fkind == "topk":
        return worst_natural_inliers(trace, int(cfg.filter["k"]))
    if fkind == "quantile":
        level = _reference_stat_quantile(cfg, env, trace)
        rounds = [rec.t for rec in trace if rec.stat_value <= level]
        return np.asarray(rounds, dtype=np.int64)
    return np.arange(1, len(trace) + 1, dtype=np.int64)


def _reference_stat_quantile(cfg: ExperimentConfig, env, trace) -> float:
    p = float(cfg.filter["p"])
    if isinstance(env, HuberMixtureEnv):
        analytic = env.stat_quantile(p)
        if analytic is not None:
            return analytic
    if isinstance(env, HeavyTailLogisticEnv) and cfg.filter.get("mode") == FEATURE_NORM:
        return env.feature_quantile(p)
    stats = sorted(rec.stat_value for rec in trace)
    return stats[math.ceil(p * len(stats)) - 1]


def _final_filter_stat(cfg: ExperimentConfig, trace) -> Optional[float]:
    fkind = cfg.filter["kind"]
    if not trace:
        return None
    if fkind == "topk":
        return trace[-1].filter_stat
    if fkind == "quantile":
        p = float(cfg.filter["p"])
        delta = float(cfg.filter.get("delta", float(cfg.T) ** -2))
        stats = sorted(rec.stat_value for rec in trace)
        level = p - bernstein_width(p, delta, len(stats))
        if level <= 0:
            return 0.0
        return stats[math.ceil(level * len(stats)) - 1]
    return None


def _base_bound_value(cfg: ExperimentConfig, env, trace, u) -> float:
    if cfg.learner["kind"] == "adaptive-ogd":
        return adaptive_ogd_regret_bound(env.domain.diameter(), passed_sum_sq(trace))
    return sc_passed_regret_certificate(trace, float(cfg.learner["sigma"]), u)


def run_one_seed(raw_cfg: Dict, seed: int) -> Tuple[Dict, Optional[List[Dict]], Optional[str]]:
    """One seed's summary row, optional trace rows, and the first violated
    inequality (if any check failed)."""
    cfg = config_from_dict(raw_cfg)
    env = build_environment(cfg.environment, cfg.T)
    learner = build_learner(cfg.learner, env.domain)
    filt = build_filter(cfg.filter, cfg.T)
    run = env.realize(seed)
    trace = run_filtered(run.events, learner, filt)

    rounds = _inlier_rounds_for(cfg, env, trace)
    u = best_comparator(trace, rounds, env.domain)
    ledger = build_ledger(trace, rounds, u)

    bound_value = None
    bound_satisfied = None
    violation = None
    if "topk-bound" in cfg.checks:
        base = _base_bound_value(cfg, env, trace, u)
        check = check_topk_regret_bound(trace, int(cfg.filter["k"]), env.domain, base)
        bound_value = check.rhs
        bound_satisfied = check.holds
        if not check.holds:
            violation = (
                f"seed {seed}: topk-bound violated: regret {check.lhs!r} "
                f"> bound {check.rhs!r}"
            )
    if "pass-bound" in cfg.checks:
        ok = verify_pass_bound(trace, int(cfg.filter["k"]))
        bound_satisfied = ok if bound_satisfied is None else (bound_satisfied and ok)
        if not ok and violation is None:
            violation = f"seed {seed}: a passed round exceeded twice the list minimum"
    if "filtered-mass" in cfg.checks:
        ok = verify_filtered_mass_all_levels(trace, int(cfg.filter["k"]))
        bound_satisfied = ok if bound_satisfied is None else (bound_satisfied and ok)
        if not ok and violation is None:
            violation = f"seed {seed}: filtered norm mass exceeded 2 (k+1) G"

    excess = None
    if cfg.risk_mc_samples > 0 and (
        hasattr(env, "sample_inlier_events") or hasattr(env, "sample_events")
    ):
        o2b = online_to_batch(trace, env, cfg.risk_mc_samples, seed=seed + 982_451_653)
        excess = o2b.excess_risk

    row = {
        "seed": seed,
        "T": cfg.T,
        "env": cfg.environment["kind"],
        "filter": cfg.filter["kind"],
        "filter_param": cfg.filter.get("k", cfg.filter.get("p")),
        "learner": cfg.learner["kind"],
        "robust_regret": ledger.robust_regret,
        "linearized_regret": ledger.linearized_robust_regret,
        "bound_value": bound_value,
        "bound_satisfied": bound_satisfied,
        "passed_count": ledger.passed_count,
        "filtered_count": ledger.filtered_count,
        "grad_bound_inliers": ledger.grad_bound_inliers,
        "final_filter_stat": _final_filter_stat(cfg, trace),
        "excess_risk": excess,
    }

    trace_rows = None
    if cfg.trace:
        trace_rows = [
            {
                "t": rec.t,
                "decision": rec.decision,
                "stat_value": rec.stat_value,
                "filter_stat": rec.filter_stat,
                "grad_dual_norm": rec.grad_dual_norm,
                "loss_value": rec.loss_value,
                "w": ";".join(repr(float(c)) for c in rec.w),
            }
            for rec in trace
        ]
    return row, trace_rows, violation


def _worker(args):
    raw_cfg, seed = args
    return seed, run_one_seed(raw_cfg, seed)


def _aggregate_quantile_check(cfg: ExperimentConfig, env, rows) -> Tuple[Optional[str], Optional[float]]:
    """Mean robust regret across seeds against the quantile filter bound."""
    if "quantile-bound" not in cfg.checks:
        return None, None
    p = float(cfg.filter["p"])
    mode = cfg.filter.get("mode", GRADIENT_NORM)
    if isinstance(env, HeavyTailLogisticEnv) and mode == FEATURE_NORM:
        level = env.feature_quantile(p)
    else:
        level = env.stat_quantile(p)
    learner = build_learner(cfg.learner, env.domain)
    bound = quantile_regret_bound(learner.regret_bound, env.domain.diameter(), level, p, cfg.T)
    regrets = [row["robust_regret"] for row in rows]
    report = mean_bound_report(regrets, bound)
    if report.holds:
        return None, bound
    return (
        f"quantile-bound violated: mean regret {report.mean!r} "
        f"> bound {report.bound!r} (+4 stderr {report.stderr!r})"
    ), bound


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seeds:
            cfg = ExperimentConfig(**{**cfg.__dict__, "seeds": parse_seed_spec(args.seeds)})
        if args.out:
            cfg = ExperimentConfig(**{**cfg.__dict__, "out_dir": args.out})
        if args.trace:
            cfg = ExperimentConfig(**{**cfg.__dict__, "trace": True})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    raw_cfg = {
        "name": cfg.name,
        "T": cfg.T,
        "seeds": list(cfg.seeds),
        "environment": dict(cfg.environment),
        "learner": dict(cfg.learner),
        "filter": dict(cfg.filter),
        "checks": list(cfg.checks),
        "out": cfg.out_dir,
        "trace": cfg.trace,
        "risk_mc_samples": cfg.risk_mc_samples,
    }

    workers = args.workers or _default_workers()
    results: Dict[int, Tuple] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for seed, payload in pool.map(
                _worker, [(raw_cfg, s) for s in cfg.seeds], chunksize=8
            ):
                results[seed] = payload
    else:
        for s in cfg.seeds:
            results[s] = run_one_seed(raw_cfg, s)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = out_dir / f"{cfg.name}_summary.csv"
    rows = []
    violation = None
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in cfg.seeds:
            row, trace_rows, seed_violation = results[s]
            rows.append(row)
            if seed_violation and violation is None:
                violation = seed_violation
            writer.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])
            if trace_rows is not None:
                trace_path = out_dir / f"{cfg.name}_trace_{s}.csv"
                with open(trace_path, "w", newline="", encoding="utf-8") as tfh:
                    twriter = csv.writer(tfh)
                    twriter.writerow(TRACE_COLUMNS)
                    for trow in trace_rows:
                        twriter.writerow([_fmt(trow[c]) for c in TRACE_COLUMNS])

    env = build_environment(cfg.environment, cfg.T)
    agg_violation, _ = _aggregate_quantile_check(cfg, env, rows)
    if violation is None:
        violation = agg_violation

    print(f"wrote {summary_path} ({len(rows)} seeds)")
    if violation:
        print(violation)
        return 1
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    name = args.experiment
    if name not in VERIFY_NAMES:
        print(
            f"unknown experiment {name!r}; choose from: {', '.join(VERIFY_NAMES)}",
            file=sys.stderr,
        )
        return 2
    reports = run_verify(name)
    all_ok = True
    for rep in reports:
        print(rep.line())
        all_ok = all_ok and rep.passed
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# plotdata


PLOT_KINDS = ("regret-vs-T", "regret-vs-k", "excess-risk-vs-T", "pass-rate-vs-t")


def _read_csv(path: str) -> Tuple[List[str], List[Dict[str, str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            return list(reader.fieldnames or []), list(reader)
    except FileNotFoundError as exc:
        raise ConfigError(f"input file not found: {path}") from exc


def _grouped_mean(rows, key_col: str, val_col: str):
    groups: Dict[float, List[float]] = {}
    for row in rows:
        if row.get(val_col, "") == "" or row.get(key_col, "") == "":
            continue
        groups.setdefault(float(row[key_col]), []).append(float(row[val_col]))
    out = []
    for key in sorted(groups):
        vals = np.asarray(groups[key])
        stderr = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        out.append((key, float(vals.mean()), stderr))
    return out


def cmd_plotdata(args) -> int:
    try:
        header, rows = _read_csv(args.summary)
        if args.kind not in PLOT_KINDS:
            raise ConfigError(f"unknown kind {args.kind!r}; valid: {PLOT_KINDS}")
        if args.kind == "regret-vs-T":
            _need_columns(header, ["T", "robust_regret"])
            data = _grouped_mean(rows, "T", "robust_regret")
        elif args.kind == "regret-vs-k":
            _need_columns(header, ["filter", "filter_param", "robust_regret"])
            data = _grouped_mean(
                [r for r in rows if r.get("filter") == "topk"],
                "filter_param",
                "robust_regret",
            )
        elif args.kind == "excess-risk-vs-T":
            _need_columns(header, ["T", "excess_risk"])
            data = _grouped_mean(rows, "T", "excess_risk")
        else:  # pass-rate-vs-t over a per-round trace file
            _need_columns(header, ["t", "decision"])
            data = []
            passed = 0
            for i, row in enumerate(rows, start=1):
                passed += 1 if row["decision"] == PASSED else 0
                data.append((float(row["t"]), passed / i, 0.0))
    except ConfigError as exc:
        print(f"plotdata error: {exc}", file=sys.stderr)
        return 2

    out_path = args.out or f"{args.kind}.csv"
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "stderr"])
        for x, y, se in data:
            writer.writerow([_fmt(x), _fmt(y), _fmt(se)])
    print(f"wrote {out_path} ({len(data)} rows)")
    return 0


def _need_columns(header: List[str], needed: List[str]) -> None:
    missing = [c for c in needed if c not in header]
    if missing:
        raise ConfigError(f"summary is missing columns: {missing}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-oco",
        description="Robust online convex optimization experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config over its seed grid")
    p_run.add_argument("--config", required=True, help="TOML experiment config")
    p_run.add_argument("--seeds", help="override the config's seeds, e.g. 1..100")
    p_run.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default ${WORKERS_ENV_VAR} or 1)")
    p_run.add_argument("--trace", action="store_true",
                       help="also write per-round trace CSVs (large)")
    p_run.add_argument("--out", help="output directory override")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="run a canned verification experiment")
    p_verify.add_argument("experiment", help=f"one of: {', '.join(VERIFY_NAMES)}")
    p_verify.set_defaults(func=cmd_verify)

    p_plot = sub.add_parser("plotdata", help="aggregate a summary CSV for plotting")
    p_plot.add_argument("summary", help="summary (or trace) CSV produced by run")
    p_plot.add_argument("--kind", required=True, help=f"one of: {', '.join(PLOT_KINDS)}")
    p_plot.add_argument("--out", help="output file (default <kind>.csv)")
    p_plot.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
