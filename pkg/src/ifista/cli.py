"""Batch command-line front-end: run, sweep, verify.

Exit codes: 0 success, 1 usage/config error, 2 divergence guard,
3 inner-solver iteration cap, 4 verification violation.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from . import analysis
from .config import (
    ENV_SEED,
    ExperimentConfig,
    build_problem,
    build_solver_config,
    load_config,
    parse_config,
)
from .exceptions import ConfigError, DivergenceError, InnerSolverCapError
from .inexact import (
    inexact_prox_dual,
    inexact_prox_perturb,
    inexact_prox_weak,
)
from .problems import from_config as problem_from_config
from .solvers import SolverTrace, bound_series_from_trace, run_baseline, run_inexact_fista, run_stochastic_fista

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_INNER_CAP = 3
EXIT_VIOLATION = 4


def _family_alpha(params: dict) -> Optional[float]:
    kind = params.get("family")
    if kind == "power":
        return float(params.get("alpha", 1.0))
    if kind in ("critical", "linear"):
        return 1.0
    return None  # constant_one: no polynomial growth


def _schedule_p(sched: dict) -> float:
    # zero error magnitude satisfies any decay requirement
    return np.inf if float(sched.get("c", 0.0)) == 0.0 else float(sched.get("p", 0.0))


def _feasibility(cfg: ExperimentConfig) -> Optional[dict]:
    alpha = _family_alpha(cfg.params)
    if alpha is None:
        return None
    p_eff = _schedule_p(cfg.delta)
    if cfg.mode != "stochastic":
        p_eff = min(p_eff, _schedule_p(cfg.b))
    verdict = analysis.schedule_feasibility(
        alpha, min(p_eff, 1e308), cfg.gamma_schedule["q"], cfg.gamma_schedule["r"]
    )
    return {
        "iterate_convergence_guaranteed": verdict.iterate_convergence_guaranteed,
        "predicted_rate_exponent": verdict.predicted_rate_exponent,
        "log_power": verdict.log_power,
        "deterministic_error_decay_ok": verdict.deterministic_error_decay_ok,
    }


def _fit_slope(gaps: np.ndarray, cfg: ExperimentConfig) -> Optional[float]:
    k_last = gaps.size - 1
    if cfg.fit_window is not None:
        k_min, k_max = cfg.fit_window
    else:
        k_min, k_max = max(10, k_last // 100), k_last
    try:
        return analysis.rate_fit(gaps, k_min, min(k_max, k_last)).slope
    except ValueError:
        return None


def _max_bound_violation(F_gap: np.ndarray, bound: np.ndarray) -> Optional[float]:
    viol = F_gap[1:] - bound[1:]
    viol = viol[np.isfinite(viol)]
    if viol.size == 0:
        return None
    return float(max(0.0, float(viol.max())))


def _execute(cfg: ExperimentConfig):
    """Run one experiment; returns (summary_dict, trace, aggregate_or_None)."""
    problem = build_problem(cfg)
    solver_cfg = build_solver_config(cfg)
    x0 = np.asarray(cfg.x0, dtype=float) if cfg.x0 is not None else None
    start = time.perf_counter()
    aggregate = None
    if cfg.mode == "stochastic":
        traces, aggregate = run_stochastic_fista(problem, solver_cfg, x0)
        trace = traces[0]
        gaps = aggregate.mean_F_gap
        bound = aggregate.bound_rhs
        final_gap = float(gaps[-1]) if np.isfinite(gaps[-1]) else None
    else:
        runner = run_baseline if cfg.mode == "baseline" else run_inexact_fista
        trace = runner(problem, solver_cfg, x0)
        gaps = trace.F_gap
        bound = trace.bound_rhs
        final_gap = float(trace.F_gap[-1]) if np.isfinite(trace.F_gap[-1]) else None
    elapsed = time.perf_counter() - start
    summary = {
        "run_id": cfg.run_id(),
        "mode": cfg.mode,
        "final_F_gap": final_gap,
        "fitted_slope": _fit_slope(gaps, cfg),
        "max_bound_violation": _max_bound_violation(gaps, bound),
        "wall_clock_s": elapsed,
        "feasibility": _feasibility(cfg),
        "sigma": float(cfg.noise.get("sigma", 0.0)),
        "weak_inexactness": cfg.weak_inexactness,
        "replications": cfg.replications if cfg.mode == "stochastic" else 1,
        "config": cfg.canonical(),
    }
    return summary, trace, aggregate


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.seed, args.max_iters)
        out_dir = args.out or cfg.out_dir or "."
        os.makedirs(out_dir, exist_ok=True)
        summary, trace, aggregate = _execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence guard: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except InnerSolverCapError as exc:
        print(f"inner solver cap: {exc}", file=sys.stderr)
        return EXIT_INNER_CAP
    trace_path = os.path.join(out_dir, "trace.csv")
    trace.to_csv(trace_path)
    if aggregate is not None:
        aggregate.to_csv(os.path.join(out_dir, "aggregate.csv"))
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"run {summary['run_id']}: mode={summary['mode']} iters={trace.iterations} "
        f"final_F_gap={summary['final_F_gap']} -> {trace_path}"
    )
    return EXIT_OK


_SWEEP_KEYS = ("alpha", "p", "q", "r", "sigma")
_SWEEP_COLUMNS = (
    "alpha", "p", "q", "r", "sigma", "run_id", "status",
    "iterate_convergence_guaranteed", "predicted_rate_exponent", "log_power",
    "deterministic_error_decay_ok", "fitted_slope", "final_F_gap",
    "max_bound_violation", "wall_clock_s", "error",
)


def _derive_point_config(base: ExperimentConfig, point: dict) -> ExperimentConfig:
    raw = {
        "problem": dict(base.problem),
        "mode": base.mode,
        "params": dict(base.params),
        "gamma": base.gamma,
        "gamma_schedule": dict(base.gamma_schedule),
        "delta": dict(base.delta),
        "b": dict(base.b),
        "noise": dict(base.noise),
        "weak_inexactness": base.weak_inexactness,
        "prox_direction": base.prox_direction,
        "max_iters": base.max_iters,
        "replications": base.replications,
        "seed": base.seed,
        "reference_tol": base.reference_tol,
        "attach_reference": base.attach_reference,
        "store_points": base.store_points,
        "inner_cap": base.inner_cap,
        "fit_window": base.fit_window,
        "x0": base.x0,
    }
    if point.get("alpha") is not None:
        raw["params"] = {"family": "power", "alpha": float(point["alpha"]), "base": "linear_half"}
    if point.get("p") is not None:
        raw["delta"] = {**raw["delta"], "p": float(point["p"])}
        raw["b"] = {**raw["b"], "p": float(point["p"])}
    if point.get("q") is not None:
        raw["gamma_schedule"] = {**raw["gamma_schedule"], "q": float(point["q"])}
    if point.get("r") is not None:
        raw["gamma_schedule"] = {**raw["gamma_schedule"], "r": float(point["r"])}
    if point.get("sigma") is not None:
        sigma = float(point["sigma"])
        raw["noise"] = {**raw["noise"], "sigma": sigma}
        raw["mode"] = "stochastic" if sigma > 0 else "deterministic"
    return parse_config(raw)


def _run_grid_point(base: ExperimentConfig, point: dict) -> dict:
    row = {key: point.get(key) for key in _SWEEP_KEYS}
    row.update({name: None for name in _SWEEP_COLUMNS[5:]})
    try:
        cfg = _derive_point_config(base, point)
        row["run_id"] = cfg.run_id()
        summary, _, _ = _execute(cfg)
    except DivergenceError as exc:
        row["status"], row["error"] = "divergence", str(exc)
        return row
    except InnerSolverCapError as exc:
        row["status"], row["error"] = "inner_cap", str(exc)
        return row
    except (ConfigError, ValueError) as exc:
        row["status"], row["error"] = "error", str(exc)
        return row
    row["status"] = "ok"
    feas = summary["feasibility"] or {}
    row["iterate_convergence_guaranteed"] = feas.get("iterate_convergence_guaranteed")
    row["predicted_rate_exponent"] = feas.get("predicted_rate_exponent")
    row["log_power"] = feas.get("log_power")
    row["deterministic_error_decay_ok"] = feas.get("deterministic_error_decay_ok")
    row["fitted_slope"] = summary["fitted_slope"]
    row["final_F_gap"] = summary["final_F_gap"]
    row["max_bound_violation"] = summary["max_bound_violation"]
    row["wall_clock_s"] = summary["wall_clock_s"]
    return row


def cmd_sweep(args) -> int:
    try:
        base = load_config(args.config, args.seed, args.max_iters)
        if not base.sweep:
            raise ConfigError("sweep config requires a nonempty 'sweep' grid")
        unknown = set(base.sweep) - set(_SWEEP_KEYS)
        if unknown:
            raise ConfigError(f"unknown sweep key(s): {sorted(unknown)}")
        axes = []
        for key in _SWEEP_KEYS:
            vals = base.sweep.get(key)
            if vals is None:
                axes.append([None])
            elif isinstance(vals, (list, tuple)) and len(vals) > 0:
                axes.append(list(vals))
            else:
                raise ConfigError(f"sweep key {key!r} must be a nonempty list")
        grid = [dict(zip(_SWEEP_KEYS, combo)) for combo in itertools.product(*axes)]
        if not grid or all(all(v is None for v in point.values()) for point in grid):
            raise ConfigError("sweep grid is empty")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = args.out or base.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    workers = max(1, args.workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda pt: _run_grid_point(base, pt), grid))
    else:
        rows = [_run_grid_point(base, pt) for pt in grid]

    table_path = os.path.join(out_dir, "sweep.csv")
    with open(table_path, "w") as fh:
        fh.write(",".join(_SWEEP_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for name in _SWEEP_COLUMNS:
                val = row.get(name)
                if val is None:
                    cells.append("")
                elif isinstance(val, float):
                    cells.append(repr(val))
                elif name == "error":
                    cells.append('"' + str(val).replace('"', "'") + '"')
                else:
                    cells.append(str(val))
            fh.write(",".join(cells) + "\n")
    n_ok = sum(1 for row in rows if row["status"] == "ok")
    print(f"sweep: {n_ok}/{len(rows)} grid points ok -> {table_path}")
    return EXIT_OK


def _verify_bounds(args) -> int:
    try:
        trace = SolverTrace.from_csv(args.trace)
    except (OSError, ValueError) as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    mode, sigma, weak = "deterministic", 0.0, False
    sidecar = os.path.join(os.path.dirname(os.path.abspath(args.trace)), "summary.json")
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            summary = json.load(fh)
        mode = summary.get("mode", mode)
        sigma = float(summary.get("sigma", 0.0))
        weak = bool(summary.get("weak_inexactness", False))
    try:
        replayed = bound_series_from_trace(trace, mode=mode, sigma=sigma, weak=weak)
    except ValueError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finite = np.isfinite(trace.bound_rhs[1:])
    mismatch = np.abs(replayed[1:] - trace.bound_rhs[1:]) > 1e-9 * np.maximum(1.0, np.abs(replayed[1:]))
    mismatch &= finite
    bad_replay = np.nonzero(mismatch)[0] + 1
    if mode == "stochastic":
        # the bound holds in expectation: check the replication mean (plus a
        # 3-standard-error allowance) from the aggregate, not a single run
        agg_path = os.path.join(os.path.dirname(os.path.abspath(args.trace)), "aggregate.csv")
        if not os.path.exists(agg_path):
            print("trace error: stochastic bound check needs aggregate.csv next to the trace",
                  file=sys.stderr)
            return EXIT_CONFIG
        agg = np.genfromtxt(agg_path, delimiter=",", names=True)
        resid = agg["mean_F_gap"][1:] - (agg["bound_rhs"][1:] + 3.0 * agg["se_F_gap"][1:])
        viol = resid > 1e-10 * np.maximum(1.0, agg["bound_rhs"][1:])
        viol &= np.isfinite(resid)
        label = "mean F_gap exceeds bound_rhs + 3*SE"
    else:
        viol = (trace.F_gap[1:] - trace.bound_rhs[1:]) > 1e-10 * np.maximum(1.0, trace.bound_rhs[1:])
        viol &= np.isfinite(trace.F_gap[1:]) & finite
        label = "F_gap exceeds bound_rhs"
    bad_bound = np.nonzero(viol)[0] + 1
    if bad_replay.size:
        print(f"bounds: FAIL stored bound_rhs differs from replay at k={bad_replay[:10].tolist()}")
    if bad_bound.size:
        print(f"bounds: FAIL {label} at k={bad_bound[:10].tolist()}")
    if bad_replay.size or bad_bound.size:
        return EXIT_VIOLATION
    print(f"bounds: PASS ({trace.k.size} rows, mode={mode}, 0 violations)")
    return EXIT_OK


def _verify_lemmas(args) -> int:
    rng = np.random.default_rng(args.seed)
    n_inst = args.instances
    failures = 0

    worst = -np.inf
    for _ in range(n_inst):
        lam, sig = analysis.random_bihari_instance(rng)
        mu = analysis.bihari_extremal_sequence(lam, sig)
        tight, loose = analysis.bihari_bound(lam, sig)
        run_max = np.maximum.accumulate(np.sqrt(mu))
        excess = float(np.max(run_max - tight))
        worst = max(worst, excess)
        if excess > 1e-9 or np.any(tight > loose + 1e-12):
            failures += 1
    status = "PASS" if failures == 0 else "FAIL"
    print(f"lemma sqrt-sum recursion: {status} ({n_inst} instances, worst excess {worst:.2e})")

    worst = -np.inf
    fail2 = 0
    stated_exceeded = 0
    for _ in range(n_inst):
        alpha0, lam, xi = analysis.random_recurrence_instance(rng)
        alphas = analysis.recurrence_extremal_sequence(alpha0, lam, xi)
        by_tn, max_sqrt = analysis.recurrence_bound(alpha0, lam, xi)
        envelope = analysis.recurrence_envelope_bound(alpha0, lam, xi)
        excess = float(np.max(alphas[1:] - envelope))
        run_max = np.maximum.accumulate(np.sqrt(alphas))[1:]
        excess2 = float(np.max(run_max - max_sqrt))
        worst = max(worst, excess, excess2)
        if excess > 1e-9 or excess2 > 1e-9:
            fail2 += 1
        if float(np.max(alphas[1:] - by_tn)) > 1e-9:
            stated_exceeded += 1
    status = "PASS" if fail2 == 0 else "FAIL"
    print(f"lemma additive-error recursion: {status} ({n_inst} instances, worst excess {worst:.2e})")
    if stated_exceeded:
        print(f"  note: the (10/9, 1) constant pair is exceeded at the worst case on "
              f"{stated_exceeded}/{n_inst} instances (known defect; the envelope form is the "
              f"sound reference, see recurrence_envelope_bound)")
    failures += fail2

    fail3 = 0
    worst = -np.inf
    for _ in range(max(1, n_inst // 2)):
        a0, lam, a = analysis.random_cesaro_instance(rng)
        b = a[1:] + lam * (a[1:] - a[:-1])
        rec = analysis.cesaro_reconstruct(a0, lam, b)
        rel = float(np.max(np.abs(rec - a[1:]) / np.maximum(1.0, np.abs(a[1:]))))
        worst = max(worst, rel)
        if rel > 1e-10:
            fail3 += 1
    status = "PASS" if fail3 == 0 else "FAIL"
    print(f"weighted-average round-trip: {status} ({max(1, n_inst // 2)} instances, worst rel err {worst:.2e})")
    failures += fail3
    return EXIT_OK if failures == 0 else EXIT_VIOLATION


def _verify_prox_certs(args) -> int:
    rng = np.random.default_rng(args.seed)
    problems = {
        "quadratic": problem_from_config({"kind": "quadratic", "n": 12, "seed": 3}),
        "lasso": problem_from_config({"kind": "lasso", "m": 40, "n": 25, "seed": 3}),
        "box_qp": problem_from_config({"kind": "box_qp", "n": 12, "seed": 3}),
    }
    tv = problem_from_config({"kind": "tv1d", "m": 30, "n": 60, "seed": 3, "lam_tv": 0.5})
    n_calls = args.instances
    failures = []
    kinds = list(problems)
    for i in range(n_calls):
        if i % 5 == 4:
            # dual-gap mode; compare against a much tighter reference solve
            y = rng.standard_normal(tv.n) * rng.uniform(0.5, 3.0)
            gamma = rng.uniform(0.1, 1.5)
            delta = rng.uniform(1e-3, 0.5)
            z, cert = inexact_prox_dual(tv, y, gamma, delta)
            # 1e-10-gap reference solve: z_ref is within sqrt(2e-10) of the
            # true prox and its value h_ref lies within 1e-10 above the minimum
            z_ref, _, _ = tv.nonsmooth.dual_prox(y, gamma, np.sqrt(2e-10))
            h_z = gamma * tv.nonsmooth.value(z) + 0.5 * float(np.dot(z - y, z - y))
            h_ref = gamma * tv.nonsmooth.value(z_ref) + 0.5 * float(np.dot(z_ref - y, z_ref - y))
            if h_z - h_ref > delta**2 / 2 + 1e-12:
                failures.append((i, "dual excess"))
            if np.linalg.norm(z - z_ref) > delta + 2e-5:
                failures.append((i, "dual distance"))
            if cert.objective_excess_bound > delta**2 / 2 + 1e-12:
                failures.append((i, "dual certificate"))
        else:
            prob = problems[kinds[i % len(kinds)]]
            y = rng.standard_normal(prob.n) * rng.uniform(0.5, 3.0)
            gamma = rng.uniform(0.05, 2.0)
            delta = 0.0 if rng.random() < 0.15 else rng.uniform(1e-4, 0.5)
            use_weak = i % 3 == 0
            if use_weak:
                z, cert = inexact_prox_weak(prob, y, gamma, delta, rng)
            else:
                direction = "fixed_unit" if i % 7 == 0 else "seeded_random_unit"
                z, cert = inexact_prox_perturb(prob, y, gamma, delta, rng, direction)
            p = prob.nonsmooth.exact_prox(y, gamma)
            h_z = gamma * prob.nonsmooth.value(z) + 0.5 * float(np.dot(z - y, z - y))
            h_p = gamma * prob.nonsmooth.value(p) + 0.5 * float(np.dot(p - y, p - y))
            if h_z - h_p > delta**2 / 2 + 1e-12:
                failures.append((i, "excess"))
            if np.linalg.norm(z - p) > delta + 1e-10:
                failures.append((i, "distance"))
            if cert.has_decomposition:
                if cert.delta1**2 + cert.delta2**2 > delta**2 + 1e-10:
                    failures.append((i, "split size"))
                if cert.e is not None and np.linalg.norm(cert.e) > cert.delta2 + 1e-12:
                    failures.append((i, "split e"))
    if failures:
        print(f"prox-certs: FAIL {len(failures)} violations, first: {failures[:5]}")
        return EXIT_VIOLATION
    print(f"prox-certs: PASS ({n_calls} calls, 0 violations)")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.target == "bounds":
        if not args.trace:
            print("verify bounds requires --trace PATH", file=sys.stderr)
            return EXIT_CONFIG
        return _verify_bounds(args)
    if args.target == "lemmas":
        return _verify_lemmas(args)
    return _verify_prox_certs(args)


def _default_seed() -> int:
    return int(os.environ.get(ENV_SEED, "0"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifista",
        description="Inexact accelerated proximal-gradient experiments: run, sweep, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured solver run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--max-iters", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a grid over alpha/p/q/r/sigma")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--max-iters", type=int, default=None)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="replay bound checks and property suites")
    p_verify.add_argument("target", choices=["bounds", "lemmas", "prox-certs"])
    p_verify.add_argument("--trace", default=None)
    p_verify.add_argument("--seed", type=int, default=_default_seed())
    p_verify.add_argument("--instances", type=int, default=1000)
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
