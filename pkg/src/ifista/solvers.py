"""Accelerated proximal-gradient solvers with inexact oracles and full traces.

The deterministic solver runs

    x_{k+1} ~ delta_k-inexact prox of gamma*g at  y_k - gamma*(grad f(y_k) + b_k)
    beta_{k+1} = (t_k - 1) / t_{k+1}
    y_{k+1} = x_{k+1} + beta_{k+1} (x_{k+1} - x_k)

with x_0 = y_0 and 0 < gamma <= 1/L.  The stochastic variant replaces
grad f(y_k) + b_k by an unbiased oracle draw and gamma by a nonincreasing
per-iteration schedule gamma_k <= 1/L.  Both record, per iteration, the
auxiliary point v_k = t_{k-1} x_k - (t_{k-1} - 1) x_{k-1}, the energy

    E_k = 2 gamma_k t_{k-1}^2 (F(x_k) - F_*) + ||v_k - x_*||^2   (t_{-1} = 0)

and the closed-form right-hand side that bounds F(x_k) - F_* pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ConfigError, DivergenceError
from .inexact import (
    ErrorSchedule,
    StochasticOracleSpec,
    gradient_error,
    inexact_prox_dual,
    inexact_prox_perturb,
    inexact_prox_weak,
    noise_draw,
)
from .params import ParamFamily, ParamSequence, beta

Array = np.ndarray

TRACE_COLUMNS = (
    "k", "t_k", "gamma_k", "delta_k", "b_norm",
    "F_gap", "energy", "bound_rhs", "cert_excess", "x_dist_to_ref",
)

# divergence guard: abort after this many consecutive iterations with
# F_gap above 1e6 * max(F_gap_0, 1)
_GUARD_FACTOR = 1e6
_GUARD_RUN = 100


@dataclass
class DeterministicConfig:
    params: ParamFamily = field(default_factory=lambda: ParamFamily("critical"))
    gamma: Optional[float] = None  # None -> 1/L
    delta: ErrorSchedule = field(default_factory=ErrorSchedule)
    b: ErrorSchedule = field(default_factory=ErrorSchedule)
    weak_inexactness: bool = False  # e = 0 inexactness model for the prox
    prox_direction: str = "seeded_random_unit"
    max_iters: int = 1000
    seed: int = 0
    store_points: bool = False
    inner_cap: int = 10**6


@dataclass
class StochasticConfig:
    params: ParamFamily = field(default_factory=lambda: ParamFamily("critical"))
    gamma: Optional[float] = None  # gamma_0; schedule gamma/(k^q (1+log k)^r)
    q: float = 0.0
    r: float = 0.0
    delta: ErrorSchedule = field(default_factory=ErrorSchedule)
    noise: StochasticOracleSpec = field(default_factory=StochasticOracleSpec)
    weak_inexactness: bool = False
    prox_direction: str = "seeded_random_unit"
    max_iters: int = 1000
    replications: int = 1
    seed: int = 0
    store_points: bool = False
    inner_cap: int = 10**6

    def __post_init__(self):
        if self.q < 0 or self.r < 0:
            raise ConfigError("gamma schedule requires q >= 0 and r >= 0")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")


@dataclass
class SolverTrace:
    """Per-iteration record of a single run (rows k = 0..K).

    delta_k, b_norm and cert_excess on row k describe the step taken FROM
    iterate k (they are NaN on the final row); F_gap, energy, bound_rhs and
    x_dist_to_ref describe the state at iterate k.  Reference-dependent
    columns are NaN when the problem has no reference solution.
    """

    k: Array
    t_k: Array
    gamma_k: Array
    delta_k: Array
    b_norm: Array
    F_gap: Array
    energy: Array
    bound_rhs: Array
    cert_excess: Array
    x_dist_to_ref: Array
    xs: Optional[Array] = None  # (K+1, n) iterates, when store_points
    ys: Optional[Array] = None
    vs: Optional[Array] = None
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return int(self.k[-1])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for i in range(self.k.size):
                row = [str(int(self.k[i]))]
                for name in TRACE_COLUMNS[1:]:
                    row.append(repr(float(getattr(self, name)[i])))
                fh.write(",".join(row) + "\n")

    @staticmethod
    def from_csv(path) -> "SolverTrace":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            for name in TRACE_COLUMNS:
                if name not in header:
                    raise ValueError(f"trace is missing column {name!r}")
            if tuple(header) != TRACE_COLUMNS:
                raise ValueError(f"unexpected trace schema {header}")
            data = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
        arr = np.asarray(data, dtype=float)
        cols = {name: arr[:, i] for i, name in enumerate(TRACE_COLUMNS)}
        cols["k"] = cols["k"].astype(int)
        return SolverTrace(**cols)


@dataclass
class StochasticAggregate:
    """Across-replication mean and standard error of F(x_k) - F_* per k."""

    k: Array
    mean_F_gap: Array
    se_F_gap: Array
    bound_rhs: Array
    replications: int

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,mean_F_gap,se_F_gap,bound_rhs\n")
            for i in range(self.k.size):
                fh.write(
                    f"{int(self.k[i])},{repr(float(self.mean_F_gap[i]))},"
                    f"{repr(float(self.se_F_gap[i]))},{repr(float(self.bound_rhs[i]))}\n"
                )


def energy(F_gap: float, v: Array, x_star: Array, t_prev: float, gamma_k: float) -> float:
    """Energy 2 gamma_k t_prev^2 F_gap + ||v - x_star||^2 (t_prev = t_{k-1})."""
    d = v - x_star
    return 2.0 * gamma_k * (t_prev * t_prev) * F_gap + float(np.dot(d, d))


def theorem_bound_deterministic(k: int, x0: Array, x_star: Array, gamma: float,
                                ts, delta1s, delta2s, b_norms) -> float:
    """Closed-form bound on F(x_k) - F_* for the deterministic run.

    (1/(2 gamma t_{k-1}^2)) * [ (10/9)(||x0 - x*||^2 + sum t_i^2 d1_i^2)
                                + 4 (sum t_i d2_i + gamma sum t_i ||b_i||)^2 ]
    with all sums over i < k.  The error-free-drift variant is obtained by
    passing delta2s = 0 and delta1s = delta; the conservative substitution
    passes delta1s = delta2s = delta.
    """
    if k < 1:
        raise ValueError("the bound is defined for k >= 1 (t_{-1} = 0 makes k = 0 vacuous)")
    ts = np.asarray(ts, dtype=float)[:k]
    d1 = np.asarray(delta1s, dtype=float)[:k]
    d2 = np.asarray(delta2s, dtype=float)[:k]
    bs = np.asarray(b_norms, dtype=float)[:k]
    diff = np.asarray(x0, dtype=float) - np.asarray(x_star, dtype=float)
    d0 = float(np.dot(diff, diff))
    head = (10.0 / 9.0) * (d0 + float(np.sum(ts * ts * d1 * d1)))
    pen = float(np.sum(ts * d2)) + gamma * float(np.sum(ts * bs))
    return (head + 4.0 * pen * pen) / (2.0 * gamma * ts[k - 1] ** 2)


def theorem_bound_stochastic(k: int, x0: Array, x_star: Array, gammas,
                             ts, deltas, delta1s, delta2s, sigma: float) -> float:
    """Closed-form bound on E[F(x_k)] - F_* for the stochastic run.

    (1/(2 gamma_k t_{k-1}^2)) * [ (10/9)(||x0 - x*||^2
        + sum (2 gamma_i t_i^2 delta_i sigma + 2 sigma^2 gamma_i^2 t_i^2
               + t_i^2 d1_i^2)) + 4 (sum t_i d2_i)^2 ],  sums over i < k.
    """
    if k < 1:
        raise ValueError("the bound is defined for k >= 1 (t_{-1} = 0 makes k = 0 vacuous)")
    gs = np.asarray(gammas, dtype=float)
    ts = np.asarray(ts, dtype=float)
    d = np.asarray(deltas, dtype=float)[:k]
    d1 = np.asarray(delta1s, dtype=float)[:k]
    d2 = np.asarray(delta2s, dtype=float)[:k]
    t = ts[:k]
    g = gs[:k]
    diff = np.asarray(x0, dtype=float) - np.asarray(x_star, dtype=float)
    d0 = float(np.dot(diff, diff))
    xi = 2.0 * g * t * t * d * sigma + 2.0 * sigma * sigma * g * g * t * t + t * t * d1 * d1
    head = (10.0 / 9.0) * (d0 + float(np.sum(xi)))
    pen = float(np.sum(t * d2))
    return (head + 4.0 * pen * pen) / (2.0 * gs[k] * ts[k - 1] ** 2)


def bound_series_from_trace(trace: "SolverTrace", mode: str = "deterministic",
                            sigma: float = 0.0, weak: bool = False) -> Array:
    """Recompute the per-k bound right-hand side from trace columns alone.

    Mirrors the in-run accumulation, so a stored trace can be replayed and
    checked without the problem object.  Requires reference columns.
    """
    ts, gs = trace.t_k, trace.gamma_k
    ds, bs = trace.delta_k, trace.b_norm
    if not np.isfinite(trace.x_dist_to_ref[0]):
        raise ValueError("trace has no reference columns; bounds cannot be replayed")
    d0 = float(trace.x_dist_to_ref[0]) ** 2
    k_max = int(trace.k[-1])
    sig = sigma if mode == "stochastic" else 0.0
    out = np.full(k_max + 1, np.nan)
    s_xi = s_td = s_tb = 0.0
    gamma0 = gs[0]
    for k in range(k_max):
        tk, gk, dk = ts[k], gs[k], ds[k]
        tk2 = tk * tk
        s_xi += 2.0 * gk * tk2 * dk * sig + 2.0 * sig * sig * gk * gk * tk2 + tk2 * dk * dk
        s_td += tk * dk
        if mode != "stochastic":
            s_tb += tk * bs[k]
        pen = (0.0 if weak else s_td) + gamma0 * s_tb
        out[k + 1] = ((10.0 / 9.0) * (d0 + s_xi) + 4.0 * pen * pen) / (2.0 * gs[k + 1] * tk2)
    return out


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))


def _gamma_schedule(gamma0: float, q: float, r: float, L: float, k_max: int) -> Array:
    """gamma_0 = gamma, gamma_k = gamma/(k^q (1+log k)^r), clamped to 1/L and
    forced nonincreasing by a running minimum."""
    ks = np.arange(1, k_max + 1, dtype=float)
    g = np.empty(k_max + 1)
    g[0] = gamma0
    g[1:] = gamma0 / (ks**q * (1.0 + np.log(ks)) ** r)
    np.minimum(g, 1.0 / L, out=g)
    np.minimum.accumulate(g, out=g)
    return g


def _resolve_gamma(problem, gamma: Optional[float]) -> float:
    L = problem.smooth.lipschitz_L
    if gamma is None:
        return 1.0 / L
    if not 0.0 < gamma <= 1.0 / L:
        raise ConfigError(
            f"step size gamma={gamma} violates 0 < gamma <= 1/L = {1.0 / L:.6e}"
        )
    return float(gamma)


def _prox_step(problem, w: Array, gamma: float, delta: float, rng, weak: bool,
               direction: str, inner_cap: int):
    if weak:
        return inexact_prox_weak(problem, w, gamma, delta, rng)
    if problem.nonsmooth.exact_prox is not None:
        return inexact_prox_perturb(problem, w, gamma, delta, rng, direction)
    return inexact_prox_dual(problem, w, gamma, delta, inner_cap)


def _run_single(problem, x0: Array, ts: Array, gammas: Array, k_max: int,
                delta_sched: ErrorSchedule, b_sched: Optional[ErrorSchedule],
                noise_spec: Optional[StochasticOracleSpec], rng,
                weak: bool, direction: str, inner_cap: int,
                store_points: bool, meta: dict) -> SolverTrace:
    n = x0.shape[0]
    ref = problem.reference
    x_star = ref.x_star if ref is not None else None
    stochastic = noise_spec is not None
    sigma = noise_spec.sigma if stochastic else 0.0

    cols = {name: np.full(k_max + 1, np.nan) for name in TRACE_COLUMNS[1:]}
    cols["t_k"] = ts[: k_max + 1].copy()
    cols["gamma_k"] = gammas[: k_max + 1].copy()
    k_arr = np.arange(k_max + 1)

    x = x0.copy()
    y = x0.copy()
    v = x0.copy()  # v_0 = x_0
    if store_points:
        xs_hist = np.empty((k_max + 1, n)); xs_hist[0] = x
        ys_hist = np.empty((k_max + 1, n)); ys_hist[0] = y
        vs_hist = np.empty((k_max + 1, n)); vs_hist[0] = v

    if ref is not None:
        r_cur = problem.gap(x)
        cols["F_gap"][0] = r_cur
        cols["energy"][0] = energy(r_cur, v, x_star, 0.0, gammas[0])
        cols["x_dist_to_ref"][0] = float(np.linalg.norm(x - x_star))
        diff0 = x - x_star
        d0 = float(np.dot(diff0, diff0))
        guard_level = _GUARD_FACTOR * max(r_cur, 1.0)
        guard_count = 0

    s_xi = 0.0   # sum of the squared-error drift terms
    s_td = 0.0   # sum t_i delta_i
    s_tb = 0.0   # sum t_i ||b_i|| (deterministic runs only)
    gamma0 = gammas[0]

    for k in range(k_max):
        gk = gammas[k]
        dk = delta_sched.magnitude(k)
        g = problem.smooth.gradient(y)
        if stochastic:
            nz = noise_draw(noise_spec, n, rng)
            if nz is None:
                gv, b_norm = g, 0.0
            else:
                gv, b_norm = g + nz, float(np.linalg.norm(nz))
        else:
            if b_sched.magnitude(k) == 0.0:
                gv, b_norm = g, 0.0
            else:
                bvec = gradient_error(b_sched, k, n, rng)
                gv, b_norm = g + bvec, float(np.linalg.norm(bvec))
        w = y - gk * gv
        z, cert = _prox_step(problem, w, gk, dk, rng, weak, direction, inner_cap)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"non-finite iterate at k={k}", k=k)
        tk = ts[k]
        v = x + tk * (z - x)  # = t_k x_{k+1} - (t_k - 1) x_k, stable near convergence
        y = z + beta(tk, ts[k + 1]) * (z - x)
        x = z

        cols["delta_k"][k] = dk
        cols["b_norm"][k] = b_norm
        cols["cert_excess"][k] = cert.objective_excess_bound
        if store_points:
            xs_hist[k + 1] = x
            ys_hist[k + 1] = y
            vs_hist[k + 1] = v

        if ref is not None:
            r_cur = problem.gap(x)
            cols["F_gap"][k + 1] = r_cur
            cols["energy"][k + 1] = energy(r_cur, v, x_star, tk, gammas[k + 1])
            cols["x_dist_to_ref"][k + 1] = float(np.linalg.norm(x - x_star))
            tk2 = tk * tk
            s_xi += 2.0 * gk * tk2 * dk * sigma + 2.0 * sigma * sigma * gk * gk * tk2 + tk2 * dk * dk
            s_td += tk * dk
            if not stochastic:
                s_tb += tk * b_norm
            pen = (0.0 if weak else s_td) + gamma0 * s_tb
            cols["bound_rhs"][k + 1] = ((10.0 / 9.0) * (d0 + s_xi) + 4.0 * pen * pen) / (
                2.0 * gammas[k + 1] * tk2
            )
            if r_cur > guard_level:
                guard_count += 1
                if guard_count >= _GUARD_RUN:
                    raise DivergenceError(
                        f"F_gap stayed above {guard_level:.3e} for {_GUARD_RUN} iterations "
                        f"(k={k + 1})", k=k + 1,
                    )
            else:
                guard_count = 0

    trace = SolverTrace(k=k_arr, meta=meta, **cols)
    if store_points:
        trace.xs, trace.ys, trace.vs = xs_hist, ys_hist, vs_hist
    return trace


def run_inexact_fista(problem, config: DeterministicConfig, x0: Optional[Array] = None) -> SolverTrace:
    """Deterministic run; bit-reproducible from (config, seed)."""
    gamma = _resolve_gamma(problem, config.gamma)
    k_max = config.max_iters
    ts = ParamSequence(config.params).prefix(k_max)
    gammas = np.full(k_max + 1, gamma)
    rng = _rep_rng(config.seed, 0)
    meta = {"mode": "deterministic", "weak_inexactness": config.weak_inexactness,
            "gamma": gamma, "seed": config.seed}
    return _run_single(problem, _initial_point(problem, x0), ts, gammas, k_max,
                       config.delta, config.b, None, rng, config.weak_inexactness,
                       config.prox_direction, config.inner_cap, config.store_points, meta)


def run_baseline(problem, config: DeterministicConfig, x0: Optional[Array] = None) -> SolverTrace:
    """Non-accelerated proximal gradient: the same loop with t_k = 1."""
    from dataclasses import replace

    cfg = replace(config, params=ParamFamily("constant_one"))
    trace = run_inexact_fista(problem, cfg, x0)
    trace.meta["mode"] = "baseline"
    return trace


def run_stochastic_fista(problem, config: StochasticConfig, x0: Optional[Array] = None):
    """All replications plus the across-replication aggregate.

    Replication i draws from an independent stream derived from
    (master seed, i); with sigma = 0 and q = r = 0 a single replication
    reproduces the deterministic b = 0 run exactly.
    """
    gamma = _resolve_gamma(problem, config.gamma)
    k_max = config.max_iters
    ts = ParamSequence(config.params).prefix(k_max)
    gammas = _gamma_schedule(gamma, config.q, config.r, problem.smooth.lipschitz_L, k_max)
    traces = []
    for rep in range(config.replications):
        rng = _rep_rng(config.seed, rep)
        meta = {"mode": "stochastic", "replication": rep, "gamma": gamma,
                "q": config.q, "r": config.r, "sigma": config.noise.sigma,
                "seed": config.seed, "weak_inexactness": config.weak_inexactness}
        traces.append(
            _run_single(problem, _initial_point(problem, x0), ts, gammas, k_max,
                        config.delta, None, config.noise, rng, config.weak_inexactness,
                        config.prox_direction, config.inner_cap, config.store_points, meta)
        )
    gaps = np.vstack([t.F_gap for t in traces])
    mean = gaps.mean(axis=0)
    if len(traces) > 1:
        se = gaps.std(axis=0, ddof=1) / np.sqrt(len(traces))
    else:
        se = np.zeros_like(mean)
    aggregate = StochasticAggregate(
        k=np.arange(k_max + 1), mean_F_gap=mean, se_F_gap=se,
        bound_rhs=traces[0].bound_rhs.copy(), replications=len(traces),
    )
    return traces, aggregate


def _initial_point(problem, x0: Optional[Array]) -> Array:
    if x0 is None:
        x0 = np.zeros(problem.n)
        if problem.kind == "box_qp":
            x0 = np.clip(x0, problem.extras["lower"], problem.extras["upper"])
        return x0
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.n,):
        raise ConfigError(f"x0 has shape {x0.shape}, expected ({problem.n},)")
    return x0.copy()
