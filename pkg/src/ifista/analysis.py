"""Numeric oracles for the sequence lemmas, rate fits, convergence diagnostics.

The two recursion lemmas bounded here drive the energy analysis of the
solvers:

  * a sequence with mu_k <= sigma_k + sum_{i<=k} lambda_i sqrt(mu_i)
    (sigma increasing) obeys
    max_{i<=k} sqrt(mu_i) <= S/2 + sqrt((S/2)^2 + sigma_k) <= S + sqrt(sigma_k)
    with S = sum_{i<=k} lambda_i;

  * a sequence with alpha_{k+1} <= alpha_k + lambda_k sqrt(alpha_{k+1}) + xi_k
    obeys max_{i<=k+1} sqrt(alpha_i) <= sum lambda + sqrt(alpha_0 + sum xi);
    squaring the tight form of that bound gives the provable closed form on
    alpha_{k+1} itself (`recurrence_envelope_bound`).  The widely used pair
    (10/9)(alpha_0 + sum xi) + (sum lambda)^2 is also provided
    (`recurrence_bound`) but is NOT attained-safe: see the counterexample in
    `recurrence_envelope_bound`.

Each bound ships with a brute-force extremal-sequence builder (the per-step
scalar quadratic solved at its larger root) so the closed forms can be
stress-tested at the worst case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

Array = np.ndarray

_RESCALE = 2.0**512  # exact power-of-two rescaling threshold for weighted sums


def bihari_bound(lambdas, sigmas):
    """Per-k bounds on max_{i<=k} sqrt(mu_i): (tight, loose) arrays.

    tight_k = S_k/2 + sqrt((S_k/2)^2 + sigma_k), loose_k = S_k + sqrt(sigma_k),
    S_k = sum_{i<=k} lambda_i; tight <= loose always.
    """
    lam = np.asarray(lambdas, dtype=float)
    sig = np.asarray(sigmas, dtype=float)
    if lam.shape != sig.shape:
        raise ValueError("lambdas and sigmas must have equal length")
    if np.any(lam < 0) or np.any(sig < 0):
        raise ValueError("entries must be nonnegative")
    if np.any(np.diff(sig) < 0):
        raise ValueError("sigmas must be increasing")
    half = 0.5 * np.cumsum(lam)
    tight = half + np.sqrt(half * half + sig)
    loose = 2.0 * half + np.sqrt(sig)
    return tight, loose


def bihari_extremal_sequence(lambdas, sigmas) -> Array:
    """Maximal mu with mu_k = sigma_k + sum_{i<=k} lambda_i sqrt(mu_i).

    Forward substitution; each step solves the scalar quadratic in sqrt(mu_k)
    at its larger root, so no admissible sequence can exceed the result.
    """
    lam = np.asarray(lambdas, dtype=float)
    sig = np.asarray(sigmas, dtype=float)
    mu = np.empty_like(lam)
    acc = 0.0  # sum_{i<k} lambda_i sqrt(mu_i)
    for k in range(lam.size):
        root = 0.5 * (lam[k] + np.sqrt(lam[k] * lam[k] + 4.0 * (sig[k] + acc)))
        mu[k] = root * root
        acc += lam[k] * root
    return mu


def recurrence_bound(alpha0: float, lambdas, xis):
    """Per-k bounds for alpha_{k+1} <= alpha_k + lambda_k sqrt(alpha_{k+1}) + xi_k.

    Returns (by_tenninths, max_sqrt): by_tenninths[k] bounds alpha_{k+1};
    max_sqrt[k] bounds max_{0<=i<=k+1} sqrt(alpha_i).
    """
    lam = np.asarray(lambdas, dtype=float)
    xi = np.asarray(xis, dtype=float)
    if lam.shape != xi.shape:
        raise ValueError("lambdas and xis must have equal length")
    if alpha0 < 0 or np.any(lam < 0) or np.any(xi < 0):
        raise ValueError("entries must be nonnegative")
    cl = np.cumsum(lam)
    cx = alpha0 + np.cumsum(xi)
    return (10.0 / 9.0) * cx + cl * cl, cl + np.sqrt(cx)


def recurrence_envelope_bound(alpha0: float, lambdas, xis) -> Array:
    """Provable per-k bound on alpha_{k+1} for the additive-error recursion.

    Squares the tight sqrt-sum bound applied to mu_k = alpha_{k+1} with
    sigma_k = alpha_0 + sum xi: the worst-case sequence attains it to
    rounding.  Note the frequently quoted constant pair (10/9, 1) in
    `recurrence_bound` lies BELOW the attainable worst case: for
    alpha_0 = 4, lambda_0 = 1/2, xi = 0 the extremal alpha_1 = 5.1327...
    exceeds (10/9)*4 + 1/4 = 4.6944...; with leading constant 10/9 the
    smallest valid coefficient on (sum lambda)^2 is 13/4, since
    alpha <= b^2 + ab + a^2 and C a^2 + D b^2 covers that quadratic iff
    4(C-1)(D-1) >= 1.
    """
    lam = np.asarray(lambdas, dtype=float)
    xi = np.asarray(xis, dtype=float)
    if lam.shape != xi.shape:
        raise ValueError("lambdas and xis must have equal length")
    if alpha0 < 0 or np.any(lam < 0) or np.any(xi < 0):
        raise ValueError("entries must be nonnegative")
    half = 0.5 * np.cumsum(lam)
    sig = alpha0 + np.cumsum(xi)
    root = half + np.sqrt(half * half + sig)
    return root * root


def recurrence_extremal_sequence(alpha0: float, lambdas, xis) -> Array:
    """Extremal alpha_0..alpha_K with equality at every recursion step."""
    lam = np.asarray(lambdas, dtype=float)
    xi = np.asarray(xis, dtype=float)
    alphas = np.empty(lam.size + 1)
    alphas[0] = alpha0
    a = float(alpha0)
    for k in range(lam.size):
        root = 0.5 * (lam[k] + np.sqrt(lam[k] * lam[k] + 4.0 * (a + xi[k])))
        a = root * root
        alphas[k + 1] = a
    return alphas


def cesaro_reconstruct(a0: float, lambdas, bs) -> Array:
    """Rebuild a_1..a_K from a_0 and b_k = a_{k+1} + lambda_k (a_{k+1} - a_k).

    Uses the weight recursion mu_{k+1} = mu_k (1 + lambda_k)/lambda_{k+1}
    (mu_0 = 1) and the weighted-average representation

        a_{k+1} = (mu_0 lambda_0 a_0 + sum_{i<=k} mu_i b_i)
                  / (mu_0 lambda_0 + sum_{i<=k} mu_i).

    Weights are rescaled by exact powers of two to avoid overflow.
    """
    lam = np.asarray(lambdas, dtype=float)
    b = np.asarray(bs, dtype=float)
    if lam.shape != b.shape:
        raise ValueError("lambdas and bs must have equal length")
    if np.any(lam <= 0):
        raise ValueError("lambdas must be positive")
    mu = 1.0
    num = mu * lam[0] * a0
    den = mu * lam[0]
    out = np.empty(lam.size)
    for k in range(lam.size):
        num += mu * b[k]
        den += mu
        out[k] = num / den
        if k + 1 < lam.size:
            mu = mu * (1.0 + lam[k]) / lam[k + 1]
            if den > _RESCALE or mu > _RESCALE:
                num /= _RESCALE
                den /= _RESCALE
                mu /= _RESCALE
    return out


@dataclass(frozen=True)
class DriftReport:
    is_quasi_monotone: bool
    tail_oscillation: float
    first_violation: Optional[int] = None


def summable_drift_converges(alphas, epsilons, tol: float = 1e-12) -> DriftReport:
    """Diagnose a sequence that decreases up to summable errors.

    Requires alpha_{k+1} - alpha_k <= eps_k (rejected otherwise, naming the
    first offending k).  Builds u_k = alpha_k + sum_{i>=k} eps_i over the
    finite horizon and asserts it is nonincreasing to `tol`; reports the
    oscillation of alpha over the last quarter of the horizon.
    """
    a = np.asarray(alphas, dtype=float)
    eps = np.asarray(epsilons, dtype=float)
    if eps.size < a.size - 1:
        raise ValueError("need at least len(alphas) - 1 epsilons")
    if np.any(eps < 0):
        raise ValueError("epsilons must be nonnegative")
    drift = np.diff(a) - eps[: a.size - 1]
    bad = np.nonzero(drift > tol * np.maximum(1.0, np.abs(a[:-1])))[0]
    if bad.size:
        k = int(bad[0])
        raise ValueError(
            f"not a summable-drift instance: alpha_{k + 1} - alpha_{k} = {a[k + 1] - a[k]:.3e} "
            f"> eps_{k} = {eps[k]:.3e}"
        )
    tail = np.concatenate([np.cumsum(eps[: a.size - 1][::-1])[::-1], [0.0]])
    u = a + tail
    du = np.diff(u)
    ok = bool(np.all(du <= tol * np.maximum(1.0, np.abs(u[:-1]))))
    first = None if ok else int(np.nonzero(du > tol * np.maximum(1.0, np.abs(u[:-1])))[0][0])
    quarter = a[-max(1, a.size // 4):]
    return DriftReport(ok, float(quarter.max() - quarter.min()), first)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float
    n_points: int
    clipped: bool


def rate_fit(gaps, k_min: int, k_max: int, per_decade: int = 32) -> RateFit:
    """Least-squares line on (log k, log gap_k) over a geometric subsample.

    `gaps` is indexed by iteration (a trace's F_gap column).  Nonpositive
    gaps are clipped at 1e-16 and flagged.  Fewer than 10 usable points is an
    error.
    """
    gaps = np.asarray(getattr(gaps, "F_gap", gaps), dtype=float)
    if not 1 <= k_min < k_max:
        raise ValueError("need k_max > k_min >= 1")
    if k_max >= gaps.size:
        raise ValueError(f"window end {k_max} exceeds trace length {gaps.size - 1}")
    decades = np.log10(k_max / k_min)
    ks = np.unique(np.round(np.geomspace(k_min, k_max, max(2, int(decades * per_decade)))).astype(int))
    vals = gaps[ks]
    usable = np.isfinite(vals)
    ks, vals = ks[usable], vals[usable]
    if ks.size < 10:
        raise ValueError(f"only {ks.size} usable points in [{k_min}, {k_max}]; need >= 10")
    clipped = bool(np.any(vals < 1e-16))
    vals = np.maximum(vals, 1e-16)
    design = np.vstack([np.log(ks), np.ones(ks.size)]).T
    coef, *_ = np.linalg.lstsq(design, np.log(vals), rcond=None)
    resid = np.log(vals) - design @ coef
    return RateFit(float(coef[0]), float(coef[1]),
                   float(np.sqrt(np.mean(resid * resid))), int(ks.size), clipped)


@dataclass(frozen=True)
class ScheduleVerdict:
    iterate_convergence_guaranteed: bool
    predicted_rate_exponent: float
    log_power: float
    deterministic_error_decay_ok: bool


def schedule_feasibility(alpha: float, p: float, q: float, r: float) -> ScheduleVerdict:
    """Exponent conditions for the step/error schedules, taken verbatim.

    With t_k ~ k^alpha, gamma_k = gamma/(k^q (1+log k)^r) and delta_k =
    O(1/k^p), almost-sure iterate convergence of the stochastic run is
    guaranteed when

        [ alpha + 1/2 < q < 2 alpha   or
          (alpha + 1/2 <= q < 2 alpha and r > 1/2) ]   and   p > alpha + 1,

    and the expected objective gap then decays like (1+log k)^r / k^(2a-q).
    The deterministic run needs error decay p > 1 + alpha.  Pure function of
    its inputs.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if p < 0 or q < 0 or r < 0:
        raise ValueError("p, q, r must be nonnegative")
    gamma_ok = (alpha + 0.5 < q < 2.0 * alpha) or (alpha + 0.5 <= q < 2.0 * alpha and r > 0.5)
    return ScheduleVerdict(
        iterate_convergence_guaranteed=bool(gamma_ok and p > alpha + 1.0),
        predicted_rate_exponent=2.0 * alpha - q,
        log_power=r,
        deterministic_error_decay_ok=bool(p > 1.0 + alpha),
    )


def iterate_convergence_diagnostic(xs: Array, horizons: Sequence[int]) -> Array:
    """sup_{K/2 <= k <= K} ||x_k - x_K|| for each horizon K.

    A shrinking value across doubled horizons is the numerical proxy for
    convergence of the iterate sequence itself.
    """
    xs = np.asarray(xs, dtype=float)
    out = np.empty(len(horizons))
    for i, K in enumerate(horizons):
        if K >= xs.shape[0]:
            raise ValueError(f"horizon {K} exceeds stored iterates {xs.shape[0] - 1}")
        window = xs[K // 2: K + 1] - xs[K]
        out[i] = float(np.max(np.linalg.norm(window, axis=1)))
    return out


def random_bihari_instance(rng: np.random.Generator):
    """Seeded (lambdas, sigmas) with sigma increasing and all entries >= 0."""
    m = int(rng.integers(5, 60))
    lam = rng.uniform(0.0, 2.0, m) * (rng.random(m) < 0.8)
    sig0 = rng.uniform(0.0, 5.0)
    sig = sig0 + np.cumsum(rng.uniform(0.0, 1.0, m) * (rng.random(m) < 0.7))
    return lam, sig


def random_recurrence_instance(rng: np.random.Generator):
    """Seeded (alpha0, lambdas, xis) with all entries >= 0."""
    m = int(rng.integers(5, 60))
    alpha0 = rng.uniform(0.0, 5.0)
    lam = rng.uniform(0.0, 1.5, m) * (rng.random(m) < 0.8)
    xi = rng.uniform(0.0, 1.0, m) * (rng.random(m) < 0.7)
    return alpha0, lam, xi


def random_cesaro_instance(rng: np.random.Generator):
    """Seeded (a0, lambdas, a_full) for round-trip checks; lambdas > 0."""
    m = int(rng.integers(10, 300))
    a = rng.uniform(-3.0, 3.0, m + 1)
    lam = rng.uniform(0.5, 4.0, m)
    return a[0], lam, a
