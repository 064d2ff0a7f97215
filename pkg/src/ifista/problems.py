"""Composite test problems F = f + g with oracles and trusted optima.

Every problem bundles a smooth part f (value, gradient, Lipschitz constant of
the gradient) and a nonsmooth part g (value, exact proximity operator when one
is available in closed form, and a gap-certified dual solver otherwise).
Problems are immutable after construction; oracles are pure functions, safe
for concurrent evaluation.  Matrices are regenerated from the seed recorded in
the declaration, never serialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import InnerSolverCapError, ReferenceError
from .params import ParamSequence, ParamFamily, beta

Array = np.ndarray


@dataclass
class SmoothOracle:
    dimension: int
    value: Callable[[Array], float]
    gradient: Callable[[Array], Array]
    lipschitz_L: float


@dataclass
class NonsmoothPart:
    value: Callable[[Array], float]
    # exact_prox(y, gamma) -> argmin_z gamma*g(z) + 0.5*||z - y||^2
    exact_prox: Optional[Callable[[Array, float], Array]] = None
    # dual_prox(y, gamma, delta, max_inner) -> (z, gap, iterations); the
    # duality gap certifies the objective excess of z (weak duality).
    dual_prox: Optional[Callable[..., tuple]] = None
    # weak_perturb(w, gamma, delta, rng) -> (z, eps) with (w - z)/gamma an
    # eps-subgradient of g at z (the error-free-drift inexactness model).
    weak_perturb: Optional[Callable[..., tuple]] = None


@dataclass
class ReferenceSolution:
    x_star: Array
    F_star: float
    provenance: str  # "analytic" | "high_precision_run"
    achieved_tol: float = 0.0


@dataclass
class CompositeProblem:
    kind: str
    smooth: SmoothOracle
    nonsmooth: NonsmoothPart
    reference: Optional[ReferenceSolution] = None
    # stable_gap(x) evaluates F(x) - F_* without catastrophic cancellation;
    # only available for problems with an analytic optimum.
    stable_gap: Optional[Callable[[Array], float]] = None
    extras: dict = field(default_factory=dict)
    decl: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.smooth.dimension

    def F(self, x: Array) -> float:
        return self.smooth.value(x) + self.nonsmooth.value(x)

    def gap(self, x: Array) -> float:
        """F(x) - F_*; prefers the cancellation-free form when available."""
        if self.stable_gap is not None:
            return self.stable_gap(x)
        if self.reference is None:
            raise ValueError("problem has no reference solution; call ensure_reference first")
        return self.F(x) - self.reference.F_star


def soft_threshold(v: Array, thr: float) -> Array:
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


def _power_iteration(matvec, n: int, seed: int, tol: float = 1e-10, max_iters: int = 10**4) -> float:
    """Largest eigenvalue of a symmetric PSD operator, relative tolerance `tol`.

    The estimate converges from below, so it is inflated by 1e-9 relatively to
    keep step sizes 1/L on the safe side of the true constant.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    lam = 0.0
    for _ in range(max_iters):
        w = matvec(v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            raise ValueError("operator is numerically zero")
        if abs(lam - lam_prev) <= tol * lam:
            break
        v = w / lam
        lam_prev = lam
    return lam * (1.0 + 1e-9)


def _unit(rng: np.random.Generator, n: int) -> Array:
    u = rng.standard_normal(n)
    return u / np.linalg.norm(u)


def make_quadratic(n: int, c=None, curvature=None) -> CompositeProblem:
    """Smooth diagonal quadratic f(x) = 0.5*||A(x - c)||^2 with g = 0.

    A = diag(curvature) (identity when omitted), L = max curvature^2,
    minimizer x_* = c with F_* = 0 (analytic).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    d = np.ones(n) if curvature is None else np.asarray(curvature, dtype=float)
    if np.any(d <= 0):
        raise ValueError("curvature entries must be positive")
    d2 = d * d
    L = float(d2.max())

    def f(x):
        a = d * (x - c)
        return 0.5 * float(np.dot(a, a))

    def grad(x):
        return d2 * (x - c)

    def gap(x):
        a = d * (x - c)
        return 0.5 * float(np.dot(a, a))

    def weak_perturb(w, gamma, delta, rng):
        # for g = 0 the eps-subdifferential at any z is {0}, forcing z = w
        return w.copy(), 0.0

    nonsmooth = NonsmoothPart(
        value=lambda x: 0.0,
        exact_prox=lambda y, gamma: y.copy(),
        weak_perturb=weak_perturb,
    )
    ref = ReferenceSolution(x_star=c.copy(), F_star=0.0, provenance="analytic")
    return CompositeProblem(
        kind="quadratic",
        smooth=SmoothOracle(n, f, grad, L),
        nonsmooth=nonsmooth,
        reference=ref,
        stable_gap=gap,
        extras={"c": c, "curvature": d},
    )


def make_box_qp(n: int, c, lower, upper, curvature=None) -> CompositeProblem:
    """f(x) = 0.5*||A(x - c)||^2 with g the indicator of the box [lower, upper].

    The proximity operator is componentwise clipping; with diagonal A the
    minimizer is x_* = clip(c) and F_* is available in closed form.
    """
    c = np.asarray(c, dtype=float)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (n,)).copy()
    if np.any(lo > hi):
        raise ValueError("empty box: lower > upper somewhere")
    d = np.ones(n) if curvature is None else np.asarray(curvature, dtype=float)
    if np.any(d <= 0):
        raise ValueError("curvature entries must be positive")
    d2 = d * d
    L = float(d2.max())
    x_star = np.clip(c, lo, hi)
    a_star = d * (x_star - c)
    F_star = 0.5 * float(np.dot(a_star, a_star))

    def f(x):
        a = d * (x - c)
        return 0.5 * float(np.dot(a, a))

    def grad(x):
        return d2 * (x - c)

    def g_value(x):
        return 0.0 if np.all((x >= lo) & (x <= hi)) else np.inf

    def prox(y, gamma):
        return np.clip(y, lo, hi)

    def gap(x):
        # 0.5*(||a||^2 - ||a*||^2) evaluated as an inner product of the
        # difference, so the gap stays accurate down to machine level
        a = d * (x - c)
        return 0.5 * float(np.dot(a - a_star, a + a_star)) + g_value(x)

    def support_box(s):
        return float(np.sum(np.maximum(s * hi, s * lo)))

    def weak_perturb(w, gamma, delta, rng):
        p = np.clip(w, lo, hi)
        if delta == 0.0:
            return p, 0.0
        cap = delta * delta / (2.0 * gamma)
        u = _unit(rng, n)

        def probe(eta):
            z = np.clip(p + eta * u, lo, hi)
            s = (w - z) / gamma
            return z, support_box(s) - float(np.dot(s, z))

        z_hi, eps_hi = probe(delta)
        if eps_hi <= cap:
            return z_hi, max(eps_hi, 0.0)
        lo_eta, hi_eta = 0.0, delta
        z_best, eps_best = p, 0.0
        for _ in range(60):
            mid = 0.5 * (lo_eta + hi_eta)
            z_mid, eps_mid = probe(mid)
            if eps_mid <= cap:
                lo_eta, z_best, eps_best = mid, z_mid, eps_mid
            else:
                hi_eta = mid
        return z_best, max(eps_best, 0.0)

    nonsmooth = NonsmoothPart(value=g_value, exact_prox=prox, weak_perturb=weak_perturb)
    ref = ReferenceSolution(x_star=x_star, F_star=F_star, provenance="analytic")
    return CompositeProblem(
        kind="box_qp",
        smooth=SmoothOracle(n, f, grad, L),
        nonsmooth=nonsmooth,
        reference=ref,
        stable_gap=gap,
        extras={"c": c, "lower": lo, "upper": hi, "curvature": d},
    )


def _least_squares_data(m: int, n: int, seed: int, n_active: Optional[int] = None):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    if not np.any(A):
        raise ValueError("seed produced a degenerate zero design matrix")
    k = min(n, max(1, n // 5 if n_active is None else n_active))
    x_true = np.zeros(n)
    x_true[rng.choice(n, k, replace=False)] = rng.standard_normal(k)
    b = A @ x_true + 0.05 * rng.standard_normal(m)
    return A, b


def make_lasso(m: int, n: int, seed: int, lam: Optional[float] = None, lam_rel: float = 0.1) -> CompositeProblem:
    """f(x) = 0.5*||Ax - b||^2 with g = lam*||x||_1.

    A and b are generated from `seed`; lam defaults to lam_rel * ||A^T b||_inf.
    L is the largest eigenvalue of A^T A, computed by power iteration.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    A, b = _least_squares_data(m, n, seed)
    if lam is None:
        lam = lam_rel * float(np.max(np.abs(A.T @ b)))
    if lam <= 0:
        raise ValueError("lam must be positive")
    L = _power_iteration(lambda v: A.T @ (A @ v), n, seed=seed + 10_000)

    def f(x):
        rsd = A @ x - b
        return 0.5 * float(np.dot(rsd, rsd))

    def grad(x):
        return A.T @ (A @ x - b)

    def g_value(x):
        return lam * float(np.sum(np.abs(x)))

    def prox(y, gamma):
        return soft_threshold(y, gamma * lam)

    def weak_perturb(w, gamma, delta, rng):
        # perturb the dual point s = (w - z)/gamma inside ||s||_inf <= lam and
        # keep the Fenchel-Young gap of g at (z, s) below delta^2 / (2 gamma)
        p = soft_threshold(w, gamma * lam)
        if delta == 0.0:
            return p, 0.0
        s_star = (w - p) / gamma
        cap = delta * delta / (2.0 * gamma)
        u = _unit(rng, n)

        def probe(eta):
            s = np.clip(s_star + eta * u, -lam, lam)
            z = w - gamma * s
            return z, lam * float(np.sum(np.abs(z))) - float(np.dot(s, z))

        eta_hi = 2.0 * lam  # clamping saturates beyond this radius
        z_hi, eps_hi = probe(eta_hi)
        if eps_hi <= cap:
            return z_hi, max(eps_hi, 0.0)
        lo_eta, hi_eta = 0.0, eta_hi
        z_best, eps_best = p, 0.0
        for _ in range(60):
            mid = 0.5 * (lo_eta + hi_eta)
            z_mid, eps_mid = probe(mid)
            if eps_mid <= cap:
                lo_eta, z_best, eps_best = mid, z_mid, eps_mid
            else:
                hi_eta = mid
        return z_best, max(eps_best, 0.0)

    nonsmooth = NonsmoothPart(value=g_value, exact_prox=prox, weak_perturb=weak_perturb)
    return CompositeProblem(
        kind="lasso",
        smooth=SmoothOracle(n, f, grad, L),
        nonsmooth=nonsmooth,
        extras={"A": A, "b": b, "lam": lam},
    )


def make_tv1d(m: int, n: int, seed: int, lam_tv: float) -> CompositeProblem:
    """f(x) = 0.5*||Ax - b||^2 with g = lam_tv * ||Dx||_1, D the 1-D difference.

    g has no closed-form prox; a projected-gradient ascent on the dual of the
    prox subproblem supplies delta-certified outputs via the duality gap.
    """
    if n < 2:
        raise ValueError("n must be >= 2 for the difference operator")
    if lam_tv <= 0:
        raise ValueError("lam_tv must be positive")
    A, b = _least_squares_data(m, n, seed)
    L = _power_iteration(lambda v: A.T @ (A @ v), n, seed=seed + 10_000)

    def diff(v):
        return v[1:] - v[:-1]

    def diff_t(u):
        out = np.zeros(n)
        out[:-1] -= u
        out[1:] += u
        return out

    def f(x):
        rsd = A @ x - b
        return 0.5 * float(np.dot(rsd, rsd))

    def grad(x):
        return A.T @ (A @ x - b)

    def g_value(x):
        return lam_tv * float(np.sum(np.abs(diff(x))))

    def dual_prox(y, gamma, delta, max_inner=10**6):
        """Solve prox of gamma*g at y until the duality gap is <= delta^2/2.

        Maximizes <u, Dy> - 0.5*||D^T u||^2 over ||u||_inf <= gamma*lam_tv by
        projected gradient ascent with step 1/||D||^2 (||D||^2 <= 4).
        Returns (z, gap, iterations) with z = y - D^T u.
        """
        thr = delta * delta / 2.0
        radius = gamma * lam_tv
        u = np.zeros(n - 1)
        step = 0.25
        gap_val = np.inf
        for it in range(max_inner + 1):
            z = y - diff_t(u)
            dz = diff(z)
            primal = radius * float(np.sum(np.abs(dz))) + 0.5 * float(np.dot(z - y, z - y))
            dual = float(np.dot(u, diff(y))) - 0.5 * float(np.dot(diff_t(u), diff_t(u)))
            gap_val = primal - dual
            if gap_val <= thr:
                return z, gap_val, it
            u = np.clip(u + step * dz, -radius, radius)
        raise InnerSolverCapError(
            f"dual prox cap {max_inner} reached: gap {gap_val:.3e} > {thr:.3e}",
            best_gap=gap_val,
            iterations=max_inner,
        )

    nonsmooth = NonsmoothPart(value=g_value, dual_prox=dual_prox)
    return CompositeProblem(
        kind="tv1d",
        smooth=SmoothOracle(n, f, grad, L),
        nonsmooth=nonsmooth,
        extras={"A": A, "b": b, "lam_tv": lam_tv},
    )


def _reference_prox(problem: CompositeProblem, y: Array, gamma: float, delta: float) -> Array:
    ns = problem.nonsmooth
    if ns.exact_prox is not None:
        return ns.exact_prox(y, gamma)
    z, _, _ = ns.dual_prox(y, gamma, delta)
    return z


def reference_optimum(problem: CompositeProblem, tol: float = 1e-12,
                      fista_iters: int = 20_000, max_polish: int = 10**6) -> ReferenceSolution:
    """Trusted optimum of the composite objective.

    Analytic problems return their closed-form solution without running.
    Otherwise: accelerated proximal-gradient warmup (critical parameters,
    `fista_iters` iterations) followed by proximal-gradient polish until two
    successive objective values differ by at most tol*max(1, |F|).
    Deterministic: repeated calls on the same problem are bit-identical.
    """
    if problem.reference is not None and problem.reference.provenance == "analytic":
        return problem.reference
    if problem.nonsmooth.exact_prox is None and problem.nonsmooth.dual_prox is None:
        raise ValueError("problem has neither an exact prox nor a dual prox solver")
    gamma = 1.0 / problem.smooth.lipschitz_L
    delta_inner = 1e-7  # duality-gap target 5e-15 per inner solve
    n = problem.n
    seq = ParamSequence(ParamFamily("critical"))
    ts = seq.prefix(fista_iters + 1)
    x = np.zeros(n)
    y = x.copy()
    for k in range(fista_iters):
        xn = _reference_prox(problem, y - gamma * problem.smooth.gradient(y), gamma, delta_inner)
        y = xn + beta(ts[k], ts[k + 1]) * (xn - x)
        x = xn
    F_prev = problem.F(x)
    achieved = np.inf
    for it in range(max_polish):
        x = _reference_prox(problem, x - gamma * problem.smooth.gradient(x), gamma, delta_inner)
        F_cur = problem.F(x)
        achieved = abs(F_prev - F_cur) / max(1.0, abs(F_cur))
        if achieved <= tol:
            break
        F_prev = F_cur
    else:
        raise ReferenceError(
            f"reference polish did not reach tol {tol:.1e} within {max_polish} iterations "
            f"(achieved {achieved:.3e})"
        )
    return ReferenceSolution(x_star=x, F_star=problem.F(x), provenance="high_precision_run",
                             achieved_tol=achieved)


def ensure_reference(problem: CompositeProblem, tol: float = 1e-12) -> CompositeProblem:
    """Attach a reference solution if the problem does not carry one yet."""
    if problem.reference is None:
        problem.reference = reference_optimum(problem, tol=tol)
    return problem


def _spectrum(n: int, spec) -> Optional[Array]:
    if spec is None or spec == "ones":
        return None
    if spec == "geometric":
        # eigenvalues of the Hessian span 1 .. 2^-(n-1)
        return 2.0 ** (-0.5 * np.arange(n, dtype=float))
    if spec == "spread":
        return np.exp(np.linspace(np.log(0.5), 0.0, n))
    return np.asarray(spec, dtype=float)


def from_config(decl: dict) -> CompositeProblem:
    """Build a problem from its declaration (kind + parameters + seed)."""
    kind = decl.get("kind")
    if kind == "quadratic":
        n = int(decl["n"])
        rng = np.random.default_rng(int(decl.get("seed", 0)))
        c = rng.uniform(-2.0, 2.0, n) if decl.get("c") is None else np.asarray(decl["c"], float)
        prob = make_quadratic(n, c=c, curvature=_spectrum(n, decl.get("spectrum")))
    elif kind == "box_qp":
        n = int(decl["n"])
        rng = np.random.default_rng(int(decl.get("seed", 0)))
        c = rng.uniform(-1.5, 2.0, n) if decl.get("c") is None else np.asarray(decl["c"], float)
        lo = decl.get("lower", 0.0)
        hi = decl.get("upper", 1.0)
        prob = make_box_qp(n, c=c, lower=lo, upper=hi, curvature=_spectrum(n, decl.get("spectrum")))
    elif kind == "lasso":
        prob = make_lasso(int(decl["m"]), int(decl["n"]), int(decl.get("seed", 0)),
                          lam=decl.get("lam"), lam_rel=float(decl.get("lam_rel", 0.1)))
    elif kind == "tv1d":
        prob = make_tv1d(int(decl["m"]), int(decl["n"]), int(decl.get("seed", 0)),
                         lam_tv=float(decl.get("lam_tv", 0.5)))
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    prob.decl = dict(decl)
    return prob
