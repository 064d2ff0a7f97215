"""Certified inexact proximity outputs, gradient-error injection, stochastic oracles.

A point z is a delta-inexact prox of y (for step gamma and nonsmooth part g)
when

    gamma*g(z) + 0.5*||z - y||^2  <=  min_w { gamma*g(w) + 0.5*||w - y||^2 } + delta^2/2.

Every routine here returns, along with z, a certificate carrying a sound bound
on the objective excess and, when constructible, the split (delta1, delta2, e)
with delta1^2 + delta2^2 <= delta^2, ||e|| <= delta2 and (y + e - z)/gamma an
epsilon-subgradient of g at z with epsilon = delta1^2/(2*gamma).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

Array = np.ndarray

DIRECTION_RULES = ("seeded_random_unit", "fixed_unit")
NOISE_FAMILIES = ("sphere", "gaussian_iid")


@dataclass
class ProxCertificate:
    delta: float
    objective_excess_bound: float
    mode: str  # "exact" | "perturbation" | "dual_gap" | "weak"
    delta1: Optional[float] = None
    delta2: Optional[float] = None
    e: Optional[Array] = None

    @property
    def has_decomposition(self) -> bool:
        return self.delta1 is not None


@dataclass(frozen=True)
class ErrorSchedule:
    """Magnitude rule c/(k+1)^p (or an explicit list) plus a direction rule."""

    c: float = 0.0
    p: float = 0.0
    explicit: Optional[Sequence[float]] = None
    direction: str = "seeded_random_unit"

    def __post_init__(self):
        if self.c < 0 or self.p < 0:
            raise ValueError("schedule requires c >= 0 and p >= 0")
        if self.direction not in DIRECTION_RULES:
            raise ValueError(f"unknown direction rule {self.direction!r}")

    def magnitude(self, k: int) -> float:
        if self.explicit is not None:
            return float(self.explicit[k])
        if self.c == 0.0:
            return 0.0
        return self.c / (k + 1.0) ** self.p

    def to_config(self) -> dict:
        cfg = {"c": self.c, "p": self.p}
        if self.explicit is not None:
            cfg["explicit"] = [float(v) for v in self.explicit]
        if self.direction != "seeded_random_unit":
            cfg["direction"] = self.direction
        return cfg

    @staticmethod
    def from_config(cfg: Optional[dict]) -> "ErrorSchedule":
        if not cfg:
            return ErrorSchedule()
        direction = cfg.get("direction", "seeded_random_unit")
        if direction == "seeded":
            direction = "seeded_random_unit"
        return ErrorSchedule(
            c=float(cfg.get("c", 0.0)),
            p=float(cfg.get("p", 0.0)),
            explicit=cfg.get("explicit"),
            direction=direction,
        )


@dataclass(frozen=True)
class StochasticOracleSpec:
    """Unbiased gradient oracle with E||noise||^2 <= sigma^2.

    "sphere" draws noise uniformly on the sigma-sphere, so the second moment
    equals sigma^2 exactly and the variance hypothesis is sharp rather than
    slack.  "gaussian_iid" uses iid N(0, sigma^2/n) components.
    """

    sigma: float = 0.0
    family: str = "sphere"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")

    def to_config(self) -> dict:
        return {"family": self.family, "sigma": self.sigma}

    @staticmethod
    def from_config(cfg: Optional[dict]) -> "StochasticOracleSpec":
        if not cfg:
            return StochasticOracleSpec()
        return StochasticOracleSpec(sigma=float(cfg.get("sigma", 0.0)),
                                    family=cfg.get("family", "sphere"))


def gradient_error(schedule: ErrorSchedule, k: int, dim: int, rng: np.random.Generator) -> Array:
    """Error vector b_k with ||b_k|| equal to the scheduled magnitude."""
    mag = schedule.magnitude(k)
    if mag == 0.0:
        return np.zeros(dim)
    if schedule.direction == "fixed_unit":
        return np.full(dim, mag / np.sqrt(dim))
    u = rng.standard_normal(dim)
    return u * (mag / np.linalg.norm(u))


def noise_draw(spec: StochasticOracleSpec, n: int, rng: np.random.Generator) -> Optional[Array]:
    """One noise vector from the oracle's family, or None when sigma = 0."""
    if spec.sigma == 0.0:
        return None
    if spec.family == "sphere":
        u = rng.standard_normal(n)
        return u * (spec.sigma / np.linalg.norm(u))
    return rng.standard_normal(n) * (spec.sigma / np.sqrt(n))


def stochastic_grad(spec: StochasticOracleSpec, problem, x: Array, rng: np.random.Generator) -> Array:
    """One draw of the stochastic gradient oracle at x."""
    g = problem.smooth.gradient(x)
    nz = noise_draw(spec, g.shape[0], rng)
    return g if nz is None else g + nz


def _moreau_value(problem, z: Array, y: Array, gamma: float) -> float:
    d = z - y
    return gamma * problem.nonsmooth.value(z) + 0.5 * float(np.dot(d, d))


def _decomposition_from_prox(problem, y: Array, gamma: float, p: Array, z: Array):
    """Split the excess of z into (delta1, delta2, e) around the exact prox p.

    With u = (y - p)/gamma (an exact subgradient of g at p) and e = z - p, the
    Fenchel-Young gap of g at (z, u) gives delta1^2 = 2*gamma*gap, delta2 =
    ||z - p||, and delta1^2 + delta2^2 equals twice the objective excess.
    """
    e = z - p
    delta2 = float(np.linalg.norm(e))
    gap1 = gamma * (problem.nonsmooth.value(z) - problem.nonsmooth.value(p)) - float(np.dot(y - p, e))
    delta1 = float(np.sqrt(max(2.0 * gap1, 0.0)))
    return delta1, delta2, e


def inexact_prox_perturb(problem, y: Array, gamma: float, delta: float,
                         rng: np.random.Generator,
                         direction: str = "seeded_random_unit"):
    """delta-inexact prox by perturbing the exact prox output.

    Returns z = p + eta*u where p is the exact prox, u a unit direction and
    eta in [0, delta] the largest step (bisection, 60 iterations) keeping the
    objective excess below delta^2/2.  direction "fixed_unit" pushes along
    p - y, the adversarial choice that stresses the bounds most.
    """
    if problem.nonsmooth.exact_prox is None:
        raise ValueError("perturbation mode requires an exact prox")
    p = problem.nonsmooth.exact_prox(y, gamma)
    if delta == 0.0:
        cert = ProxCertificate(0.0, 0.0, "exact", 0.0, 0.0, np.zeros_like(p))
        return p, cert
    m = _moreau_value(problem, p, y, gamma)
    if direction == "fixed_unit":
        d = p - y
        nd = np.linalg.norm(d)
        if nd > 0:
            u = d / nd
        else:  # p == y: no adversarial direction, fall back to a basis vector
            u = np.zeros(p.shape[0])
            u[0] = 1.0
    else:
        u = rng.standard_normal(p.shape[0])
        u /= np.linalg.norm(u)
    cap = delta * delta / 2.0

    def excess(eta):
        return _moreau_value(problem, p + eta * u, y, gamma) - m

    if excess(delta) <= cap:
        eta = delta
    else:
        lo, hi = 0.0, delta
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if excess(mid) <= cap:
                lo = mid
            else:
                hi = mid
        eta = lo
    z = p + eta * u
    achieved = max(excess(eta), 0.0)
    delta1, delta2, e = _decomposition_from_prox(problem, y, gamma, p, z)
    return z, ProxCertificate(delta, achieved, "perturbation", delta1, delta2, e)


def inexact_prox_dual(problem, y: Array, gamma: float, delta: float, max_inner: int = 10**6):
    """delta-inexact prox certified by the duality gap of an inner dual ascent.

    Weak duality makes the gap a sound bound on the objective excess; the
    recovered primal point additionally satisfies the e = 0 split, with
    delta1^2 = 2*gap.  Raises InnerSolverCapError when the cap is hit.
    """
    if problem.nonsmooth.dual_prox is None:
        raise ValueError("dual mode requires a dual prox solver")
    z, gap, _ = problem.nonsmooth.dual_prox(y, gamma, delta, max_inner)
    delta1 = float(np.sqrt(max(2.0 * gap, 0.0)))
    cert = ProxCertificate(delta, max(gap, 0.0), "dual_gap", delta1, 0.0, np.zeros_like(z))
    return z, cert


def inexact_prox_weak(problem, y: Array, gamma: float, delta: float, rng: np.random.Generator):
    """delta-inexact prox in the error-free-drift model (e = 0).

    The output satisfies (y - z)/gamma in the eps-subdifferential of g at z
    with eps <= delta^2/(2*gamma), which implies the standard criterion with
    the same delta while keeping delta2 = 0 in the split.
    """
    ns = problem.nonsmooth
    if ns.weak_perturb is not None:
        z, eps = ns.weak_perturb(y, gamma, delta, rng)
        excess_bound = gamma * eps
        delta1 = float(np.sqrt(max(2.0 * gamma * eps, 0.0)))
        mode = "weak" if delta > 0.0 else "exact"
        return z, ProxCertificate(delta, excess_bound, mode, delta1, 0.0, np.zeros_like(z))
    if ns.dual_prox is not None:
        return inexact_prox_dual(problem, y, gamma, delta)
    raise ValueError("problem supports neither weak perturbation nor dual solving")
