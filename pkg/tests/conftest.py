import numpy as np
import pytest

from ifista import (
    DeterministicConfig,
    ErrorSchedule,
    ensure_reference,
    make_lasso,
    run_inexact_fista,
)
from ifista.problems import from_config as problem_from_config


@pytest.fixture(scope="session")
def lasso50():
    prob = make_lasso(100, 50, seed=7)
    ensure_reference(prob, tol=1e-12)
    return prob


@pytest.fixture(scope="session")
def boxqp20():
    return problem_from_config({"kind": "box_qp", "n": 20, "seed": 12345, "spectrum": "spread"})


@pytest.fixture(scope="session")
def tv60():
    return problem_from_config({"kind": "tv1d", "m": 40, "n": 60, "seed": 2, "lam_tv": 0.5})


@pytest.fixture(scope="session")
def inexact_lasso_trace(lasso50):
    """Shared medium-length run with both error sources switched on."""
    cfg = DeterministicConfig(
        delta=ErrorSchedule(c=1e-2, p=2.5),
        b=ErrorSchedule(c=1e-2, p=2.5),
        max_iters=2000,
        seed=11,
        store_points=True,
    )
    return run_inexact_fista(lasso50, cfg)


def fd_gradient(f, x, h=1e-6):
    """Central finite differences, the independent gradient oracle."""
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g
