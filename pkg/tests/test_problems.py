import numpy as np
import pytest

from ifista import (
    make_box_qp,
    make_lasso,
    make_quadratic,
    make_tv1d,
    reference_optimum,
    soft_threshold,
)
from ifista.problems import from_config

from conftest import fd_gradient


class TestQuadratic:
    def test_scalar_values(self):
        prob = make_quadratic(1, c=[0.0])
        assert prob.smooth.value(np.array([3.0])) == pytest.approx(4.5, abs=1e-14)
        assert prob.smooth.gradient(np.array([3.0]))[0] == pytest.approx(3.0, abs=1e-14)

    def test_analytic_minimum(self):
        c = np.array([1.0, -2.0, 0.5])
        prob = make_quadratic(3, c=c)
        np.testing.assert_array_equal(prob.reference.x_star, c)
        assert prob.reference.F_star == 0.0
        assert prob.reference.provenance == "analytic"
        assert prob.F(c) == pytest.approx(0.0, abs=1e-12)

    def test_gradient_finite_differences(self):
        rng = np.random.default_rng(0)
        prob = make_quadratic(8, c=rng.standard_normal(8), curvature=rng.uniform(0.5, 2.0, 8))
        for _ in range(20):
            x = rng.standard_normal(8) * 3
            g = prob.smooth.gradient(x)
            g_fd = fd_gradient(prob.smooth.value, x)
            assert np.linalg.norm(g - g_fd) <= 1e-6 * max(1.0, np.linalg.norm(g))

    def test_rejects_bad_curvature(self):
        with pytest.raises(ValueError):
            make_quadratic(3, curvature=[1.0, 0.0, 2.0])


class TestLasso:
    def test_soft_threshold_values(self):
        assert soft_threshold(np.array([1.2]), 0.5)[0] == pytest.approx(0.7, abs=1e-15)
        assert soft_threshold(np.array([0.3]), 0.5)[0] == 0.0
        assert soft_threshold(np.array([-1.2]), 0.5)[0] == pytest.approx(-0.7, abs=1e-15)

    def test_prox_optimality_characterization(self, lasso50):
        # y - p in gamma * subdifferential of g at p
        lam = lasso50.extras["lam"]
        rng = np.random.default_rng(3)
        for _ in range(50):
            y = rng.standard_normal(lasso50.n) * rng.uniform(0.1, 4.0)
            gamma = rng.uniform(0.01, 2.0)
            p = lasso50.nonsmooth.exact_prox(y, gamma)
            on = p != 0
            np.testing.assert_allclose(y[on] - p[on], gamma * lam * np.sign(p[on]), atol=1e-12)
            assert np.all(np.abs(y[~on]) <= gamma * lam + 1e-12)

    def test_lipschitz_constant_matches_eigenvalue(self, lasso50):
        A = lasso50.extras["A"]
        lam_max = np.linalg.eigvalsh(A.T @ A).max()
        assert lasso50.smooth.lipschitz_L == pytest.approx(lam_max, rel=1e-8)
        # never below the true constant (step sizes 1/L stay feasible)
        assert lasso50.smooth.lipschitz_L >= lam_max * (1 - 1e-12)

    def test_gradient_finite_differences(self, lasso50):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.standard_normal(lasso50.n)
            g = lasso50.smooth.gradient(x)
            g_fd = fd_gradient(lasso50.smooth.value, x)
            assert np.linalg.norm(g - g_fd) <= 1e-6 * max(1.0, np.linalg.norm(g))

    def test_reference_is_local_min(self, lasso50):
        rng = np.random.default_rng(5)
        ref = lasso50.reference
        for _ in range(100):
            noise = rng.standard_normal(lasso50.n)
            x = ref.x_star + 1e-3 * noise / np.linalg.norm(noise)
            assert lasso50.F(x) >= ref.F_star - 1e-12

    def test_reference_determinism(self):
        a = reference_optimum(make_lasso(50, 25, seed=7), tol=1e-12)
        b = reference_optimum(make_lasso(50, 25, seed=7), tol=1e-12)
        assert a.F_star == b.F_star
        assert a.x_star.tobytes() == b.x_star.tobytes()

    def test_rejects_bad_lam(self):
        with pytest.raises(ValueError):
            make_lasso(10, 5, seed=0, lam=-1.0)


class TestBoxQP:
    def test_clip(self):
        prob = make_box_qp(1, c=[1.7], lower=0.0, upper=1.0)
        assert prob.nonsmooth.exact_prox(np.array([1.7]), 1.0)[0] == 1.0
        assert prob.reference.x_star[0] == 1.0

    def test_interior_optimum(self):
        c = np.array([0.2, 0.8])
        prob = make_box_qp(2, c=c, lower=0.0, upper=1.0)
        np.testing.assert_array_equal(prob.reference.x_star, c)
        assert prob.reference.F_star == 0.0

    def test_projected_optimum_closed_form(self):
        prob = make_box_qp(2, c=[2.0, -1.0], lower=0.0, upper=1.0)
        np.testing.assert_array_equal(prob.reference.x_star, [1.0, 0.0])
        assert prob.reference.F_star == pytest.approx(1.0, abs=1e-15)

    def test_indicator_values(self, boxqp20):
        lo, hi = boxqp20.extras["lower"], boxqp20.extras["upper"]
        assert boxqp20.nonsmooth.value(lo) == 0.0
        assert boxqp20.nonsmooth.value(hi + 0.1) == np.inf
        assert boxqp20.F(hi + 0.1) == np.inf

    def test_empty_box_rejected(self):
        with pytest.raises(ValueError):
            make_box_qp(2, c=[0.0, 0.0], lower=[0.0, 1.0], upper=[1.0, 0.5])

    def test_analytic_gap_matches_direct(self, boxqp20):
        rng = np.random.default_rng(8)
        lo, hi = boxqp20.extras["lower"], boxqp20.extras["upper"]
        for _ in range(50):
            x = rng.uniform(lo, hi)
            direct = boxqp20.F(x) - boxqp20.reference.F_star
            assert boxqp20.gap(x) == pytest.approx(direct, rel=1e-9, abs=1e-12)


class TestTV1D:
    def test_constant_input_is_fixed_point(self, tv60):
        y = np.full(60, 1.3)
        z, gap, iters = tv60.nonsmooth.dual_prox(y, 0.7, 1e-6)
        np.testing.assert_array_equal(z, y)
        assert gap == 0.0 and iters == 0

    def test_two_point_jump_shrinks_by_2_gamma_lam(self):
        prob = make_tv1d(5, 2, seed=1, lam_tv=0.5)
        gamma, lam = 0.7, prob.extras["lam_tv"]
        d = 0.3
        y = np.array([0.0, 2 * gamma * lam + d])
        z, gap, _ = prob.nonsmooth.dual_prox(y, gamma, 1e-9)
        np.testing.assert_allclose(z, [gamma * lam, gamma * lam + d], atol=1e-8)

    def test_gap_nonnegative(self, tv60):
        rng = np.random.default_rng(4)
        for _ in range(20):
            y = rng.standard_normal(60) * rng.uniform(0.2, 3.0)
            _, gap, _ = tv60.nonsmooth.dual_prox(y, rng.uniform(0.1, 1.5), 1e-4)
            assert gap >= 0.0

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            make_tv1d(5, 1, seed=0, lam_tv=0.5)
        with pytest.raises(ValueError):
            make_tv1d(5, 10, seed=0, lam_tv=0.0)

    def test_reference_through_dual_prox(self):
        prob = make_tv1d(25, 30, seed=4, lam_tv=0.3)
        ref = reference_optimum(prob, tol=1e-12, fista_iters=800)
        assert ref.provenance == "high_precision_run"
        assert ref.achieved_tol <= 1e-12
        rng = np.random.default_rng(0)
        for _ in range(50):
            probe = ref.x_star + 1e-4 * rng.standard_normal(30)
            assert prob.F(probe) >= ref.F_star - 1e-12

    def test_reference_cap_reported(self):
        from ifista.exceptions import ReferenceError

        prob = make_tv1d(10, 12, seed=1, lam_tv=0.4)
        with pytest.raises(ReferenceError):
            reference_optimum(prob, tol=1e-12, fista_iters=2, max_polish=0)


class TestSharedInvariants:
    def test_prox_nonexpansive(self, lasso50, boxqp20):
        rng = np.random.default_rng(9)
        quad = make_quadratic(12, c=rng.standard_normal(12))
        for prob in (lasso50, boxqp20, quad):
            for _ in range(500):
                y1 = rng.standard_normal(prob.n) * rng.uniform(0.1, 5.0)
                y2 = y1 + rng.standard_normal(prob.n) * rng.uniform(0.01, 2.0)
                gamma = rng.uniform(0.05, 2.0)
                p1 = prob.nonsmooth.exact_prox(y1, gamma)
                p2 = prob.nonsmooth.exact_prox(y2, gamma)
                assert np.linalg.norm(p1 - p2) <= np.linalg.norm(y1 - y2) + 1e-12

    def test_gradient_lipschitz_on_pairs(self, lasso50):
        rng = np.random.default_rng(12)
        quad = make_quadratic(10, c=rng.standard_normal(10), curvature=rng.uniform(0.2, 2.0, 10))
        for prob in (lasso50, quad):
            L = prob.smooth.lipschitz_L
            for _ in range(200):
                x = rng.standard_normal(prob.n) * rng.uniform(0.1, 4.0)
                y = x + rng.standard_normal(prob.n) * rng.uniform(0.01, 2.0)
                dg = np.linalg.norm(prob.smooth.gradient(x) - prob.smooth.gradient(y))
                assert dg <= L * np.linalg.norm(x - y) * (1 + 1e-10)

    def test_analytic_reference_is_exact(self):
        prob = make_box_qp(4, c=[2.0, -1.0, 0.3, 0.9], lower=0.0, upper=1.0,
                           curvature=[1.0, 0.5, 2.0, 1.5])
        assert abs(prob.F(prob.reference.x_star) - prob.reference.F_star) <= 1e-12
        # the analytic branch returns the stored solution without solving
        assert reference_optimum(prob) is prob.reference
        quad = make_quadratic(3, c=[1.0, 2.0, 3.0])
        assert quad.F(quad.reference.x_star) == 0.0

    def test_descent_lemma(self, lasso50):
        L = lasso50.smooth.lipschitz_L
        rng = np.random.default_rng(10)
        for _ in range(500):
            x = rng.standard_normal(lasso50.n) * rng.uniform(0.1, 3.0)
            step = rng.standard_normal(lasso50.n) * rng.uniform(0.01, 1.0)
            x_new = x + step
            lhs = lasso50.smooth.value(x_new)
            rhs = (lasso50.smooth.value(x) + float(lasso50.smooth.gradient(x) @ step)
                   + 0.5 * L * float(step @ step))
            assert lhs <= rhs + 1e-9 * max(1.0, abs(rhs))

    def test_from_config_round_trip(self):
        decl = {"kind": "lasso", "m": 30, "n": 15, "seed": 4}
        a, b = from_config(decl), from_config(decl)
        np.testing.assert_array_equal(a.extras["A"], b.extras["A"])
        assert a.extras["lam"] == b.extras["lam"]

    def test_from_config_unknown_kind(self):
        with pytest.raises(ValueError):
            from_config({"kind": "svm"})
