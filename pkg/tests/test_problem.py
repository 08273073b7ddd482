import numpy as np
import pytest

from proxqn._oracles import (
    directional_derivative,
    prox_scalar_reference,
)
from proxqn.problem import (
    l1_value,
    logistic_gradient,
    logistic_value,
    logistic_value_and_gradient,
    min_norm_subgradient,
    prox_l1_scaled_identity,
    soft_threshold,
)

from conftest import make_dataset

LOG2 = 0.6931471805599453
# log(1 + e^-1) and log(1 + e^1), evaluated at 30 decimal digits
LOG1P_EXP_NEG1 = 0.31326168751822286
LOG1P_EXP_POS1 = 1.3132616875182228


class TestLogisticValue:
    def test_zero_weights_give_log_two(self):
        ds = make_dataset([[(0, 0.5)], [(1, 2.0)], [(0, -1.0), (1, 3.0)]],
                          [1, -1, 1])
        assert logistic_value(ds, np.zeros(2)) == pytest.approx(LOG2, abs=1e-15)

    def test_single_point_positive_label(self):
        ds = make_dataset([[(0, 1.0)]], [1])
        assert logistic_value(ds, np.array([1.0])) == pytest.approx(
            LOG1P_EXP_NEG1, abs=1e-15)

    def test_single_point_negative_label(self):
        ds = make_dataset([[(0, 1.0)]], [-1])
        assert logistic_value(ds, np.array([1.0])) == pytest.approx(
            LOG1P_EXP_POS1, abs=1e-15)

    def test_stable_for_huge_margins(self):
        ds = make_dataset([[(0, 1.0)]], [-1])
        with np.errstate(over="raise", invalid="raise"):
            val = logistic_value(ds, np.array([5000.0]))
        assert val == pytest.approx(5000.0)

    def test_dimension_mismatch(self):
        ds = make_dataset([[(0, 1.0)]], [1])
        with pytest.raises(ValueError):
            logistic_value(ds, np.zeros(3))


class TestLogisticGradient:
    def test_single_point_at_zero(self):
        ds = make_dataset([[(0, 1.0)]], [1])
        assert logistic_gradient(ds, np.zeros(1)) == pytest.approx([-0.5])

    def test_balanced_labels_cancel(self):
        ds = make_dataset([[(0, 1.0)], [(0, 1.0)]], [1, -1])
        np.testing.assert_allclose(logistic_gradient(ds, np.zeros(1)), [0.0])

    def test_scaled_negative_point(self):
        # -(1/1) * (-1) * sigmoid(0) * 2 = +1
        ds = make_dataset([[(0, 2.0)]], [-1])
        assert logistic_gradient(ds, np.zeros(1)) == pytest.approx([1.0])

    def test_matches_central_differences(self, small_logistic):
        rng = np.random.default_rng(0)
        prob = small_logistic
        worst = 0.0
        for _ in range(5):
            w = rng.standard_normal(prob.n)
            grad = prob.f_grad(w)
            for _ in range(20):
                d = rng.standard_normal(prob.n)
                d /= np.linalg.norm(d)
                fd = directional_derivative(prob.f_value, w, d, h=1e-6)
                worst = max(worst, abs(fd - grad @ d) / max(1.0, abs(fd)))
        assert worst <= 1e-6

    def test_value_and_gradient_consistent(self, small_logistic):
        w = np.linspace(-1, 1, small_logistic.n)
        val, grad = small_logistic.value_and_grad(w)
        assert val == pytest.approx(small_logistic.f_value(w), rel=1e-15)
        np.testing.assert_allclose(grad, small_logistic.f_grad(w), rtol=1e-15)


class TestL1AndProx:
    def test_l1_values(self):
        assert l1_value(np.zeros(3), 1.0) == 0.0
        assert l1_value(np.array([1.0, -2.0]), 0.5) == pytest.approx(1.5)
        assert l1_value(np.array([4.0, -7.0]), 0.0) == 0.0

    def test_soft_threshold_cases(self):
        assert soft_threshold(0.0, 1.0) == 0.0
        assert soft_threshold(3.0, 1.0) == pytest.approx(2.0)
        assert soft_threshold(-0.4, 1.0) == 0.0

    def test_soft_threshold_rejects_negative_tau(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.1)

    def test_soft_threshold_matches_golden_section(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(1000):
            v = float(rng.standard_normal() * 3)
            tau = float(abs(rng.standard_normal()))
            worst = max(worst, abs(soft_threshold(v, tau)
                                   - prox_scalar_reference(v, tau)))
        assert worst <= 1e-8

    def test_prox_identity_when_lambda_zero(self):
        v = np.array([0.3, -2.0, 5.0])
        np.testing.assert_array_equal(prox_l1_scaled_identity(v, 2.0, 0.0), v)

    def test_prox_shrinks_componentwise(self):
        np.testing.assert_allclose(
            prox_l1_scaled_identity(np.array([2.0, -2.0]), 1.0, 1.0),
            [1.0, -1.0])

    def test_prox_dead_zone_via_golden_section(self):
        got = prox_l1_scaled_identity(np.array([0.3]), 2.0, 0.5)[0]
        # reference minimizes 0.5(u-v)^2 + (mu*lam)|u| directly
        ref = prox_scalar_reference(0.3, 2.0 * 0.5)
        assert got == pytest.approx(ref, abs=1e-8)
        assert got == 0.0

    def test_prox_requires_positive_mu(self):
        with pytest.raises(ValueError):
            prox_l1_scaled_identity(np.ones(2), 0.0, 1.0)

    def test_prox_perturbation_never_improves(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n = 6
            v = rng.standard_normal(n) * 2
            mu = float(abs(rng.standard_normal()) + 0.1)
            lam = float(abs(rng.standard_normal()))
            u = prox_l1_scaled_identity(v, mu, lam)

            def objective(w):
                return l1_value(w, lam) + float((w - v) @ (w - v)) / (2 * mu)

            base = objective(u)
            for j in range(n):
                for eps in (1e-4, -1e-4):
                    w = u.copy()
                    w[j] += eps
                    assert objective(w) >= base - 1e-15


class TestMinNormSubgradient:
    def test_inside_dead_zone(self):
        out = min_norm_subgradient(np.array([0.3]), np.array([0.0]), 1.0)
        assert out[0] == 0.0

    def test_outside_dead_zone_matches_grid_search(self):
        # minimize |grad + lam*s| over s in [-1, 1]
        grad, lam = 1.5, 1.0
        grid = np.linspace(-1.0, 1.0, 200001)
        ref = float(np.min(np.abs(grad + lam * grid)))
        out = min_norm_subgradient(np.array([grad]), np.array([0.0]), lam)
        assert abs(out[0]) == pytest.approx(ref, abs=1e-5)
        assert out[0] == pytest.approx(0.5)

    def test_unique_subgradient_off_zero(self):
        out = min_norm_subgradient(np.array([0.3]), np.array([2.0]), 1.0)
        assert out[0] == pytest.approx(1.3)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            min_norm_subgradient(np.zeros(2), np.zeros(3), 1.0)

    def test_zero_iff_prox_fixed_point(self, small_quadratic):
        prob = small_quadratic
        mu = 1.0
        # polish to high accuracy with a fixed-step proximal gradient
        x = np.zeros(prob.n)
        step = 1.0 / prob.lipschitz
        for _ in range(5000):
            x = prox_l1_scaled_identity(x - step * prob.f_grad(x), step, prob.lam)
        grad = prob.f_grad(x)
        norm = np.max(np.abs(min_norm_subgradient(grad, x, prob.lam)))
        resid = np.linalg.norm(
            x - prox_l1_scaled_identity(x - mu * grad, mu, prob.lam))
        assert norm <= 1e-9 and resid <= 1e-10

        x_bad = x + 0.01
        grad_bad = prob.f_grad(x_bad)
        norm_bad = np.max(np.abs(min_norm_subgradient(grad_bad, x_bad, prob.lam)))
        resid_bad = np.linalg.norm(
            x_bad - prox_l1_scaled_identity(x_bad - mu * grad_bad, mu, prob.lam))
        assert norm_bad > 1e-10 and resid_bad > 1e-10


class TestConvexity:
    def test_midpoint_inequality(self, small_logistic, small_quadratic):
        rng = np.random.default_rng(3)
        for prob in (small_logistic, small_quadratic):
            for _ in range(20):
                x = rng.standard_normal(prob.n)
                y = rng.standard_normal(prob.n)
                mid = prob.f_value(0.5 * x + 0.5 * y)
                assert mid <= 0.5 * prob.f_value(x) + 0.5 * prob.f_value(y) + 1e-12

    def test_gradient_monotonicity(self, small_quadratic):
        rng = np.random.default_rng(4)
        prob = small_quadratic
        for _ in range(10):
            x = rng.standard_normal(prob.n)
            y = rng.standard_normal(prob.n)
            gap = (prob.f_grad(x) - prob.f_grad(y)) @ (x - y)
            assert gap >= prob.gamma * np.linalg.norm(x - y) ** 2 - 1e-10
