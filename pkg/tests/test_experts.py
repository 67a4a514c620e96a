"""Windowed ridge fitting and the frozen linear experts."""

import numpy as np
import pytest

from driftcast.experts import LinearExpert, init_expert, ridge_fit


class TestRidgeFit:
    def test_one_dimensional_worked_example(self):
        # (sigma + x'x) a = x'y with x = (1, 2), y = (1, 2): (1 + 5) a = 5
        a = ridge_fit([[1.0], [2.0]], [1.0, 2.0], sigma=1.0)
        assert a[0] == pytest.approx(5.0 / 6.0, abs=1e-14)

    def test_zero_responses_give_zero_coefficients(self, rng):
        X = rng.normal(size=(8, 3))
        a = ridge_fit(X, np.zeros(8), sigma=0.5)
        np.testing.assert_allclose(a, 0.0, atol=1e-14)

    def test_shrinkage_with_orthonormal_rows(self):
        # X'X = I, so a = X'y / (sigma + 1) exactly: monotone shrinkage
        X = np.eye(2)
        y = np.array([2.0, -1.0])
        norms = []
        for sigma in (1.0, 10.0, 100.0):
            a = ridge_fit(X, y, sigma)
            np.testing.assert_allclose(a, X.T @ y / (sigma + 1.0), rtol=1e-12)
            norms.append(np.linalg.norm(a))
        assert norms[0] > norms[1] > norms[2]

    def test_determinism_is_bitwise(self, rng):
        X = rng.normal(size=(20, 4))
        y = rng.normal(size=20)
        a = ridge_fit(X, y, 0.3)
        b = ridge_fit(X, y, 0.3)
        np.testing.assert_array_equal(a, b)

    def test_residual_optimality_against_perturbations(self, rng):
        X = rng.normal(size=(15, 3))
        y = rng.normal(size=15)
        sigma = 0.7
        a = ridge_fit(X, y, sigma)

        def objective(v):
            return float(np.sum((X @ v - y) ** 2) + sigma * np.sum(v**2))

        base = objective(a)
        for _ in range(100):
            delta = rng.normal(size=3)
            delta *= 1e-3 / np.linalg.norm(delta)
            assert base <= objective(a + delta) + 1e-12

    def test_contract_errors(self):
        with pytest.raises(ValueError):
            ridge_fit([[1.0, 2.0]], [1.0, 2.0], 1.0)  # 1 signal vs 2 responses
        with pytest.raises(ValueError):
            ridge_fit(np.zeros((0, 2)), np.zeros(0), 1.0)
        with pytest.raises(ValueError):
            ridge_fit([[1.0]], [1.0], 0.0)


class TestLinearExpert:
    def test_predict_examples(self):
        zero = LinearExpert(1, np.zeros(3))
        assert zero.predict([4.0, -1.0, 2.0]) == 0.0
        e1 = LinearExpert(2, np.array([1.0, 0.0]))
        assert e1.predict([3.5, 9.9]) == 3.5
        mixed = LinearExpert(3, np.array([0.5, -1.0]))
        assert mixed.predict([2.0, 1.0]) == 0.0

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            LinearExpert(1, np.zeros(2)).predict([1.0, 2.0, 3.0])


class TestInitExpert:
    def test_early_steps_use_fallback(self):
        model = init_expert(np.zeros((0, 3)), np.zeros(0), step=1, window=5, sigma=1.0)
        np.testing.assert_array_equal(model.coef, np.zeros(3))
        assert model.expert_id == 1
        custom = init_expert(
            np.zeros((2, 2)), np.zeros(2), step=3, window=5, sigma=1.0,
            fallback=np.array([1.0, -1.0]),
        )
        np.testing.assert_array_equal(custom.coef, [1.0, -1.0])

    def test_window_boundary_fits_first_pairs(self, rng):
        h = 6
        X = rng.normal(size=(h, 2))
        y = rng.normal(size=h)
        model = init_expert(X, y, step=h + 1, window=h, sigma=0.4)
        np.testing.assert_array_equal(model.coef, ridge_fit(X, y, 0.4))

    def test_only_most_recent_window_is_used(self, rng):
        h = 4
        X = rng.normal(size=(10, 2))
        y = rng.normal(size=10)
        model = init_expert(X, y, step=11, window=h, sigma=0.4)
        np.testing.assert_array_equal(model.coef, ridge_fit(X[-h:], y[-h:], 0.4))

    def test_noiseless_recovery_within_perturbation_bound(self, rng):
        # ||a - a_true|| <= sigma ||a_true|| / lambda_min(X'X) on clean data
        a_true = np.array([0.8, -0.3, 0.5])
        X = rng.uniform(-1, 1, size=(20, 3))
        y = X @ a_true
        sigma = 0.01
        model = init_expert(X, y, step=25, window=20, sigma=sigma)
        lam_min = np.linalg.eigvalsh(X[-20:].T @ X[-20:])[0]
        bound = sigma * np.linalg.norm(a_true) / lam_min
        assert np.linalg.norm(model.coef - a_true) <= bound + 1e-12

    def test_in_window_error_vanishes_as_sigma_shrinks(self, rng):
        a_true = np.array([0.4, 0.7])
        X = rng.uniform(-1, 1, size=(12, 2))
        y = X @ a_true
        model = init_expert(X, y, step=13, window=12, sigma=1e-8)
        errs = (X @ model.coef - y) ** 2
        assert np.max(errs) <= 1e-10
