import math

import numpy as np
import pytest

from psychfm.errors import ModelFormatError, ValidationError
from psychfm.linear import (
    LAMBDA_GRID,
    LassoConfig,
    LinearModel,
    RidgeConfig,
    lasso_fit,
    linear_load,
    linear_predict,
    linear_save,
    ridge_fit,
    select_lambda,
)


def lasso_objective(X, y, m, lam):
    resid = y - linear_predict(m, X)
    return float(np.sum(resid ** 2)) + lam * float(np.sum(np.abs(m.w)))


class TestRidge:
    def test_exact_interpolation(self):
        m = ridge_fit([[1.0], [2.0]], [1.0, 2.0], RidgeConfig(0.0))
        assert math.isclose(m.w[0], 1.0, abs_tol=1e-9)
        assert math.isclose(m.b, 0.0, abs_tol=1e-9)

    def test_centered_1d_hand_value(self):
        # w = sum(xy) / (sum(x^2) + lambda) = 2 / 4 = 0.5
        m = ridge_fit([[1.0], [-1.0]], [1.0, -1.0], RidgeConfig(2.0))
        assert math.isclose(m.w[0], 0.5, abs_tol=1e-12)

    def test_infinite_shrinkage_limit(self, rng):
        X = rng.normal(size=(20, 3))
        y = rng.normal(size=20)
        m = ridge_fit(X, y, RidgeConfig(1e9))
        assert np.allclose(m.w, 0.0, atol=1e-6)
        assert math.isclose(m.b, float(y.mean()), abs_tol=1e-6)

    def test_normal_equations_residual(self, rng):
        for _ in range(20):
            X = rng.normal(size=(30, 5))
            y = rng.normal(size=30)
            lam = float(rng.choice([0.0, 0.1, 10.0]))
            m = ridge_fit(X, y, RidgeConfig(lam))
            Z = np.hstack([np.ones((30, 1)), X])
            beta = np.concatenate([[m.b], m.w])
            pen = np.full(6, lam)
            pen[0] = 0.0
            resid = Z.T @ (Z @ beta - y) + pen * beta
            assert np.linalg.norm(resid) / max(1.0, np.linalg.norm(Z.T @ y)) < 1e-8

    def test_matches_lstsq_oracle_at_zero(self, rng):
        for _ in range(50):
            m_rows = int(rng.integers(12, 51))
            d = int(rng.integers(1, 11))
            X = rng.normal(size=(m_rows, d))
            y = rng.normal(size=m_rows)
            model = ridge_fit(X, y, RidgeConfig(0.0))
            Z = np.hstack([np.ones((m_rows, 1)), X])
            beta, *_ = np.linalg.lstsq(Z, y, rcond=None)
            assert np.max(np.abs(np.concatenate([[model.b], model.w]) - beta)) < 1e-6

    def test_collinear_fallback_reports(self, rng, caplog):
        X = np.column_stack([np.ones(10), np.ones(10)])
        y = rng.normal(size=10)
        with caplog.at_level("WARNING"):
            m = ridge_fit(X, y, RidgeConfig(0.0))
        assert m.meta["jittered"]


class TestLasso:
    def test_zero_lambda_matches_ridge(self, rng):
        X = rng.normal(size=(25, 4))
        y = rng.normal(size=25)
        mr = ridge_fit(X, y, RidgeConfig(0.0))
        ml = lasso_fit(X, y, LassoConfig(0.0, tol=1e-10, max_iter=5000))
        assert np.allclose(ml.w, mr.w, atol=1e-6)
        assert math.isclose(ml.b, mr.b, abs_tol=1e-6)

    def test_centered_1d_soft_threshold(self):
        # w = (sum(xy) - lambda/2) / sum(x^2) = (2 - 1) / 2 = 0.5
        m = lasso_fit([[1.0], [-1.0]], [1.0, -1.0], LassoConfig(2.0))
        assert math.isclose(m.w[0], 0.5, abs_tol=1e-9)

    @pytest.mark.parametrize("lam", [4.0, 5.0, 100.0])
    def test_threshold_boundary_zeroes_weight(self, lam):
        m = lasso_fit([[1.0], [-1.0]], [1.0, -1.0], LassoConfig(lam))
        assert m.w[0] == 0.0

    def test_large_lambda_kills_weights_not_intercept(self, rng):
        X = rng.normal(size=(30, 5))
        y = 2.0 + rng.normal(size=30)
        m = lasso_fit(X, y, LassoConfig(1e6))
        assert np.all(m.w == 0.0)
        assert abs(m.b - y.mean()) < 1e-6

    def test_objective_monotone_per_sweep(self, rng):
        for _ in range(10):
            X = rng.normal(size=(20, 6))
            y = rng.normal(size=20)
            lam = float(rng.choice([0.1, 1.0, 10.0]))
            prev = None
            for sweeps in range(1, 8):
                m = lasso_fit(X, y, LassoConfig(lam, tol=1e-300,
                                                max_iter=sweeps))
                obj = lasso_objective(X, y, m, lam)
                if prev is not None:
                    assert obj <= prev + 1e-9 * max(1.0, prev)
                prev = obj

    def test_converged_flag(self, rng):
        X = rng.normal(size=(20, 6))
        y = rng.normal(size=20)
        m = lasso_fit(X, y, LassoConfig(0.5, tol=1e-12, max_iter=1))
        assert m.meta["converged"] is False
        m = lasso_fit(X, y, LassoConfig(0.5, tol=1e-8, max_iter=10000))
        assert m.meta["converged"] is True


class TestPredict:
    def test_bias_only(self):
        assert linear_predict(LinearModel(0.4, np.zeros(2)), [[9.0, 9.0]]) == 0.4

    def test_dot_product(self):
        m = LinearModel(0.0, np.array([1.0, 2.0]))
        assert linear_predict(m, [[3.0, 4.0]])[0] == 11.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            linear_predict(LinearModel(0.0, np.array([1.0])), [[1.0, 2.0]])

    def test_serialization_round_trip(self, rng, tmp_path):
        m = LinearModel(float(rng.normal()), rng.normal(size=6))
        path = tmp_path / "m.model"
        linear_save(m, path)
        m2 = linear_load(path)
        X = rng.normal(size=(5, 6))
        assert np.array_equal(linear_predict(m, X), linear_predict(m2, X))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "m.model"
        path.write_text("psychfm-model v1 fm\n1\n0\n0\n")
        with pytest.raises(ModelFormatError):
            linear_load(path)


class TestSelectLambda:
    def test_prefers_validation_fit(self, rng):
        X = rng.normal(size=(60, 4))
        w_true = np.array([1.0, -2.0, 0.5, 0.0])
        y = X @ w_true + 0.01 * rng.normal(size=60)
        fit = lambda Xt, yt, lam: ridge_fit(Xt, yt, RidgeConfig(lam))
        lam, model = select_lambda(fit, X[:40], y[:40], X[40:], y[40:])
        assert lam in LAMBDA_GRID
        assert lam <= 0.1  # strong signal, light shrinkage wins
        assert np.allclose(model.w, w_true, atol=0.05)
