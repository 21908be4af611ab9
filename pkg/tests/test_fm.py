import filecmp
import importlib
import math

import numpy as np
import pytest

from psychfm import backend
from psychfm.errors import ModelFormatError, TrainingDivergedError, ValidationError
from psychfm.features import SparseVector, encode_onehot
from psychfm.fm import (
    FMModel,
    FMTrainConfig,
    Solver,
    _regularized_objective,
    fm_gradients,
    fm_load,
    fm_predict,
    fm_predict_batch,
    fm_save,
    fm_train_als,
    fm_train_sgd,
)

from conftest import fm_naive_predict


def random_model(rng, n, k):
    return FMModel(float(rng.normal()), rng.normal(size=n),
                   rng.normal(size=(n, k)))


def random_input(rng, n):
    size = int(rng.integers(1, min(n, 6) + 1))
    active = tuple(sorted(rng.choice(n, size=size, replace=False)))
    return SparseVector(n, active)


def toy_dataset(rng, n_subj=6, n_games=8, noise=0.0):
    """Planted additive rates over all subject x game one-hots."""
    sb = rng.normal(size=n_subj)
    gb = rng.normal(size=n_games)
    data = []
    for s in range(n_subj):
        for g in range(n_games):
            x = encode_onehot(s, g, n_subj, n_games)
            y = 0.5 + 0.1 * sb[s] + 0.1 * gb[g] + noise * rng.normal()
            data.append((x, y))
    return data


class TestPredict:
    def test_bias_only(self):
        m = FMModel(0.7, np.zeros(5), np.zeros((5, 3)))
        assert fm_predict(m, SparseVector(5, (1, 3))) == 0.7

    def test_hand_example(self):
        m = FMModel(0.0, np.array([0.1, 0.2]),
                    np.array([[0.1, 0.2], [0.3, -0.1]]))
        # 0.1 + 0.2 + (0.1*0.3 + 0.2*-0.1) = 0.31
        assert math.isclose(fm_predict(m, SparseVector(2, (0, 1))), 0.31,
                            abs_tol=1e-12)

    def test_matches_pairwise_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 21))
            k = int(rng.integers(1, 6))
            m = random_model(rng, n, k)
            x = random_input(rng, n)
            expected = fm_naive_predict(m.w0, m.w, m.V, x.active)
            assert abs(fm_predict(m, x) - expected) < 1e-9

    def test_dimension_mismatch(self):
        m = FMModel(0.0, np.zeros(4), np.zeros((4, 2)))
        with pytest.raises(ValidationError):
            fm_predict(m, SparseVector(5, (0,)))

    def test_reduces_to_linear_with_zero_factors(self, rng):
        w = rng.normal(size=6)
        m = FMModel(0.3, w, np.zeros((6, 1)))
        for _ in range(20):
            x = random_input(rng, 6)
            linear = 0.3 + sum(w[i] for i in x.active)
            assert math.isclose(fm_predict(m, x), linear, abs_tol=1e-12)


class TestGradients:
    def test_matches_finite_differences(self, rng):
        m = random_model(rng, 4, 2)
        x = SparseVector(4, (0, 2, 3))
        y = 0.37
        g0, gw, gV = fm_gradients(m, x, y)
        eps = 1e-5

        def loss(w0, w, V):
            return (fm_naive_predict(w0, w, V, x.active) - y) ** 2

        fd0 = (loss(m.w0 + eps, m.w, m.V) - loss(m.w0 - eps, m.w, m.V)) / (2 * eps)
        assert abs(g0 - fd0) / max(1.0, abs(fd0)) < 1e-4
        for i in range(4):
            wp, wm = m.w.copy(), m.w.copy()
            wp[i] += eps
            wm[i] -= eps
            fd = (loss(m.w0, wp, m.V) - loss(m.w0, wm, m.V)) / (2 * eps)
            assert abs(gw[i] - fd) / max(1.0, abs(fd)) < 1e-4
        for i in range(4):
            for f in range(2):
                Vp, Vm = m.V.copy(), m.V.copy()
                Vp[i, f] += eps
                Vm[i, f] -= eps
                fd = (loss(m.w0, m.w, Vp) - loss(m.w0, m.w, Vm)) / (2 * eps)
                assert abs(gV[i, f] - fd) / max(1.0, abs(fd)) < 1e-4


class TestSgd:
    def test_constant_target_bias_fit(self, rng):
        data = [(random_input(rng, 5), 0.42) for _ in range(30)]
        cfg = FMTrainConfig(k=2, epochs=300, seed=1, reg_w=0.0, reg_v=0.0)
        m = fm_train_sgd(data, cfg)
        preds = fm_predict_batch(m, [x for x, _ in data])
        assert np.allclose(preds, 0.42, atol=1e-2)

    def test_divergence_error_names_epoch(self, rng):
        data = toy_dataset(rng)
        cfg = FMTrainConfig(learning_rate=50.0, epochs=50, seed=1)
        with pytest.raises(TrainingDivergedError):
            fm_train_sgd(data, cfg)

    def test_learns_planted_additive_signal(self, rng):
        data = toy_dataset(rng)
        cfg = FMTrainConfig(k=4, epochs=300, seed=2)
        m = fm_train_sgd(data, cfg)
        y = np.array([t for _, t in data])
        preds = fm_predict_batch(m, [x for x, _ in data])
        initial = float(np.mean((y - 0.0) ** 2))
        assert float(np.mean((preds - y) ** 2)) < initial

    def test_cold_pair_interaction_nonzero(self, rng):
        # subject 0 and game 0 never co-occur in training, yet their latent
        # vectors are updated through other pairs and interact at predict time
        data = [(x, y) for x, y in toy_dataset(rng)
                if x.active != (0, 6)]
        cfg = FMTrainConfig(k=4, epochs=200, seed=3)
        m = fm_train_sgd(data, cfg)
        interaction = float(np.dot(m.V[0], m.V[6]))
        assert interaction != 0.0

    def test_deterministic_serialization(self, rng, tmp_path):
        data = toy_dataset(rng)
        cfg = FMTrainConfig(k=3, epochs=20, seed=9)
        fm_save(fm_train_sgd(data, cfg), tmp_path / "a.model")
        fm_save(fm_train_sgd(data, cfg), tmp_path / "b.model")
        assert filecmp.cmp(tmp_path / "a.model", tmp_path / "b.model",
                           shallow=False)


class TestAls:
    def test_linear_subcase_recovery(self, rng):
        # targets exactly representable by the linear part
        w_true = rng.normal(size=14)
        data = []
        for _ in range(80):
            x = random_input(rng, 14)
            data.append((x, 0.2 + sum(w_true[i] for i in x.active)))
        cfg = FMTrainConfig(k=2, epochs=60, seed=4, reg_w=0.0, reg_v=0.0,
                            init_sd=1e-4, solver=Solver.ALS)
        m = fm_train_als(data, cfg)
        preds = fm_predict_batch(m, [x for x, _ in data])
        y = np.array([t for _, t in data])
        assert float(np.mean((preds - y) ** 2)) < 1e-6

    def test_objective_monotone(self, rng):
        # fm_train_als raises if any sweep increases the regularized
        # objective; 20 random instances exercise that assertion
        for trial in range(20):
            data = [(random_input(rng, 8), float(rng.normal()))
                    for _ in range(25)]
            cfg = FMTrainConfig(k=2, epochs=15, seed=trial, reg_w=1e-3,
                                reg_v=1e-3, solver=Solver.ALS)
            fm_train_als(data, cfg)

    def test_sgd_als_agree_on_small_data(self, rng):
        data = toy_dataset(rng, noise=0.05)
        y = np.array([t for _, t in data])
        xs = [x for x, _ in data]
        mses = {}
        for solver, train, epochs, lr in (
            ("sgd", fm_train_sgd, 3000, 0.05),
            ("als", fm_train_als, 200, 0.05),
        ):
            cfg = FMTrainConfig(k=3, epochs=epochs, learning_rate=lr, seed=5,
                                reg_w=1e-2, reg_v=1e-2)
            m = train(data, cfg)
            preds = fm_predict_batch(m, xs)
            mses[solver] = float(np.mean((preds - y) ** 2))
        assert abs(mses["sgd"] - mses["als"]) <= 0.10 * max(mses.values())


class TestSerialization:
    def test_round_trip(self, rng, tmp_path):
        m = random_model(rng, 7, 3)
        path = tmp_path / "m.model"
        fm_save(m, path)
        m2 = fm_load(path)
        for _ in range(20):
            x = random_input(rng, 7)
            assert fm_predict(m, x) == fm_predict(m2, x)

    def test_truncated_file(self, rng, tmp_path):
        path = tmp_path / "m.model"
        fm_save(random_model(rng, 7, 3), path)
        text = path.read_text().splitlines()
        path.write_text("\n".join(text[:5]) + "\n")
        with pytest.raises(ModelFormatError):
            fm_load(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "m.model"
        path.write_text("psychfm-model v1 linear\n1 1\n0\n0\n0\n")
        with pytest.raises(ModelFormatError):
            fm_load(path)

    def test_zero_k_rejected(self, tmp_path):
        path = tmp_path / "m.model"
        path.write_text("psychfm-model v1 fm\n1 0\n0\n0\n\n")
        with pytest.raises(ValidationError):
            fm_load(path)


class TestBackends:
    def test_backends_agree(self, rng, monkeypatch):
        from psychfm import _fm_py
        try:
            from psychfm import _fm_cy
        except ImportError:
            pytest.skip("compiled backend not built")
        n, k, m_rows = 12, 3, 40
        w0 = 0.1
        w = 0.1 * rng.normal(size=n)
        V = 0.1 * rng.normal(size=(n, k))
        xs = [random_input(rng, n) for _ in range(m_rows)]
        indices = np.concatenate([np.array(x.active, dtype=np.int64)
                                  for x in xs])
        indptr = np.zeros(m_rows + 1, dtype=np.int64)
        for j, x in enumerate(xs):
            indptr[j + 1] = indptr[j] + len(x.active)
        y = rng.normal(size=m_rows)
        order = rng.permutation(m_rows).astype(np.int64)

        out_py = np.empty(m_rows)
        out_cy = np.empty(m_rows)
        _fm_py.predict_batch(w0, w, V, indices, indptr, out_py)
        _fm_cy.predict_batch(w0, w, V, indices, indptr, out_cy)
        assert np.allclose(out_py, out_cy, atol=1e-12)

        w_py, V_py = w.copy(), V.copy()
        w_cy, V_cy = w.copy(), V.copy()
        w0_py, s_py = _fm_py.sgd_epoch(w0, w_py, V_py, indices, indptr, y,
                                       order, 0.01, 1e-3, 1e-3)
        w0_cy, s_cy = _fm_cy.sgd_epoch(w0, w_cy, V_cy, indices, indptr, y,
                                       order, 0.01, 1e-3, 1e-3)
        assert math.isclose(w0_py, w0_cy, abs_tol=1e-12)
        assert math.isclose(s_py, s_cy, abs_tol=1e-10)
        assert np.allclose(w_py, w_cy, atol=1e-12)
        assert np.allclose(V_py, V_cy, atol=1e-12)

    def test_forced_python_backend(self, monkeypatch):
        monkeypatch.setenv("PSYCHFM_NO_EXT", "1")
        mod = importlib.reload(backend)
        try:
            assert mod.backend_name() == "python"
        finally:
            monkeypatch.delenv("PSYCHFM_NO_EXT")
            importlib.reload(backend)
