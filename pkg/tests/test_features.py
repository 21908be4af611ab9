import math

import numpy as np
import pytest

from psychfm.data import ChoiceProblem, LotShape, OutcomeDistribution, expand_gamble_a, expand_gamble_b
from psychfm.errors import ValidationError
from psychfm.features import (
    FEATURE_NAMES,
    dominance,
    encode_onehot,
    fit_standardizer,
    naive_features,
    objective_view_b,
    p_better,
    psych_features,
    sign_view,
    uniform_view,
)

from conftest import pbetter_oracle, random_problem
from test_data import fig1_problem


class TestEncodeOnehot:
    def test_paper_scale_layout(self):
        v = encode_onehot(0, 0, 240, 210)
        assert v.length == 450 and v.active == (0, 240)

    def test_boundary_indices(self):
        v = encode_onehot(239, 209, 240, 210)
        assert v.active == (239, 449)

    def test_injective(self):
        seen = {encode_onehot(s, g, 4, 5).active
                for s in range(4) for g in range(5)}
        assert len(seen) == 20

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            encode_onehot(4, 0, 4, 5)


class TestNaiveFeatures:
    def test_fig1_dev(self):
        a, b = expand_gamble_a(fig1_problem()), expand_gamble_b(fig1_problem())
        d_ev, _, d_min, d_max = naive_features(a, b)
        assert math.isclose(d_ev, 0.2, abs_tol=1e-12)
        assert d_min == -3 and d_max == 29

    def test_identical(self):
        a = expand_gamble_a(fig1_problem())
        assert naive_features(a, a) == (0.0, 0.0, 0.0, 0.0)


class TestPsychFeatures:
    def test_fig1_spot_values(self):
        v = psych_features(fig1_problem())
        assert math.isclose(v.p_better_fb, 0.1, abs_tol=1e-12)
        assert math.isclose(v.d_sign_ev, -0.9, abs_tol=1e-12)
        assert math.isclose(v.d_uni_ev, 13.0, abs_tol=1e-12)
        assert math.isclose(v.p_better_u, 0.5, abs_tol=1e-12)
        assert v.sign_max == 1.0
        assert v.ratio_min == 0.0
        assert v.dom == 0.0

    def test_unambiguous_views_agree(self, rng):
        for _ in range(50):
            p = random_problem(rng, allow_amb=False)
            v = psych_features(p)
            assert v.d_ev_o == v.d_ev_fb == v.d_ev

    def test_ambiguous_objective_is_lottery_only(self):
        p = ChoiceProblem(1, 3, 1.0, 0, 32, 0.1, 5, 1, LotShape.NONE, 0, 1)
        b_obj = objective_view_b(p)
        assert b_obj.outcomes == ((5.0, 1.0),)
        v = psych_features(p)
        assert math.isclose(v.d_ev_o, 2.0, abs_tol=1e-12)  # 5 - 3

    def test_pointwise_shift_dominance(self):
        a = OutcomeDistribution.from_pairs([(0, 0.5), (10, 0.5)])
        b = OutcomeDistribution.from_pairs([(1, 0.5), (11, 0.5)])
        assert dominance(a, b) == 1
        assert dominance(b, a) == -1
        assert dominance(a, a) == 0

    def test_strict_dominance_comonotone_pbetter_one(self):
        a = OutcomeDistribution.from_pairs([(0, 0.5), (10, 0.5)])
        b = OutcomeDistribution.from_pairs([(1, 0.5), (11, 0.5)])
        assert p_better(a, b, 1) == 1.0

    @pytest.mark.parametrize("corr", [-1, 0, 1])
    def test_pbetter_matches_oracle(self, rng, corr):
        for _ in range(200):
            p = random_problem(rng)
            a, b = expand_gamble_a(p), expand_gamble_b(p)
            assert abs(p_better(a, b, corr) - pbetter_oracle(a, b, corr)) <= 1e-12

    def test_value_shift_invariance(self, rng):
        # adding c > 0 to every outcome of both gambles leaves the
        # value-comparison features untouched
        for _ in range(30):
            p = random_problem(rng, allow_amb=False)
            c = 7
            shifted = ChoiceProblem(
                p.game_id, p.ha + c, p.p_ha, p.la + c, p.hb + c, p.p_hb,
                p.lot_val + c, p.lot_num, p.lot_shape, p.corr, p.amb)
            v0, v1 = psych_features(p), psych_features(shifted)
            assert math.isclose(v0.p_better_fb, v1.p_better_fb, abs_tol=1e-12)
            assert math.isclose(v0.p_better_o, v1.p_better_o, abs_tol=1e-12)
            assert math.isclose(v0.p_better_u, v1.p_better_u, abs_tol=1e-12)
            assert v0.dom == v1.dom
            for attr in ("d_ev", "d_sd", "d_min", "d_max"):
                assert math.isclose(getattr(v0, attr), getattr(v1, attr),
                                    abs_tol=1e-9)

    def test_fuzzed_corpus_bounds(self, rng):
        for _ in range(300):
            p = random_problem(rng)
            v = psych_features(p)
            arr = v.to_array()  # raises on NaN/inf
            assert arr.shape == (len(FEATURE_NAMES),)
            for pb in (v.p_better_o, v.p_better_fb, v.p_better_u,
                       v.p_better_so, v.p_better_sfb):
                assert 0.0 <= pb <= 1.0
            assert -1.0 <= v.ratio_min <= 1.0
            assert v.dom in (-1.0, 0.0, 1.0)
            assert v.sign_max in (-1.0, 0.0, 1.0)

    def test_sign_and_uniform_views(self):
        b = expand_gamble_b(fig1_problem())
        assert sign_view(b).outcomes == ((0.0, 0.9), (1.0, 0.1))
        assert uniform_view(b).outcomes == ((0.0, 0.5), (32.0, 0.5))


class TestStandardizer:
    def test_single_row_maps_to_zero(self):
        s = fit_standardizer(np.array([[3.0, -1.0, 7.0]]))
        assert np.allclose(s.apply([[3.0, -1.0, 7.0]]), 0.0)

    def test_two_point_column(self):
        s = fit_standardizer(np.array([[1.0], [3.0]]))
        assert np.allclose(s.apply([[1.0], [3.0]]), [[-1.0], [1.0]])

    def test_unseen_row_uses_train_statistics(self):
        s = fit_standardizer(np.array([[0.0], [2.0]]))
        assert np.allclose(s.apply([[5.0]]), [[4.0]])  # (5-1)/1

    def test_train_fold_moments(self, rng):
        rows = rng.normal(3.0, 2.0, size=(50, 4))
        out = fit_standardizer(rows).apply(rows)
        assert np.allclose(out.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(out.std(axis=0), 1.0, atol=1e-12)
