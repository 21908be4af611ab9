"""Input representations: sparse identity one-hots and behavioral features.

Input type A is a (subjects + games)-long binary vector with exactly two
active positions.  Input type B concatenates the 11 objective gamble
parameters, 4 naive comparison statistics, and 12 psychology-inspired
features (pessimistic / uniform / sign-transformed re-readings of the
gambles, regret probabilities, dominance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import (
    ChoiceProblem,
    LotShape,
    OutcomeDistribution,
    _expand_b,
    expand_gamble_a,
    expand_gamble_b,
    joint_distribution,
)
from .errors import ValidationError


@dataclass(frozen=True)
class SparseVector:
    length: int
    active: tuple  # ascending indices; implicit value 1 at each

    def __post_init__(self):
        if any(not (0 <= i < self.length) for i in self.active):
            raise ValidationError(f"active indices {self.active} outside "
                                  f"[0, {self.length})")
        if list(self.active) != sorted(set(self.active)):
            raise ValidationError("active indices must be strictly ascending")


def encode_onehot(subj_idx: int, game_idx: int,
                  n_subjects: int, n_games: int) -> SparseVector:
    """Identity encoding: subjects occupy [0, n_subjects), games follow."""
    if not (0 <= subj_idx < n_subjects):
        raise ValidationError(f"subject index {subj_idx} outside [0, {n_subjects})")
    if not (0 <= game_idx < n_games):
        raise ValidationError(f"game index {game_idx} outside [0, {n_games})")
    return SparseVector(n_subjects + n_games,
                        (subj_idx, n_subjects + game_idx))


# ---------------------------------------------------------------------------
# Distribution transforms

def _sign(v: float) -> float:
    return float((v > 0) - (v < 0))


def uniform_view(d: OutcomeDistribution) -> OutcomeDistribution:
    """Equal probability on each distinct outcome."""
    n = len(d.outcomes)
    return OutcomeDistribution.from_pairs([(v, 1.0 / n) for v in d.values])


def sign_view(d: OutcomeDistribution) -> OutcomeDistribution:
    """Map every outcome value to its sign, merging collisions."""
    return OutcomeDistribution.from_pairs(
        [(_sign(v), p) for v, p in d.outcomes]
    )


def objective_view_b(p: ChoiceProblem) -> OutcomeDistribution:
    """B as the participant can evaluate it before any feedback.

    When the gamble is ambiguous the high-branch probability is unknown;
    the pessimistic reading sets it to zero, leaving only the lottery branch.
    """
    if p.amb:
        return _expand_b(p.hb, 0.0, p.lot_val, p.lot_num, p.lot_shape)
    return expand_gamble_b(p)


def p_better(a: OutcomeDistribution, b: OutcomeDistribution, corr: int) -> float:
    """P(vb > va) under the correlation-consistent joint distribution."""
    return math.fsum(
        m for va, vb, m in joint_distribution(a, b, corr) if vb > va
    )


def dominance(a: OutcomeDistribution, b: OutcomeDistribution) -> int:
    """First-order stochastic dominance: -1 A dominates, +1 B dominates, 0 else.

    Weak CDF ordering on the union support with at least one strict
    inequality; identical distributions give 0.
    """
    grid = sorted(set(a.values) | set(b.values))
    fa = fb = 0.0
    ia = ib = 0
    a_leq_b = b_leq_a = True  # CDF comparisons, lower CDF = dominant
    strict = False
    for v in grid:
        while ia < len(a.outcomes) and a.outcomes[ia][0] <= v:
            fa += a.outcomes[ia][1]
            ia += 1
        while ib < len(b.outcomes) and b.outcomes[ib][0] <= v:
            fb += b.outcomes[ib][1]
            ib += 1
        if fa < fb - 1e-12 or fb < fa - 1e-12:
            strict = True
        if fa > fb + 1e-12:
            a_leq_b = False
        if fb > fa + 1e-12:
            b_leq_a = False
    if a_leq_b and strict:
        return -1
    if b_leq_a and strict:
        return 1
    return 0


def ratio_min(a: OutcomeDistribution, b: OutcomeDistribution) -> float:
    """Bounded signed ratio of the two minimal outcomes."""
    ma, mb = a.vmin(), b.vmin()
    hi = max(abs(ma), abs(mb))
    if hi == 0.0:
        return 0.0
    return _sign(ma) * _sign(mb) * min(abs(ma), abs(mb)) / hi


# ---------------------------------------------------------------------------
# Feature vectors

_SHAPE_CODE = {LotShape.LSKEW: -1.0, LotShape.NONE: 0.0,
               LotShape.SYMM: 0.0, LotShape.RSKEW: 1.0}

FEATURE_NAMES = [
    # objective
    "Ha", "pHa", "La", "Hb", "pHb", "LotVal", "LotNum", "lotShapeCode",
    "Corr", "Amb", "feedbackCode",
    # naive
    "dEV", "dSD", "dMin", "dMax",
    # psychological
    "dEV_o", "dEV_fb", "pBetter_o", "pBetter_fb", "dUniEV", "pBetter_u",
    "dSignEV", "pBetter_So", "pBetter_Sfb", "SignMax", "RatioMin", "Dom",
]


@dataclass(frozen=True)
class PsychFeatureVector:
    ha: float
    p_ha: float
    la: float
    hb: float
    p_hb: float
    lot_val: float
    lot_num: float
    lot_shape_code: float
    corr: float
    amb: float
    feedback_code: float
    d_ev: float
    d_sd: float
    d_min: float
    d_max: float
    d_ev_o: float
    d_ev_fb: float
    p_better_o: float
    p_better_fb: float
    d_uni_ev: float
    p_better_u: float
    d_sign_ev: float
    p_better_so: float
    p_better_sfb: float
    sign_max: float
    ratio_min: float
    dom: float

    def to_array(self) -> np.ndarray:
        vals = np.array([
            self.ha, self.p_ha, self.la, self.hb, self.p_hb, self.lot_val,
            self.lot_num, self.lot_shape_code, self.corr, self.amb,
            self.feedback_code, self.d_ev, self.d_sd, self.d_min, self.d_max,
            self.d_ev_o, self.d_ev_fb, self.p_better_o, self.p_better_fb,
            self.d_uni_ev, self.p_better_u, self.d_sign_ev, self.p_better_so,
            self.p_better_sfb, self.sign_max, self.ratio_min, self.dom,
        ])
        if not np.all(np.isfinite(vals)):
            raise ValidationError("non-finite feature value")
        return vals


def naive_features(a: OutcomeDistribution, b: OutcomeDistribution):
    """(dEV, dSD, dMin, dMax): statistic(B) - statistic(A)."""
    return (b.mean() - a.mean(), b.sd() - a.sd(),
            b.vmin() - a.vmin(), b.vmax() - a.vmax())


def psych_features(p: ChoiceProblem,
                   a: OutcomeDistribution | None = None,
                   b: OutcomeDistribution | None = None) -> PsychFeatureVector:
    if a is None:
        a = expand_gamble_a(p)
    if b is None:
        b = expand_gamble_b(p)
    b_obj = objective_view_b(p)
    a_uni, b_uni = uniform_view(a), uniform_view(b)
    a_sgn, b_sgn = sign_view(a), sign_view(b)
    b_sgn_obj = sign_view(b_obj)

    d_ev, d_sd, d_min, d_max = naive_features(a, b)
    return PsychFeatureVector(
        ha=p.ha, p_ha=p.p_ha, la=p.la, hb=p.hb, p_hb=p.p_hb,
        lot_val=p.lot_val, lot_num=float(p.lot_num),
        lot_shape_code=_SHAPE_CODE[p.lot_shape],
        corr=float(p.corr), amb=float(p.amb), feedback_code=0.0,
        d_ev=d_ev, d_sd=d_sd, d_min=d_min, d_max=d_max,
        d_ev_o=b_obj.mean() - a.mean(),
        d_ev_fb=b.mean() - a.mean(),
        p_better_o=p_better(a, b_obj, p.corr),
        p_better_fb=p_better(a, b, p.corr),
        d_uni_ev=b_uni.mean() - a_uni.mean(),
        p_better_u=p_better(a_uni, b_uni, p.corr),
        d_sign_ev=b_sgn.mean() - a_sgn.mean(),
        p_better_so=p_better(a_sgn, b_sgn_obj, p.corr),
        p_better_sfb=p_better(a_sgn, b_sgn, p.corr),
        sign_max=_sign(max(a.vmax(), b.vmax())),
        ratio_min=ratio_min(a, b),
        dom=float(dominance(a, b)),
    )


# ---------------------------------------------------------------------------
# Standardization

@dataclass(frozen=True)
class Standardizer:
    """Per-column affine map learned on the training fold.

    Constant columns get scale 1 so they map to exactly 0 instead of NaN.
    """

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.mean.shape[0]:
            raise ValidationError(
                f"row width {rows.shape[1]} != fitted width {self.mean.shape[0]}"
            )
        return (rows - self.mean) / self.scale


def fit_standardizer(rows: np.ndarray) -> Standardizer:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size == 0:
        raise ValidationError("cannot standardize an empty matrix")
    mean = rows.mean(axis=0)
    scale = rows.std(axis=0)  # population std
    scale[scale == 0.0] = 1.0
    return Standardizer(mean, scale)
