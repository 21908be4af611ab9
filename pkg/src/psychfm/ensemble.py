"""Two-layer blending and the end-to-end train/blend/eval pipeline.

Layer-1 members fit on the train fold; a small ridge regression on their
validation-fold predictions gives the blend coefficients; test predictions
are the coefficient-weighted combination.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import linear
from .data import expand_gamble_a, expand_gamble_b
from .errors import ModelFormatError, ValidationError
from .features import encode_onehot, fit_standardizer, psych_features
from .fm import FMModel, FMTrainConfig, fm_predict_batch, fm_train
from .linear import LassoConfig, LinearModel, RidgeConfig, linear_predict
from .metrics import EvalReport, ReportRow, mse, mse_x100


@dataclass
class BlendModel:
    member_ids: tuple
    coef: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=float).ravel()
        if len(self.member_ids) != self.coef.shape[0]:
            raise ValidationError("one coefficient per member required")
        if not np.all(np.isfinite(self.coef)) or not np.isfinite(self.intercept):
            raise ValidationError("non-finite blend parameter")


def blend_fit(val_preds, y_val, lam: float, intercept: bool = False,
              member_ids=None) -> BlendModel:
    """Ridge on the members' validation predictions; no intercept by default."""
    P = np.atleast_2d(np.asarray(val_preds, dtype=float))
    y = np.asarray(y_val, dtype=float).ravel()
    m, p = P.shape
    if p < 1:
        raise ValidationError("need at least one member")
    if m < p:
        raise ValidationError(f"{m} validation rows < {p} members")
    if member_ids is None:
        member_ids = tuple(f"member{i}" for i in range(p))
    if intercept:
        model = linear.ridge_fit(P, y, RidgeConfig(lam))
        return BlendModel(tuple(member_ids), model.w, model.b)
    A = P.T @ P + lam * np.eye(p)
    c = np.linalg.solve(A, P.T @ y)
    return BlendModel(tuple(member_ids), c, 0.0)


def blend_predict(bm: BlendModel, preds) -> np.ndarray:
    P = np.atleast_2d(np.asarray(preds, dtype=float))
    if P.shape[1] != bm.coef.shape[0]:
        raise ValidationError(
            f"prediction width {P.shape[1]} != {bm.coef.shape[0]} members"
        )
    return bm.intercept + P @ bm.coef


_BLEND_HEADER = "psychfm-model v1 blend"


def blend_save(bm: BlendModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_BLEND_HEADER + "\n")
        fh.write(" ".join(bm.member_ids) + "\n")
        fh.write(" ".join(format(c, ".17g") for c in bm.coef) + "\n")
        fh.write(format(bm.intercept, ".17g") + "\n")


def blend_load(path) -> BlendModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _BLEND_HEADER:
        raise ModelFormatError(f"bad header in {path}")
    try:
        ids = tuple(lines[1].split())
        coef = np.array([float(v) for v in lines[2].split()])
        intercept = float(lines[3])
    except (IndexError, ValueError) as exc:
        raise ModelFormatError(f"unparseable blend file {path}: {exc}") from exc
    return BlendModel(ids, coef, intercept)


# ---------------------------------------------------------------------------
# Member specs and design matrices

_MODEL_LABEL = {"fm": "FM", "ridge": "Ridge", "lasso": "Lasso"}
_INPUT_LABEL = {"onehot": "A", "psych": "B"}


@dataclass(frozen=True)
class MemberSpec:
    model: str  # fm | ridge | lasso
    input: str  # onehot | psych

    def __post_init__(self):
        if self.model not in _MODEL_LABEL:
            raise ValidationError(f"unknown model {self.model!r}")
        if self.input not in _INPUT_LABEL:
            raise ValidationError(f"unknown input {self.input!r}")
        if self.model == "fm" and self.input != "onehot":
            raise ValidationError("fm members need the sparse onehot input")

    @classmethod
    def parse(cls, text: str) -> "MemberSpec":
        try:
            model, input_ = text.split(":")
        except ValueError as exc:
            raise ValidationError(f"member spec {text!r} is not model:input") from exc
        return cls(model.strip(), input_.strip())

    @property
    def member_id(self) -> str:
        return f"{self.model}_{self.input}"

    @property
    def display(self) -> str:
        return f"{_MODEL_LABEL[self.model]} ({_INPUT_LABEL[self.input]})"


def blend_display_name(specs) -> str:
    return " + ".join(s.display for s in specs)


@dataclass
class PipelineConfig:
    fm: FMTrainConfig = field(default_factory=FMTrainConfig)
    ridge_lambda: object = "auto"  # float or "auto" (validation grid)
    lasso_lambda: object = "auto"
    lasso_tol: float = 1e-6
    lasso_max_iter: int = 1000
    blend_lambda: float = 1e-3
    blend_intercept: bool = False
    clip: bool = False
    standardize_psych: bool = True
    seed: int = 0


@dataclass
class Design:
    """Per-fold inputs keyed identically across representations."""

    keys: list  # of (subj_id, game_id), sorted
    y: np.ndarray
    onehot: list  # of SparseVector
    psych: np.ndarray  # standardized rows


def build_designs(problems, points, split, standardize_psych=True):
    """Design matrices for the train/val/test folds.

    One-hot index layout: subjects first (sorted ids), then games.  Psych
    rows depend only on the game; standardization statistics come from the
    train fold.
    """
    subj_ids = sorted({pt.subj_id for pt in points})
    game_ids = sorted(p.game_id for p in problems)
    subj_idx = {s: i for i, s in enumerate(subj_ids)}
    game_idx = {g: i for i, g in enumerate(game_ids)}
    by_game = {p.game_id: p for p in problems}
    rate = {(pt.subj_id, pt.game_id): pt.b_rate for pt in points}

    feats = {}
    for p in problems:
        a, b = expand_gamble_a(p), expand_gamble_b(p)
        feats[p.game_id] = psych_features(p, a, b).to_array()

    folds = {}
    raw_psych = {}
    for fold, ids in (("train", split.train_ids), ("val", split.val_ids),
                      ("test", split.test_ids)):
        keys = sorted(ids)
        for s, g in keys:
            if g not in by_game:
                raise ValidationError(f"rate point references unknown game {g}")
            if (s, g) not in rate:
                raise ValidationError(f"split key ({s},{g}) has no rate point")
        y = np.array([rate[k] for k in keys])
        onehot = [
            encode_onehot(subj_idx[s], game_idx[g], len(subj_ids), len(game_ids))
            for s, g in keys
        ]
        raw_psych[fold] = (np.vstack([feats[g] for _, g in keys])
                           if keys else np.zeros((0, len(next(iter(feats.values()))))))
        folds[fold] = Design(keys, y, onehot, raw_psych[fold])

    if standardize_psych and len(folds["train"].keys) > 0:
        std = fit_standardizer(raw_psych["train"])
        for fold in folds.values():
            if fold.keys:
                fold.psych = std.apply(fold.psych)
    return folds


# ---------------------------------------------------------------------------
# Member training

@dataclass
class TrainedMember:
    spec: MemberSpec
    model: object  # FMModel or LinearModel
    hyper: str

    def predict(self, design: Design) -> np.ndarray:
        if self.spec.model == "fm":
            return fm_predict_batch(self.model, design.onehot)
        X = (_onehot_dense(design.onehot) if self.spec.input == "onehot"
             else design.psych)
        return linear_predict(self.model, X)


def _onehot_dense(vectors) -> np.ndarray:
    if not vectors:
        return np.zeros((0, 0))
    X = np.zeros((len(vectors), vectors[0].length))
    for j, v in enumerate(vectors):
        X[j, list(v.active)] = 1.0
    return X


def train_member(spec: MemberSpec, folds, cfg: PipelineConfig) -> TrainedMember:
    train, val = folds["train"], folds["val"]
    if spec.model == "fm":
        model = fm_train(list(zip(train.onehot, train.y)), cfg.fm)
        hyper = (f"solver={cfg.fm.solver.value} k={cfg.fm.k} "
                 f"lr={cfg.fm.learning_rate:g} epochs={cfg.fm.epochs} "
                 f"reg_w={cfg.fm.reg_w:g} reg_v={cfg.fm.reg_v:g}")
        return TrainedMember(spec, model, hyper)

    X_train = (_onehot_dense(train.onehot) if spec.input == "onehot"
               else train.psych)
    X_val = (_onehot_dense(val.onehot) if spec.input == "onehot" else val.psych)
    if spec.model == "ridge":
        lam_cfg = cfg.ridge_lambda
        fit = lambda X, y, lam: linear.ridge_fit(X, y, RidgeConfig(lam))
    else:
        lam_cfg = cfg.lasso_lambda
        fit = lambda X, y, lam: linear.lasso_fit(
            X, y, LassoConfig(lam, cfg.lasso_tol, cfg.lasso_max_iter))
    if lam_cfg == "auto":
        if len(val.keys) == 0:
            raise ValidationError(
                "lambda=auto needs a non-empty validation fold")
        lam, model = linear.select_lambda(fit, X_train, train.y, X_val, val.y)
    else:
        lam = float(lam_cfg)
        model = fit(X_train, train.y, lam)
    return TrainedMember(spec, model, f"lambda={lam:g}")


# ---------------------------------------------------------------------------
# Full pipeline

@dataclass
class PipelineResult:
    members: list  # of TrainedMember
    blend: BlendModel
    folds: dict
    member_val_preds: np.ndarray  # m_val x p
    member_test_preds: np.ndarray
    blend_val_preds: np.ndarray
    blend_test_preds: np.ndarray
    report: EvalReport
    baseline_test_mse: float

    def member_mse(self, member_id, fold="val"):
        idx = [m.spec.member_id for m in self.members].index(member_id)
        preds = (self.member_val_preds if fold == "val"
                 else self.member_test_preds)[:, idx]
        return mse(preds, self.folds[fold].y)


def _maybe_clip(preds, clip):
    return np.clip(preds, 0.0, 1.0) if clip else preds


def run_pipeline(problems, points, split, member_specs,
                 cfg: PipelineConfig | None = None) -> PipelineResult:
    """Fit members on train, blend on validation predictions, score on test."""
    cfg = cfg or PipelineConfig()
    specs = [MemberSpec.parse(s) if isinstance(s, str) else s
             for s in member_specs]
    if not specs:
        raise ValidationError("need at least one member")
    folds = build_designs(problems, points, split,
                          standardize_psych=cfg.standardize_psych)
    for fold in ("train", "val", "test"):
        if not folds[fold].keys:
            raise ValidationError(f"{fold} fold is empty")

    members = [train_member(s, folds, cfg) for s in specs]
    val_preds = np.column_stack(
        [_maybe_clip(m.predict(folds["val"]), cfg.clip) for m in members])
    test_preds = np.column_stack(
        [_maybe_clip(m.predict(folds["test"]), cfg.clip) for m in members])

    blend = blend_fit(val_preds, folds["val"].y, cfg.blend_lambda,
                      intercept=cfg.blend_intercept,
                      member_ids=[m.spec.member_id for m in members])
    blend_val = _maybe_clip(blend_predict(blend, val_preds), cfg.clip)
    blend_test = _maybe_clip(blend_predict(blend, test_preds), cfg.clip)

    rows = []
    for idx, member in enumerate(members):
        rows.append(ReportRow(
            model_name=member.spec.display,
            input_type=_INPUT_LABEL[member.spec.input],
            test_mse_x100=mse_x100(test_preds[:, idx], folds["test"].y),
            val_mse_x100=mse_x100(val_preds[:, idx], folds["val"].y),
            hyperparameters=member.hyper,
            seed=cfg.seed,
        ))
    rows.append(ReportRow(
        model_name=blend_display_name(specs),
        input_type="ensemble",
        test_mse_x100=mse_x100(blend_test, folds["test"].y),
        val_mse_x100=mse_x100(blend_val, folds["val"].y),
        hyperparameters=(f"blend_lambda={cfg.blend_lambda:g} "
                         f"intercept={'on' if cfg.blend_intercept else 'off'}"),
        seed=cfg.seed,
        coefficients=tuple(float(c) for c in blend.coef),
    ))

    baseline = float(np.mean(
        (folds["test"].y - folds["train"].y.mean()) ** 2))
    return PipelineResult(
        members=members, blend=blend, folds=folds,
        member_val_preds=val_preds, member_test_preds=test_preds,
        blend_val_preds=blend_val, blend_test_preds=blend_test,
        report=EvalReport(tuple(rows)), baseline_test_mse=baseline,
    )
