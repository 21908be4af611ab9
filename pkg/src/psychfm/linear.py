"""Ridge and lasso regression with an unpenalized intercept.

The cost is the plain sum of squares plus lambda * sum w^2 (ridge) or
lambda * sum |w| (lasso); lambda values are therefore dataset-size
dependent and get picked on the validation fold from a log grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError, ValidationError

log = logging.getLogger(__name__)

LAMBDA_GRID = tuple(10.0 ** e for e in range(-4, 4))  # 1e-4 .. 1e3


@dataclass
class LinearModel:
    b: float
    w: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=float)
        if not (math.isfinite(self.b) and np.all(np.isfinite(self.w))):
            raise ValidationError("non-finite linear model parameter")


@dataclass
class RidgeConfig:
    lam: float = 1e-3

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError("lambda must be >= 0")


@dataclass
class LassoConfig:
    lam: float = 1e-3
    tol: float = 1e-6
    max_iter: int = 1000

    def __post_init__(self):
        if self.lam < 0 or self.tol <= 0 or self.max_iter < 1:
            raise ValidationError("bad lasso config")


def _check_xy(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0] or X.shape[0] < 1:
        raise ValidationError(f"X rows {X.shape[0]} != y length {y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("non-finite entry in X or y")
    return X, y


def ridge_fit(X, y, cfg: RidgeConfig = RidgeConfig()) -> LinearModel:
    """Closed-form solve of (Z'Z + P) beta = Z'y with P zero on the intercept."""
    X, y = _check_xy(X, y)
    m, d = X.shape
    Z = np.hstack([np.ones((m, 1)), X])
    A = Z.T @ Z
    penalty = np.full(d + 1, cfg.lam)
    penalty[0] = 0.0
    rhs = Z.T @ y
    jittered = False
    used = penalty
    try:
        beta = np.linalg.solve(A + np.diag(used), rhs)
        if not np.all(np.isfinite(beta)) or _grad_norm(A, used, rhs, beta) >= 1e-8:
            raise np.linalg.LinAlgError("ill-conditioned")
    except np.linalg.LinAlgError:
        jittered = True
        used = penalty + 1e-10
        beta = np.linalg.solve(A + np.diag(used), rhs)
        log.warning("ridge system singular at lambda=%g; solved with 1e-10 jitter",
                    cfg.lam)
    grad = _grad_norm(A, used, rhs, beta)
    if grad >= 1e-8:
        raise ValidationError(f"ridge solve residual gradient {grad} too large")
    return LinearModel(float(beta[0]), beta[1:],
                       meta={"lambda": cfg.lam, "jittered": jittered})


def _grad_norm(A, penalty, rhs, beta):
    # gradient of the cost is 2 (A beta + P beta - rhs); relative norm
    g = A @ beta + penalty * beta - rhs
    scale = max(1.0, float(np.linalg.norm(rhs)),
                float(np.linalg.norm(A) * np.linalg.norm(beta)))
    return 2.0 * float(np.linalg.norm(g)) / scale


def lasso_fit(X, y, cfg: LassoConfig = LassoConfig()) -> LinearModel:
    """Cyclic coordinate descent with soft thresholding.

    Minimizes sum (y - b - Xw)^2 + lambda sum |w|; the objective is
    non-increasing per sweep by construction.  model.meta['converged']
    records whether the tolerance was reached within max_iter sweeps.
    """
    X, y = _check_xy(X, y)
    m, d = X.shape
    col_sq = (X ** 2).sum(axis=0)
    w = np.zeros(d)
    b = float(y.mean())
    r = y - b  # residual y - b - Xw
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_iter + 1):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = w[j]
            rho = float(X[:, j] @ r) + col_sq[j] * old
            thr = cfg.lam / 2.0
            new = math.copysign(max(abs(rho) - thr, 0.0), rho) / col_sq[j]
            if new != old:
                r -= (new - old) * X[:, j]
                w[j] = new
            max_delta = max(max_delta, abs(new - old))
        new_b = b + float(r.mean())
        max_delta = max(max_delta, abs(new_b - b))
        r -= new_b - b
        b = new_b
        if max_delta < cfg.tol:
            converged = True
            break
    return LinearModel(b, w, meta={"lambda": cfg.lam, "converged": converged,
                                   "sweeps": sweeps})


def linear_predict(m: LinearModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != m.w.shape[0]:
        raise ValidationError(
            f"input width {X.shape[1]} != model width {m.w.shape[0]}"
        )
    return m.b + X @ m.w


def select_lambda(fit, X_train, y_train, X_val, y_val, grid=LAMBDA_GRID):
    """Fit at each lambda, keep the best validation MSE.  Ties favor the
    smaller lambda (grid is ascending)."""
    best = None
    for lam in grid:
        model = fit(X_train, y_train, lam)
        preds = linear_predict(model, X_val)
        err = float(np.mean((preds - np.asarray(y_val)) ** 2))
        if best is None or err < best[0]:
            best = (err, lam, model)
    return best[1], best[2]


# ---------------------------------------------------------------------------
# Serialization

_HEADER = "psychfm-model v1 linear"


def linear_save(m: LinearModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_HEADER + "\n")
        fh.write(f"{m.w.shape[0]}\n")
        fh.write(format(m.b, ".17g") + "\n")
        for wi in m.w:
            fh.write(format(wi, ".17g") + "\n")


def linear_load(path) -> LinearModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _HEADER:
        raise ModelFormatError(f"bad header in {path}")
    try:
        d = int(lines[1])
        if len(lines) < 3 + d:
            raise ModelFormatError(f"truncated model file {path}")
        b = float(lines[2])
        w = np.array([float(v) for v in lines[3:3 + d]])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"unparseable model file {path}: {exc}") from exc
    return LinearModel(b, w)
