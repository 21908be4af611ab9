"""Degree-2 factorization machine for sparse binary identity inputs.

Prediction is w0 + sum of active weights + pairwise interactions, where
the interaction weight of features i and j is <V_i, V_j>.  The pairwise
sum is computed in linear time via 0.5 * sum_f (S_f^2 - sum_i V_if^2).
Training is plain SGD or coordinate-wise ALS; the hot loops live in the
selected kernel backend (compiled or pure Python).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .errors import ModelFormatError, TrainingDivergedError, ValidationError
from .features import SparseVector


class Solver(enum.Enum):
    SGD = "sgd"
    ALS = "als"


@dataclass
class FMTrainConfig:
    k: int = 8
    learning_rate: float = 0.01
    epochs: int = 200
    reg_w: float = 1e-3
    reg_v: float = 1e-3
    init_sd: float = 0.01
    seed: int = 0
    solver: Solver = Solver.SGD

    def __post_init__(self):
        if self.k < 1 or self.epochs < 0:
            raise ValidationError("k must be >= 1 and epochs >= 0")
        if self.learning_rate <= 0 or self.init_sd <= 0:
            raise ValidationError("learning_rate and init_sd must be > 0")
        if self.reg_w < 0 or self.reg_v < 0:
            raise ValidationError("regularization must be >= 0")


@dataclass
class FMModel:
    w0: float
    w: np.ndarray  # (n,)
    V: np.ndarray  # (n, k)

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=float)
        self.V = np.ascontiguousarray(self.V, dtype=float)
        if self.V.ndim != 2 or self.V.shape[0] != self.w.shape[0]:
            raise ValidationError("V must be n x k with n matching w")
        if self.n < 1 or self.k < 1:
            raise ValidationError("model needs n >= 1 and k >= 1")
        if not (math.isfinite(self.w0) and np.all(np.isfinite(self.w))
                and np.all(np.isfinite(self.V))):
            raise ValidationError("non-finite model parameter")

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def k(self) -> int:
        return self.V.shape[1]


def _csr(xs, n):
    """Pack active-index lists into (indices, indptr) int64 arrays."""
    indptr = np.zeros(len(xs) + 1, dtype=np.int64)
    chunks = []
    for j, x in enumerate(xs):
        act = x.active if isinstance(x, SparseVector) else tuple(x)
        if isinstance(x, SparseVector) and x.length != n:
            raise ValidationError(f"input length {x.length} != model n {n}")
        if any(not (0 <= i < n) for i in act):
            raise ValidationError(f"active index outside [0, {n})")
        chunks.append(np.asarray(act, dtype=np.int64))
        indptr[j + 1] = indptr[j] + len(act)
    indices = (np.concatenate(chunks) if chunks
               else np.zeros(0, dtype=np.int64))
    return indices, indptr


def fm_predict(m: FMModel, x: SparseVector) -> float:
    return float(fm_predict_batch(m, [x])[0])


def fm_predict_batch(m: FMModel, xs) -> np.ndarray:
    indices, indptr = _csr(xs, m.n)
    out = np.empty(len(xs))
    kernels.predict_batch(m.w0, m.w, m.V, indices, indptr, out)
    return out


def fm_gradients(m: FMModel, x: SparseVector, y: float):
    """Gradients of the unregularized per-example squared error.

    Returns (d_w0, d_w, d_V) dense arrays; nonzero only at active indices.
    """
    err = fm_predict(m, x) - y
    g = 2.0 * err
    d_w = np.zeros(m.n)
    d_V = np.zeros_like(m.V)
    act = list(x.active)
    s = m.V[act].sum(axis=0)
    for i in act:
        d_w[i] = g
        d_V[i] = g * (s - m.V[i])
    return g, d_w, d_V


def fm_init(n: int, cfg: FMTrainConfig) -> FMModel:
    rng = np.random.default_rng(cfg.seed)
    V = rng.normal(0.0, cfg.init_sd, size=(n, cfg.k))
    return FMModel(0.0, np.zeros(n), V)


def fm_train_sgd(data, cfg: FMTrainConfig) -> FMModel:
    """data: list of (SparseVector, target).  Deterministic for a fixed seed.

    reg_w and reg_v weight the summed cost sum e^2 + reg*||params||^2, the
    same objective ALS sweeps minimize; per-example steps therefore carry a
    penalty scaled by 1/m so both solvers target one optimum.
    """
    xs = [x for x, _ in data]
    y = np.array([t for _, t in data], dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValidationError("non-finite target")
    n = xs[0].length
    indices, indptr = _csr(xs, n)
    m = fm_init(n, cfg)
    w0 = m.w0
    shuffle_rng = np.random.default_rng([cfg.seed, 0x73686566])  # "shuf" stream
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(xs)).astype(np.int64)
        w0, sq_sum = kernels.sgd_epoch(
            w0, m.w, m.V, indices, indptr, y, order,
            cfg.learning_rate, cfg.reg_w / len(xs), cfg.reg_v / len(xs),
        )
        if not math.isfinite(sq_sum):
            raise TrainingDivergedError(epoch)
    return FMModel(w0, m.w, m.V)


def _regularized_objective(w0, w, V, indices, indptr, y, reg_w, reg_v):
    preds = np.empty(len(y))
    kernels.predict_batch(w0, w, V, indices, indptr, preds)
    return (float(np.sum((preds - y) ** 2))
            + reg_w * float(np.sum(w ** 2))
            + reg_v * float(np.sum(V ** 2)))


def fm_train_als(data, cfg: FMTrainConfig) -> FMModel:
    """Coordinate-wise closed-form sweeps; the ridge objective never rises."""
    xs = [x for x, _ in data]
    y = np.array([t for _, t in data], dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValidationError("non-finite target")
    n = xs[0].length
    indices, indptr = _csr(xs, n)

    # transpose: sample lists per feature
    counts = np.bincount(indices, minlength=n)
    feat_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=feat_ptr[1:])
    feat_samples = np.empty(len(indices), dtype=np.int64)
    cursor = feat_ptr[:-1].copy()
    for j in range(len(xs)):
        for t in range(indptr[j], indptr[j + 1]):
            i = indices[t]
            feat_samples[cursor[i]] = j
            cursor[i] += 1

    m = fm_init(n, cfg)
    w0 = m.w0
    e = np.empty(len(y))
    kernels.predict_batch(w0, m.w, m.V, indices, indptr, e)
    e -= y
    q = np.zeros((len(y), cfg.k))
    for j in range(len(xs)):
        act = indices[indptr[j]:indptr[j + 1]]
        q[j] = m.V[act].sum(axis=0)
    q = np.ascontiguousarray(q)

    prev = _regularized_objective(w0, m.w, m.V, indices, indptr, y,
                                  cfg.reg_w, cfg.reg_v)
    for sweep in range(cfg.epochs):
        w0 = kernels.als_sweep(w0, m.w, m.V, feat_samples, feat_ptr, y, e, q,
                               cfg.reg_w, cfg.reg_v)
        obj = _regularized_objective(w0, m.w, m.V, indices, indptr, y,
                                     cfg.reg_w, cfg.reg_v)
        if not math.isfinite(obj):
            raise TrainingDivergedError(sweep)
        if obj > prev + 1e-8 * max(1.0, prev):
            raise RuntimeError(
                f"ALS objective rose at sweep {sweep}: {prev} -> {obj}"
            )
        prev = obj
    return FMModel(w0, m.w, m.V)


def fm_train(data, cfg: FMTrainConfig) -> FMModel:
    if cfg.solver is Solver.ALS:
        return fm_train_als(data, cfg)
    return fm_train_sgd(data, cfg)


# ---------------------------------------------------------------------------
# Serialization

_HEADER = "psychfm-model v1 fm"


def fm_save(m: FMModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_HEADER + "\n")
        fh.write(f"{m.n} {m.k}\n")
        fh.write(format(m.w0, ".17g") + "\n")
        for wi in m.w:
            fh.write(format(wi, ".17g") + "\n")
        for row in m.V:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def fm_load(path) -> FMModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _HEADER:
        raise ModelFormatError(f"bad header in {path}")
    try:
        n, k = (int(tok) for tok in lines[1].split())
        if n < 1 or k < 1:
            raise ValidationError(f"invalid dimensions n={n} k={k}")
        if len(lines) < 2 + 1 + n + n:
            raise ModelFormatError(f"truncated model file {path}")
        w0 = float(lines[2])
        w = np.array([float(v) for v in lines[3:3 + n]])
        V = np.array([[float(v) for v in lines[3 + n + i].split()]
                      for i in range(n)])
        if V.shape != (n, k):
            raise ModelFormatError(f"V block shape {V.shape} != ({n}, {k})")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, (ModelFormatError, ValidationError)):
            raise
        raise ModelFormatError(f"unparseable model file {path}: {exc}") from exc
    return FMModel(w0, w, V)
