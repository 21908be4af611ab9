"""Pure-Python factorization machine kernels.

Fallback twin of the compiled module psychfm._fm_cy: same update order,
same arithmetic, so the two backends agree to floating-point noise.
Inputs are CSR-style index arrays for binary feature vectors (values are
implicitly 1).
"""

import numpy as np

BACKEND_NAME = "python"


def predict_batch(w0, w, V, indices, indptr, out):
    """out[j] = w0 + sum_i w[i] + 0.5 * sum_f (S_f^2 - sum_i V[i,f]^2)."""
    k = V.shape[1]
    for j in range(len(indptr) - 1):
        act = indices[indptr[j]:indptr[j + 1]]
        pred = w0
        for i in act:
            pred += w[i]
        for f in range(k):
            s = 0.0
            sq = 0.0
            for i in act:
                v = V[i, f]
                s += v
                sq += v * v
            pred += 0.5 * (s * s - sq)
        out[j] = pred


def sgd_epoch(w0, w, V, indices, indptr, y, order, lr, reg_w, reg_v):
    """One pass of per-example squared-error SGD; returns (w0, sum sq err).

    Latent-factor gradients use the factor sums cached before any update
    within the example.
    """
    k = V.shape[1]
    sq_sum = 0.0
    s = np.empty(k)
    for j in order:
        act = indices[indptr[j]:indptr[j + 1]]
        pred = w0
        for i in act:
            pred += w[i]
        for f in range(k):
            sf = 0.0
            sq = 0.0
            for i in act:
                v = V[i, f]
                sf += v
                sq += v * v
            s[f] = sf
            pred += 0.5 * (sf * sf - sq)
        err = pred - y[j]
        sq_sum += err * err
        g = 2.0 * err
        w0 -= lr * g
        for i in act:
            w[i] -= lr * (g + 2.0 * reg_w * w[i])
        for i in act:
            for f in range(k):
                v = V[i, f]
                V[i, f] = v - lr * (g * (s[f] - v) + 2.0 * reg_v * v)
    return w0, sq_sum


def als_sweep(w0, w, V, feat_samples, feat_ptr, y, e, q, reg_w, reg_v):
    """One full coordinate sweep: w0, every w_i, every V[i,f]; returns w0.

    e holds current residuals (pred - y) and q the per-sample factor sums;
    both are maintained incrementally.  Each update is the exact minimizer
    of the ridge-penalized squared error in that coordinate, so the
    regularized objective cannot increase.
    """
    m = len(y)
    n, k = V.shape

    delta = 0.0
    for j in range(m):
        delta += e[j]
    delta = -delta / m
    w0 += delta
    for j in range(m):
        e[j] += delta

    for i in range(n):
        lo, hi = feat_ptr[i], feat_ptr[i + 1]
        cnt = hi - lo
        if cnt == 0:
            continue
        old = w[i]
        num = 0.0
        for t in range(lo, hi):
            num += old - e[feat_samples[t]]
        new = num / (cnt + reg_w)
        d = new - old
        w[i] = new
        for t in range(lo, hi):
            e[feat_samples[t]] += d

    for f in range(k):
        for i in range(n):
            lo, hi = feat_ptr[i], feat_ptr[i + 1]
            if hi == lo:
                continue
            old = V[i, f]
            num = 0.0
            den = reg_v
            for t in range(lo, hi):
                j = feat_samples[t]
                h = q[j, f] - old
                num += h * (old * h - e[j])
                den += h * h
            if den == 0.0:
                continue
            new = num / den
            d = new - old
            V[i, f] = new
            for t in range(lo, hi):
                j = feat_samples[t]
                e[j] += d * (q[j, f] - old)
                q[j, f] += d
    return w0
