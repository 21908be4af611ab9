# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled factorization machine kernels.

Same update order and arithmetic as the pure-Python twin psychfm._fm_py;
see that module for the derivations.
"""

import numpy as np

BACKEND_NAME = "cython"


def predict_batch(double w0,
                  double[::1] w,
                  double[:, ::1] V,
                  long[::1] indices,
                  long[::1] indptr,
                  double[::1] out):
    cdef Py_ssize_t m = indptr.shape[0] - 1
    cdef Py_ssize_t k = V.shape[1]
    cdef Py_ssize_t j, t, f, i
    cdef double pred, s, sq, v
    for j in range(m):
        pred = w0
        for t in range(indptr[j], indptr[j + 1]):
            pred += w[indices[t]]
        for f in range(k):
            s = 0.0
            sq = 0.0
            for t in range(indptr[j], indptr[j + 1]):
                v = V[indices[t], f]
                s += v
                sq += v * v
            pred += 0.5 * (s * s - sq)
        out[j] = pred


def sgd_epoch(double w0,
              double[::1] w,
              double[:, ::1] V,
              long[::1] indices,
              long[::1] indptr,
              double[::1] y,
              long[::1] order,
              double lr, double reg_w, double reg_v):
    cdef Py_ssize_t k = V.shape[1]
    cdef Py_ssize_t jj, j, t, f, i
    cdef double sq_sum = 0.0
    cdef double pred, err, g, sf, sq, v
    cdef double[::1] s = np.empty(k)
    for jj in range(order.shape[0]):
        j = order[jj]
        pred = w0
        for t in range(indptr[j], indptr[j + 1]):
            pred += w[indices[t]]
        for f in range(k):
            sf = 0.0
            sq = 0.0
            for t in range(indptr[j], indptr[j + 1]):
                v = V[indices[t], f]
                sf += v
                sq += v * v
            s[f] = sf
            pred += 0.5 * (sf * sf - sq)
        err = pred - y[j]
        sq_sum += err * err
        g = 2.0 * err
        w0 -= lr * g
        for t in range(indptr[j], indptr[j + 1]):
            i = indices[t]
            w[i] -= lr * (g + 2.0 * reg_w * w[i])
        for t in range(indptr[j], indptr[j + 1]):
            i = indices[t]
            for f in range(k):
                v = V[i, f]
                V[i, f] = v - lr * (g * (s[f] - v) + 2.0 * reg_v * v)
    return w0, sq_sum


def als_sweep(double w0,
              double[::1] w,
              double[:, ::1] V,
              long[::1] feat_samples,
              long[::1] feat_ptr,
              double[::1] y,
              double[::1] e,
              double[:, ::1] q,
              double reg_w, double reg_v):
    cdef Py_ssize_t m = y.shape[0]
    cdef Py_ssize_t n = V.shape[0]
    cdef Py_ssize_t k = V.shape[1]
    cdef Py_ssize_t i, j, f, t, lo, hi
    cdef double delta, old, new, num, den, d, h

    delta = 0.0
    for j in range(m):
        delta += e[j]
    delta = -delta / m
    w0 += delta
    for j in range(m):
        e[j] += delta

    for i in range(n):
        lo = feat_ptr[i]
        hi = feat_ptr[i + 1]
        if hi == lo:
            continue
        old = w[i]
        num = 0.0
        for t in range(lo, hi):
            num += old - e[feat_samples[t]]
        new = num / ((hi - lo) + reg_w)
        d = new - old
        w[i] = new
        for t in range(lo, hi):
            e[feat_samples[t]] += d

    for f in range(k):
        for i in range(n):
            lo = feat_ptr[i]
            hi = feat_ptr[i + 1]
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
