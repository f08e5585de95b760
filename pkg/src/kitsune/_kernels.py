"""Compiled per-instance kernels for the autoencoder ensemble.

Every autoencoder lives in one contiguous block of a shared float64 buffer::

    W (h*d, row-major h x d) | b_enc (h) | b_dec (d) | norm_min (d) | norm_max (d)

A model is described by an int64 layout array with one row ``(d, h, offset,
index_offset)`` per ensemble member plus a final row for the output
autoencoder. Keeping everything in a few flat arrays keeps the call overhead
per packet constant, so runtime tracks the multiply-accumulate count.

``counters[0]`` accumulates forward-pass multiply-accumulates.
"""

import math

import numpy as np
from numba import njit

BLOCK_FIELDS = 5


def block_size(d, h):
    return h * d + h + 3 * d


@njit(cache=True, inline="always")
def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


@njit(cache=True)
def normalize(P, o, h, d, src, dst, learn):
    mn = o + h * d + h + d
    mx = mn + d
    for b in range(d):
        v = src[b]
        if learn:
            if v < P[mn + b]:
                P[mn + b] = v
            if v > P[mx + b]:
                P[mx + b] = v
        span = P[mx + b] - P[mn + b]
        if span > 0.0:
            dst[b] = (v - P[mn + b]) / span
        else:
            dst[b] = 0.0


@njit(cache=True)
def forward(P, o, h, d, v, H, Y, counters):
    be = o + h * d
    bd = be + h
    for a in range(h):
        s = P[be + a]
        row = o + a * d
        for b in range(d):
            s += P[row + b] * v[b]
        H[a] = _sigmoid(s)
    for b in range(d):
        Y[b] = P[bd + b]
    for a in range(h):
        ha = H[a]
        row = o + a * d
        for b in range(d):
            Y[b] += P[row + b] * ha
    for b in range(d):
        Y[b] = _sigmoid(Y[b])
    counters[0] += 2 * h * d


@njit(cache=True)
def rmse(v, Y, d):
    e = 0.0
    for b in range(d):
        r = v[b] - Y[b]
        e += r * r
    return math.sqrt(e / d)


@njit(cache=True)
def deltas(P, o, h, d, v, H, Y, dO, dH):
    """Error terms of the loss ``sum((y - v)**2) / d`` at both layers."""
    scale = 2.0 / d
    for b in range(d):
        y = Y[b]
        dO[b] = scale * (y - v[b]) * y * (1.0 - y)
    for a in range(h):
        s = 0.0
        row = o + a * d
        for b in range(d):
            s += P[row + b] * dO[b]
        dH[a] = s * H[a] * (1.0 - H[a])


@njit(cache=True)
def apply_update(P, o, h, d, v, H, dO, dH, lr):
    # tied weights: decoder-path and encoder-path gradients share one matrix
    be = o + h * d
    bd = be + h
    for a in range(h):
        ha = H[a]
        da = dH[a]
        row = o + a * d
        for b in range(d):
            P[row + b] -= lr * (ha * dO[b] + da * v[b])
        P[be + a] -= lr * da
    for b in range(d):
        P[bd + b] -= lr * dO[b]


@njit(cache=True)
def sgd_step(P, o, h, d, v, H, Y, dO, dH, lr, counters):
    forward(P, o, h, d, v, H, Y, counters)
    err = rmse(v, Y, d)
    deltas(P, o, h, d, v, H, Y, dO, dH)
    apply_update(P, o, h, d, v, H, dO, dH, lr)
    return err


@njit(cache=True)
def _scratch_len(L):
    m = 1
    for i in range(L.shape[0]):
        if L[i, 0] > m:
            m = L[i, 0]
    return m


@njit(cache=True)
def train_step(P, L, idx, x, lr, counters, zn):
    k = L.shape[0] - 1
    n = _scratch_len(L)
    V = np.empty(n)
    VN = np.empty(n)
    H = np.empty(n)
    Y = np.empty(n)
    dO = np.empty(n)
    dH = np.empty(n)
    Z = np.empty(k)
    for i in range(k):
        d = L[i, 0]
        h = L[i, 1]
        o = L[i, 2]
        io = L[i, 3]
        for b in range(d):
            V[b] = x[idx[io + b]]
        normalize(P, o, h, d, V, VN, True)
        Z[i] = sgd_step(P, o, h, d, VN, H, Y, dO, dH, lr, counters)
    h = L[k, 1]
    o = L[k, 2]
    normalize(P, o, h, k, Z, zn, True)
    return sgd_step(P, o, h, k, zn, H, Y, dO, dH, lr, counters)


@njit(cache=True)
def execute_step(P, L, idx, x, counters):
    return execute_into(P, L, idx, x, counters, np.empty(L.shape[0] - 1))


@njit(cache=True)
def execute_into(P, L, idx, x, counters, zn):
    k = L.shape[0] - 1
    n = _scratch_len(L)
    V = np.empty(n)
    VN = np.empty(n)
    H = np.empty(n)
    Y = np.empty(n)
    Z = np.empty(k)
    for i in range(k):
        d = L[i, 0]
        h = L[i, 1]
        o = L[i, 2]
        io = L[i, 3]
        for b in range(d):
            V[b] = x[idx[io + b]]
        normalize(P, o, h, d, V, VN, False)
        forward(P, o, h, d, VN, H, Y, counters)
        Z[i] = rmse(VN, Y, d)
    h = L[k, 1]
    o = L[k, 2]
    normalize(P, o, h, k, Z, zn, False)
    forward(P, o, h, k, zn, H, Y, counters)
    return rmse(zn, Y, k)


@njit(cache=True)
def train_many(P, L, idx, X, lr, counters, out):
    zn = np.empty(L.shape[0] - 1)
    for r in range(X.shape[0]):
        out[r] = train_step(P, L, idx, X[r], lr, counters, zn)


@njit(cache=True)
def execute_many(P, L, idx, X, counters, out):
    zn = np.empty(L.shape[0] - 1)
    for r in range(X.shape[0]):
        out[r] = execute_into(P, L, idx, X[r], counters, zn)
