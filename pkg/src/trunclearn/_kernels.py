"""Compiled inner loops for SGD on linear models.

The scalar loss formulas mirror :mod:`trunclearn.truncation` and
:mod:`trunclearn.loss`; tests compare both paths.
"""
from math import exp, lgamma, log

import numpy as np
from numba import njit

TRUNC_CODES = {"log": 0, "catoni": 1, "cubic": 2}
BASE_CODES = {"square": 0, "absolute": 1, "huber": 2, "eps_insensitive": 3, "pinball": 4}


@njit(cache=True)
def _phi_prime(code, alpha, m, u):
    t = u / alpha
    if code == 0:
        return 1.0 / (1.0 + t)
    if code == 2:
        if t < 1.0:
            return (1.0 - t) * (1.0 - t)
        return 0.0
    if t == 0.0:
        return 1.0
    # catoni: 1 - (t^m/m!) / sum_{k<=m} t^k/k!, in log space
    lt = log(t)
    top = m * lt - lgamma(m + 1.0)
    big = 0.0
    for k in range(1, m + 1):
        v = k * lt - lgamma(k + 1.0)
        if v > big:
            big = v
    s = exp(-big)
    for k in range(1, m + 1):
        s += exp(k * lt - lgamma(k + 1.0) - big)
    return 1.0 - exp(top - big) / s


@njit(cache=True)
def _base(code, p, r):
    """Return (value, subgradient) of the base loss at residual r = z - y."""
    if code == 0:
        return r * r, 2.0 * r
    a = abs(r)
    sg = 0.0
    if r > 0:
        sg = 1.0
    elif r < 0:
        sg = -1.0
    if code == 1:
        return a, sg
    if code == 2:
        if a <= p:
            return 0.5 * r * r, r
        return p * (a - 0.5 * p), p * sg
    if code == 3:
        if a > p:
            return a - p, sg
        return 0.0, 0.0
    if r > 0:
        return (1.0 - p) * r, 1.0 - p
    if r < 0:
        return -p * r, -p
    return 0.0, 0.0


@njit(cache=True)
def sgd_linear(X, y, w, idx, etas, bcode, bparam, tcode, alpha, m, scale, lam):
    """Run ``len(etas)`` mini-batch SGD steps in place.

    Returns the step number of the first non-finite update, or -1.
    """
    T, b = idx.shape
    d = w.shape[0]
    g = np.zeros(d)
    for t in range(T):
        for j in range(d):
            g[j] = 0.0
        for q in range(b):
            i = idx[t, q]
            z = 0.0
            for j in range(d):
                z += X[i, j] * w[j]
            val, sub = _base(bcode, bparam, z - y[i])
            c = scale * _phi_prime(tcode, alpha, m, val) * sub / b
            for j in range(d):
                g[j] += c * X[i, j]
        eta = etas[t]
        ok = True
        for j in range(d):
            w[j] -= eta * (g[j] + 2.0 * lam * w[j])
            if not np.isfinite(w[j]):
                ok = False
        if not ok:
            return t
    return -1
