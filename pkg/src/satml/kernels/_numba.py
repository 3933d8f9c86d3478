"""Numba-compiled versions of the hot kernels.

Loop order mirrors _numpy.py so both backends pick identical splits.
"""

import numpy as np
from numba import njit

NO_SPLIT = -1


@njit(cache=True)
def _best_split_core(x_sorted, y_sorted, min_leaf):
    n = x_sorted.shape[0]
    t = y_sorted.shape[1]
    if n < 2 * min_leaf:
        return NO_SPLIT, 0.0, -np.inf
    total = np.zeros(t)
    for i in range(n):
        for j in range(t):
            total[j] += y_sorted[i, j]
    base = 0.0
    for j in range(t):
        base += total[j] * total[j]
    base /= n

    lsum = np.zeros(t)
    best_pos = NO_SPLIT
    best_gain = -np.inf
    for p in range(1, n - min_leaf + 1):
        for j in range(t):
            lsum[j] += y_sorted[p - 1, j]
        if p < min_leaf or x_sorted[p - 1] >= x_sorted[p]:
            continue
        ls = 0.0
        rs = 0.0
        for j in range(t):
            ls += lsum[j] * lsum[j]
            r = total[j] - lsum[j]
            rs += r * r
        gain = ls / p + rs / (n - p) - base
        if gain > best_gain:
            best_gain = gain
            best_pos = p
    if best_pos == NO_SPLIT:
        return NO_SPLIT, 0.0, -np.inf
    thr = 0.5 * (x_sorted[best_pos - 1] + x_sorted[best_pos])
    return best_pos, thr, best_gain


def best_split_feature(x_sorted, y_sorted, min_leaf):
    pos, thr, gain = _best_split_core(
        np.ascontiguousarray(x_sorted), np.ascontiguousarray(y_sorted), min_leaf
    )
    return int(pos), float(thr), float(gain)


@njit(cache=True)
def _kepler_core(M, e, tol, max_iter):
    n = M.shape[0]
    E = np.empty(n)
    ok = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        Ei = M[i] + e[i] * np.sin(M[i])
        for _ in range(max_iter):
            delta = (Ei - e[i] * np.sin(Ei) - M[i]) / (1.0 - e[i] * np.cos(Ei))
            Ei -= delta
            if abs(delta) < tol:
                ok[i] = True
                break
        E[i] = Ei
    return E, ok


def solve_kepler(mean_anom, ecc, tol=1e-12, max_iter=50):
    M = np.atleast_1d(np.asarray(mean_anom, dtype=np.float64))
    e = np.broadcast_to(np.asarray(ecc, dtype=np.float64), M.shape)
    E, ok = _kepler_core(np.ascontiguousarray(M.ravel()),
                         np.ascontiguousarray(e.ravel()), tol, max_iter)
    shape = np.asarray(mean_anom, dtype=np.float64).shape
    return E.reshape(shape), ok.reshape(shape)
