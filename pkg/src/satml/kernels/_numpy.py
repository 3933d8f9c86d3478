"""Pure-numpy reference implementations of the hot kernels.

These are the fallback path when numba is unavailable or disabled via
SATML_NUMBA=0.  The accumulation order matches the numba loops (cumsum is a
sequential running sum), so both backends agree on split choices.
"""

import numpy as np

NO_SPLIT = -1


def best_split_feature(x_sorted, y_sorted, min_leaf):
    """Best split of one feature, exhaustive over midpoints of distinct values.

    x_sorted: (n,) ascending feature values.
    y_sorted: (n, t) targets in the same order.
    Returns (pos, threshold, gain) where pos is the left-side row count,
    or (NO_SPLIT, 0.0, -inf) when no admissible split exists.  Gain is the
    total sum-of-squares reduction over all targets; ties keep the lowest
    threshold.
    """
    n = x_sorted.shape[0]
    if n < 2 * min_leaf:
        return NO_SPLIT, 0.0, -np.inf
    csum = np.cumsum(y_sorted, axis=0)
    total = csum[-1]
    pos = np.arange(min_leaf, n - min_leaf + 1)
    pos = pos[x_sorted[pos - 1] < x_sorted[pos]]
    if pos.size == 0:
        return NO_SPLIT, 0.0, -np.inf
    lsum = csum[pos - 1]
    rsum = total[None, :] - lsum
    nl = pos.astype(np.float64)
    nr = n - nl
    base = np.sum(total * total) / n
    gains = np.sum(lsum * lsum, axis=1) / nl + np.sum(rsum * rsum, axis=1) / nr - base
    best = int(np.argmax(gains))  # first max -> lowest threshold
    p = int(pos[best])
    thr = 0.5 * (x_sorted[p - 1] + x_sorted[p])
    return p, float(thr), float(gains[best])


def solve_kepler(mean_anom, ecc, tol=1e-12, max_iter=50):
    """Newton solve of E - e*sin(E) = M, elementwise over arrays.

    Returns (E, converged) with converged a boolean array.
    """
    M = np.asarray(mean_anom, dtype=np.float64)
    e = np.broadcast_to(np.asarray(ecc, dtype=np.float64), M.shape)
    E = M + e * np.sin(M)
    ok = np.zeros(M.shape, dtype=np.bool_)
    for _ in range(max_iter):
        delta = (E - e * np.sin(E) - M) / (1.0 - e * np.cos(E))
        E = E - delta
        ok |= np.abs(delta) < tol
        if ok.all():
            break
    return E, ok
