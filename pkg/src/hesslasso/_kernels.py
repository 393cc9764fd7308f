"""JIT-compiled coordinate-descent epochs.

One shuffled sweep of soft-threshold updates over the working columns,
maintaining the (working) residual in place. The sparse variant operates on
raw CSC data with virtual centering: the rank-one correction from centering
is carried as a scalar offset so updates stay O(nnz(column)).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def epoch_dense(X, w, r, beta, colsq, lam, order):
    """One sweep over dense columns; r and beta updated in place."""
    n = X.shape[0]
    for t in range(order.size):
        j = order[t]
        h = colsq[j]
        if h <= 1e-12:
            continue
        g = 0.0
        for i in range(n):
            g += X[i, j] * w[i] * r[i]
        b_new = _soft(h * beta[j] + g, lam) / h
        d = b_new - beta[j]
        if d != 0.0:
            for i in range(n):
                r[i] -= d * X[i, j]
            beta[j] = b_new


@njit(cache=True)
def epoch_sparse(data, indices, indptr, centers, scales, w, rvec, roff_box,
                 beta, colsq, lam, order):
    """One sweep over CSC columns with virtual centering.

    The actual residual is rvec + roff * 1; roff absorbs the centering
    rank-one updates and is carried in roff_box[0].
    """
    n = rvec.size
    sw = 0.0
    swr = 0.0
    for i in range(n):
        sw += w[i]
        swr += w[i] * rvec[i]
    roff = roff_box[0]
    for t in range(order.size):
        j = order[t]
        h = colsq[j]
        if h <= 1e-12:
            continue
        a0, a1 = indptr[j], indptr[j + 1]
        dot_wr = 0.0
        dot_w = 0.0
        for k in range(a0, a1):
            i = indices[k]
            v = data[k]
            dot_wr += v * w[i] * rvec[i]
            dot_w += v * w[i]
        g = (dot_wr + roff * dot_w - centers[j] * (swr + roff * sw)) / scales[j]
        b_new = _soft(h * beta[j] + g, lam) / h
        d = b_new - beta[j]
        if d != 0.0:
            ds = d / scales[j]
            for k in range(a0, a1):
                rvec[indices[k]] -= ds * data[k]
            swr -= ds * dot_w
            roff += d * centers[j] / scales[j]
            beta[j] = b_new
    roff_box[0] = roff


def warmup():
    """Force compilation of both kernels (first call pays the JIT cost)."""
    X = np.zeros((2, 1), order="F")
    epoch_dense(X, np.ones(2), np.zeros(2), np.zeros(1), np.ones(1), 1.0,
                np.zeros(1, dtype=np.int64))
    epoch_sparse(np.zeros(1), np.zeros(1, dtype=np.int64),
                 np.zeros(2, dtype=np.int64), np.zeros(1), np.ones(1),
                 np.ones(2), np.zeros(2), np.zeros(1), np.zeros(1),
                 np.ones(1), 1.0, np.zeros(1, dtype=np.int64))
