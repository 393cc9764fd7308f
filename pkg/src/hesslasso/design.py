"""Design matrices, dense or sparse, with implicit standardization.

Dense inputs are standardized eagerly (the array is transformed in place of a
copy). Sparse inputs are never densified: centering and scaling are applied
virtually, i.e. column j represents (raw_j - center_j) / scale_j and every
product accounts for the correction terms analytically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


def _as_index(idx, p):
    if idx is None:
        return np.arange(p, dtype=np.int64)
    idx = np.asarray(idx)
    if idx.dtype == bool:
        return np.flatnonzero(idx).astype(np.int64)
    return idx.astype(np.int64, copy=False)


class DenseDesign:
    """Column-standardized dense design matrix."""

    is_sparse = False

    def __init__(self, X):
        self.X = np.asfortranarray(X, dtype=np.float64)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def density(self):
        return 1.0

    def column_dots(self, v, idx=None):
        """X[:, idx].T @ v."""
        idx = _as_index(idx, self.p)
        if idx.size == 0:
            return np.zeros(0)
        if 2 * idx.size >= self.p:
            # one full GEMV beats materializing a near-full column slice
            return (self.X.T @ v)[idx]
        return self.X[:, idx].T @ v

    def matvec(self, vals, idx):
        """X[:, idx] @ vals as a dense n-vector."""
        idx = _as_index(idx, self.p)
        if idx.size == 0:
            return np.zeros(self.n)
        return self.X[:, idx] @ vals

    def gram_block(self, rows, cols, weights=None):
        """X[:, rows].T @ D(w) @ X[:, cols]."""
        rows = _as_index(rows, self.p)
        cols = _as_index(cols, self.p)
        if rows.size == 0 or cols.size == 0:
            return np.zeros((rows.size, cols.size))
        Xa = self.X[:, rows]
        Xb = self.X[:, cols]
        if weights is None:
            return Xa.T @ Xb
        return (Xa * weights[:, None]).T @ Xb

    def column_sq_norms(self, idx=None, weights=None):
        """sum_i w_i x_ij**2 per column."""
        idx = _as_index(idx, self.p)
        Xs = self.X[:, idx]
        if weights is None:
            return np.einsum("ij,ij->j", Xs, Xs)
        return np.einsum("i,ij,ij->j", weights, Xs, Xs)

    def working_columns(self, idx):
        """Materialized column block for the CD kernel (Fortran order)."""
        idx = _as_index(idx, self.p)
        return np.asfortranarray(self.X[:, idx])


class SparseDesign:
    """CSC design with virtual centering/scaling (never densified)."""

    is_sparse = True

    def __init__(self, X, centers=None, scales=None):
        X = sp.csc_matrix(X, dtype=np.float64)
        X.sort_indices()
        self.raw = X
        self.centers = (
            np.zeros(X.shape[1]) if centers is None else np.asarray(centers, dtype=np.float64)
        )
        self.scales = (
            np.ones(X.shape[1]) if scales is None else np.asarray(scales, dtype=np.float64)
        )

    @property
    def n(self):
        return self.raw.shape[0]

    @property
    def p(self):
        return self.raw.shape[1]

    @property
    def density(self):
        n, p = self.raw.shape
        return self.raw.nnz / float(max(n * p, 1))

    def column_dots(self, v, idx=None):
        idx = _as_index(idx, self.p)
        if idx.size == 0:
            return np.zeros(0)
        if 2 * idx.size >= self.p:
            raw_dot = (self.raw.T @ v)[idx]
        else:
            raw_dot = self.raw[:, idx].T @ v
        return (raw_dot - self.centers[idx] * float(np.sum(v))) / self.scales[idx]

    def matvec(self, vals, idx):
        idx = _as_index(idx, self.p)
        if idx.size == 0:
            return np.zeros(self.n)
        scaled = np.asarray(vals, dtype=np.float64) / self.scales[idx]
        out = np.asarray(self.raw[:, idx] @ scaled).ravel()
        out -= float(np.dot(self.centers[idx], scaled))
        return out

    def gram_block(self, rows, cols, weights=None):
        rows = _as_index(rows, self.p)
        cols = _as_index(cols, self.p)
        if rows.size == 0 or cols.size == 0:
            return np.zeros((rows.size, cols.size))
        A = self.raw[:, rows]
        B = self.raw[:, cols]
        w = np.ones(self.n) if weights is None else np.asarray(weights, dtype=np.float64)
        Aw = A.multiply(w[:, None]).tocsc()
        raw_ab = np.asarray((Aw.T @ B).todense())
        swa = np.asarray(Aw.sum(axis=0)).ravel()          # A.T @ w
        swb = np.asarray((B.T @ w)).ravel()
        sw = float(np.sum(w))
        ca, cb = self.centers[rows], self.centers[cols]
        G = raw_ab - np.outer(ca, swb) - np.outer(swa, cb) + sw * np.outer(ca, cb)
        G /= np.outer(self.scales[rows], self.scales[cols])
        return G

    def column_sq_norms(self, idx=None, weights=None):
        idx = _as_index(idx, self.p)
        A = self.raw[:, idx]
        w = np.ones(self.n) if weights is None else np.asarray(weights, dtype=np.float64)
        raw2 = np.asarray((A.power(2).T @ w)).ravel()
        raw1 = np.asarray((A.T @ w)).ravel()
        sw = float(np.sum(w))
        c = self.centers[idx]
        return (raw2 - 2.0 * c * raw1 + sw * c * c) / self.scales[idx] ** 2

    def working_columns(self, idx):
        """Sliced CSC arrays plus per-column centers/scales for the kernel."""
        idx = _as_index(idx, self.p)
        sub = self.raw[:, idx].tocsc()
        sub.sort_indices()
        return (
            sub.data,
            sub.indices.astype(np.int64),
            sub.indptr.astype(np.int64),
            np.ascontiguousarray(self.centers[idx]),
            np.ascontiguousarray(self.scales[idx]),
        )


def as_design(X):
    """Wrap a raw matrix in a design (no standardization applied)."""
    if isinstance(X, (DenseDesign, SparseDesign)):
        return X
    if sp.issparse(X):
        return SparseDesign(X)
    return DenseDesign(np.asarray(X, dtype=np.float64))


@dataclass
class StandardizedData:
    """A standardized problem instance.

    ``design`` holds the (possibly virtually) standardized predictors, ``y``
    the response, centered iff the loss is least squares. ``centers`` /
    ``scales`` allow back-transformation to the original scale.
    """

    design: object
    y: np.ndarray
    centers: np.ndarray
    scales: np.ndarray
    constant_mask: np.ndarray
    y_center: float


def standardize(X, y, loss="least_squares"):
    """Center and scale predictors by mean and uncorrected standard deviation.

    The response is centered only for least squares. Constant columns get
    scale 1 and are flagged; they can never enter the model.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    if sp.issparse(X):
        X = sp.csc_matrix(X, dtype=np.float64)
        n, p = X.shape
        if n < 2:
            raise ValueError("standardize requires at least 2 rows")
        if n != y.size:
            raise ValueError("X and y have incompatible shapes")
        centers = np.asarray(X.mean(axis=0)).ravel()
        ex2 = np.asarray(X.power(2).mean(axis=0)).ravel()
        var = np.maximum(ex2 - centers**2, 0.0)
        sd = np.sqrt(var)
        constant = sd <= 1e-12 * np.maximum(1.0, np.sqrt(ex2))
        scales = np.where(constant, 1.0, sd)
        design = SparseDesign(X, centers, scales)
    else:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        n, p = X.shape
        if n < 2:
            raise ValueError("standardize requires at least 2 rows")
        if n != y.size:
            raise ValueError("X and y have incompatible shapes")
        centers = X.mean(axis=0)
        sd = np.sqrt(np.mean((X - centers) ** 2, axis=0))
        constant = (X.max(axis=0) - X.min(axis=0)) == 0.0
        scales = np.where(constant, 1.0, sd)
        design = DenseDesign((X - centers) / scales)

    y_center = 0.0
    if loss == "least_squares":
        y_center = float(np.mean(y))
        y = y - y_center
    return StandardizedData(design, y, centers, scales, constant, y_center)
