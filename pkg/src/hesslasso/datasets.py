"""Synthetic problem generation and libsvm-format ingestion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

RESPONSES = ("gaussian", "bernoulli-logistic", "poisson")

# keeps Poisson counts finite at desk scale
_POISSON_ETA_CLIP = 30.0


@dataclass
class SimSpec:
    """Simulation settings: compound-symmetric rows, s unit coefficients."""

    n: int
    p: int
    rho: float = 0.0
    s: int = 5
    snr: float = 1.0
    seed: int = 0
    response: str = "gaussian"

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must be in [0, 1)")
        if self.s > self.p:
            raise ValueError("s cannot exceed p")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if self.response not in RESPONSES:
            raise ValueError(f"unknown response kind {self.response!r}")


def support_indices(p, s):
    """s support positions spread evenly over {0, ..., p-1}."""
    return (np.arange(s, dtype=np.int64) * p) // max(s, 1)


def simulate(spec: SimSpec):
    """Draw (X, y, beta_true) with rows ~ N(0, (1-rho) I + rho 11').

    The square root of the compound-symmetric covariance has the closed form
    sqrt(1-rho) I + ((sqrt(1-rho+p rho) - sqrt(1-rho)) / p) 11', so sampling
    is O(np) with no factorization.
    """
    rng = np.random.default_rng(spec.seed)
    n, p, rho = spec.n, spec.p, spec.rho
    Z = rng.standard_normal((n, p))
    if rho > 0:
        shift = (np.sqrt(1.0 - rho + p * rho) - np.sqrt(1.0 - rho)) / p
        X = np.sqrt(1.0 - rho) * Z + shift * Z.sum(axis=1, keepdims=True)
    else:
        X = Z

    beta = np.zeros(p)
    if spec.s > 0:
        beta[support_indices(p, spec.s)] = 1.0
    eta = X @ beta

    if spec.response == "gaussian":
        # beta' Sigma beta for compound symmetry: (1-rho)||b||^2 + rho (sum b)^2
        signal = (1.0 - rho) * float(beta @ beta) + rho * float(beta.sum()) ** 2
        sigma = np.sqrt(signal / spec.snr)
        y = eta + sigma * rng.standard_normal(n)
    elif spec.response == "bernoulli-logistic":
        prob = 1.0 / (1.0 + np.exp(-eta))
        y = rng.binomial(1, prob).astype(np.float64)
    else:
        mu = np.exp(np.clip(eta, -_POISSON_ETA_CLIP, _POISSON_ETA_CLIP))
        y = rng.poisson(mu).astype(np.float64)
    return X, y, beta


def response_for_loss(loss):
    return {
        "least_squares": "gaussian",
        "logistic": "bernoulli-logistic",
        "poisson": "poisson",
    }[loss]


def load_libsvm(path, loss=None):
    """Read `label idx:val ...` lines into a CSC matrix and label vector.

    Indices are 1-based and must be strictly increasing per line; the number
    of columns is the largest index seen. For the logistic loss, {-1, +1}
    labels are mapped to {0, 1}.
    """
    labels = []
    rows, cols, vals = [], [], []
    n_lines = 0
    with open(path, "r") as fh:
        for ln, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise ValueError(f"{path}: line {ln}: bad label {tokens[0]!r}")
            prev = 0
            for tok in tokens[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise ValueError(f"{path}: line {ln}: bad feature entry {tok!r}")
                if idx <= prev:
                    raise ValueError(
                        f"{path}: line {ln}: indices must be strictly increasing "
                        f"(got {idx} after {prev})"
                    )
                prev = idx
                rows.append(n_lines)
                cols.append(idx - 1)
                vals.append(val)
            n_lines += 1
    if n_lines == 0:
        raise ValueError(f"{path}: no rows")

    n_cols = (max(cols) + 1) if cols else 0
    X = sp.coo_matrix(
        (vals, (rows, cols)), shape=(n_lines, n_cols), dtype=np.float64
    ).tocsc()
    y = np.asarray(labels, dtype=np.float64)
    if loss == "logistic":
        uniq = set(np.unique(y).tolist())
        if uniq <= {-1.0, 1.0}:
            y = (y + 1.0) / 2.0
        elif not uniq <= {0.0, 1.0}:
            raise ValueError(f"{path}: labels {sorted(uniq)} not binary")
    return X, y


def write_libsvm(path, X, y):
    """Write a sparse (or dense) matrix in libsvm format, full precision."""
    X = sp.csr_matrix(X)
    with open(path, "w") as fh:
        for i in range(X.shape[0]):
            start, end = X.indptr[i], X.indptr[i + 1]
            feats = " ".join(
                f"{j + 1}:{float(v)!r}" for j, v in zip(X.indices[start:end], X.data[start:end])
            )
            fh.write(f"{float(y[i])!r} {feats}".rstrip() + "\n")


def find_duplicate_columns(X):
    """Groups of identical columns, detected by hashing the column pattern."""
    X = sp.csc_matrix(X) if sp.issparse(X) else np.asarray(X)
    groups = {}
    p = X.shape[1]
    for j in range(p):
        if sp.issparse(X):
            start, end = X.indptr[j], X.indptr[j + 1]
            key = (X.indices[start:end].tobytes(), X.data[start:end].tobytes())
        else:
            key = X[:, j].tobytes()
        groups.setdefault(key, []).append(j)
    return [g for g in groups.values() if len(g) > 1]


def drop_duplicate_columns(X):
    """Keep the first column of every duplicate group; returns (X, kept)."""
    dup = find_duplicate_columns(X)
    drop = {j for g in dup for j in g[1:]}
    p = X.shape[1]
    keep = np.array([j for j in range(p) if j not in drop], dtype=np.int64)
    if sp.issparse(X):
        return sp.csc_matrix(X)[:, keep], keep
    return np.asarray(X)[:, keep], keep
