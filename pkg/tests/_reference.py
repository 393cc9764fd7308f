"""Independent reference implementations used as test oracles.

Everything here is deliberately written from the problem definitions (no
imports from the package under test): proximal-gradient solvers, primal and
dual objectives, and finite differences.
"""

import numpy as np
from scipy.special import expit, xlogy


def mean_fn(kind, eta):
    if kind == "least_squares":
        return eta
    if kind == "logistic":
        return expit(eta)
    return np.exp(np.clip(eta, -500, 500))


def smooth_value(kind, eta, y):
    if kind == "least_squares":
        return 0.5 * float(np.sum((eta - y) ** 2))
    if kind == "logistic":
        return float(np.sum(np.logaddexp(0.0, eta)) - y @ eta)
    return float(np.sum(np.exp(np.clip(eta, -500, 500))) - y @ eta)


def primal(kind, X, y, beta, lam):
    return smooth_value(kind, X @ beta, y) + lam * float(np.sum(np.abs(beta)))


def dual_from_residual(kind, X, y, residual, lam):
    """Dual value at the scaled dual point built from a residual vector."""
    corr = X.T @ residual
    scale = max(lam, float(np.max(np.abs(corr))) if corr.size else 0.0)
    theta = residual / scale
    if kind == "least_squares":
        d = theta - y / lam
        return 0.5 * float(y @ y) - 0.5 * lam * lam * float(d @ d)
    u = np.clip(y - lam * theta, 0.0, 1.0)
    return -float(np.sum(xlogy(u, u) + xlogy(1.0 - u, 1.0 - u)))


def duality_gap(kind, X, y, beta, lam):
    eta = X @ beta
    residual = y - mean_fn(kind, eta)
    return primal(kind, X, y, beta, lam) - dual_from_residual(kind, X, y, residual, lam)


def prox_l1(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def ista_solve(X, y, lam, kind="least_squares", gap_tol=1e-10, beta0=None,
               max_iter=500_000):
    """Proximal gradient (FISTA with restart; backtracking for Poisson).

    Least squares / logistic stop at an absolute duality gap <= gap_tol;
    Poisson (no gap available) stops at a machine-level prox fixed point.
    """
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)

    if kind == "poisson":
        L = max(1.0, np.linalg.norm(X, 2) ** 2 * float(np.max(mean_fn(kind, X @ beta))))
        for _ in range(max_iter):
            eta = X @ beta
            f0 = smooth_value(kind, eta, y)
            grad = X.T @ (mean_fn(kind, eta) - y)
            while True:
                cand = prox_l1(beta - grad / L, lam / L)
                d = cand - beta
                quad = f0 + float(grad @ d) + 0.5 * L * float(d @ d)
                if smooth_value(kind, X @ cand, y) <= quad + 1e-12 * max(1.0, abs(f0)):
                    break
                L *= 2.0
            step = float(np.max(np.abs(cand - beta)))
            beta = cand
            if step < 1e-13 * max(1.0, float(np.max(np.abs(beta)))):
                return beta
            L *= 0.97
        raise AssertionError("poisson reference failed to reach a fixed point")

    bound = 1.0 if kind == "least_squares" else 0.25
    L = max(np.linalg.norm(X, 2) ** 2 * bound, 1e-12)
    z = beta.copy()
    tk = 1.0
    for it in range(max_iter):
        grad = X.T @ (mean_fn(kind, X @ z) - y)
        beta_new = prox_l1(z - grad / L, lam / L)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        if float((z - beta_new) @ (beta_new - beta)) > 0.0:
            z = beta_new.copy()
            tk = 1.0
        else:
            z = beta_new + ((tk - 1.0) / t_new) * (beta_new - beta)
            tk = t_new
        beta = beta_new
        if it % 10 == 0 and duality_gap(kind, X, y, beta, lam) <= gap_tol:
            return beta
    if duality_gap(kind, X, y, beta, lam) <= gap_tol:
        return beta
    raise AssertionError(f"reference solver failed to reach gap {gap_tol}")


def reference_path(X, y, lams, kind="least_squares", gap_tol=1e-10):
    """Reference solutions at every penalty, warm-started down the path."""
    betas = []
    beta = None
    for lam in lams:
        beta = ista_solve(X, y, lam, kind=kind, gap_tol=gap_tol, beta0=beta)
        betas.append(beta.copy())
    return np.array(betas)


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def fd_second(f, z, h=1e-4):
    return (f(z + h) - 2.0 * f(z) + f(z - h)) / (h * h)


def standardize_dense(X, y, center_y=True):
    """Plain-numpy standardization, independent of the package."""
    mu = X.mean(axis=0)
    sd = np.sqrt(np.mean((X - mu) ** 2, axis=0))
    sd[sd == 0] = 1.0
    Xs = (X - mu) / sd
    ys = y - y.mean() if center_y else y
    return Xs, ys
