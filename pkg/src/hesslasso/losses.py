"""Loss families: values, correlations, curvature, duals and deviance.

Three families are supported: least squares f = 0.5 ||X b - y||^2, logistic
f = sum log(1 + exp(eta)) - y eta, and Poisson f = sum exp(eta) - y eta.
The correlation c = X'(y - mu(eta)) is the negative gradient shared by all
screening rules; the duality gap uses the Fenchel dual with dual-point
scaling and is the solver's convergence certificate (least squares and
logistic only: the Poisson gradient is not Lipschitz).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln, xlogy

from .design import as_design

LOSS_KINDS = ("least_squares", "logistic", "poisson")

# guards for extreme linear predictors / vanishing curvature
_ETA_MAX = 500.0
_W_MIN = 1e-10


class LossModel:
    """Descriptor for one loss family, bound to a response vector."""

    def __init__(self, kind, y):
        if kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss {kind!r}")
        self.kind = kind
        y = np.asarray(y, dtype=np.float64).ravel()
        self.validate_response(y)
        self.supports_gap_safe = kind != "poisson"
        self.curvature_bound = {"least_squares": 1.0, "logistic": 0.25, "poisson": None}[kind]
        n = y.size
        if kind == "least_squares":
            self.zeta = float(y @ y)
        elif kind == "logistic":
            self.zeta = n * np.log(2.0)
        else:
            self.zeta = float(n + np.sum(gammaln(y + 1.0)))
        if self.zeta <= 0.0:
            self.zeta = 1.0  # degenerate response; keep tolerances finite

    def validate_response(self, y):
        if self.kind == "logistic" and not set(np.unique(y)) <= {0.0, 1.0}:
            raise ValueError("logistic loss needs responses in {0, 1}")
        if self.kind == "poisson" and np.any(y < 0):
            raise ValueError("poisson loss needs nonnegative responses")

    def mean(self, eta):
        if self.kind == "least_squares":
            return eta
        if self.kind == "logistic":
            return expit(eta)
        return np.exp(np.clip(eta, -_ETA_MAX, _ETA_MAX))

    def smooth_value(self, eta, y):
        if self.kind == "least_squares":
            d = eta - y
            return 0.5 * float(d @ d)
        if self.kind == "logistic":
            return float(np.sum(np.logaddexp(0.0, eta)) - y @ eta)
        return float(np.sum(np.exp(np.clip(eta, -_ETA_MAX, _ETA_MAX))) - y @ eta)

    def residual(self, eta, y):
        """y - mu(eta): the vector whose column dots give the correlation."""
        return y - self.mean(eta)

    def weights(self, eta, bounded=False):
        """Per-observation curvature f''(eta), or its constant upper bound."""
        n = eta.size
        if self.kind == "least_squares":
            return np.ones(n)
        if self.kind == "logistic":
            if bounded:
                return np.full(n, 0.25)
            mu = expit(eta)
            return mu * (1.0 - mu)
        if bounded:
            raise ValueError("no curvature bound exists for the poisson loss")
        return np.exp(np.clip(eta, -_ETA_MAX, _ETA_MAX))

    def saturated_value(self, y):
        """Smallest attainable smooth value; reference point for deviance."""
        if self.kind == "least_squares":
            return 0.0
        if self.kind == "logistic":
            return float(-np.sum(xlogy(y, y) + xlogy(1.0 - y, 1.0 - y)))
        return float(np.sum(y - xlogy(y, y)))

    def dual_value(self, theta, y, lam):
        if self.kind == "least_squares":
            d = theta - y / lam
            return 0.5 * float(y @ y) - 0.5 * lam * lam * float(d @ d)
        if self.kind == "logistic":
            u = np.clip(y - lam * theta, 0.0, 1.0)
            return -float(np.sum(xlogy(u, u) + xlogy(1.0 - u, 1.0 - u)))
        raise ValueError("the poisson loss has no duality-gap support")


def make_loss(loss, y):
    return loss if isinstance(loss, LossModel) else LossModel(loss, y)


@dataclass
class QuadraticLocalModel:
    """Local quadratic surrogate at ``center``: weights and working response."""

    weights: np.ndarray
    working_response: np.ndarray
    center: np.ndarray


def _eta(design, beta):
    nz = np.flatnonzero(beta)
    return design.matvec(beta[nz], nz)


def correlation(X, y, beta, loss="least_squares"):
    """c = -grad f(beta) = X'(y - mu(X beta))."""
    design = as_design(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    model = make_loss(loss, y)
    beta = np.asarray(beta, dtype=np.float64).ravel()
    return design.column_dots(model.residual(_eta(design, beta), y))


def lambda_max(X, y, loss="least_squares"):
    """Smallest penalty for which the all-zero solution is optimal."""
    design = as_design(X)
    if design.p == 0:
        return 0.0
    c0 = correlation(X, y, np.zeros(design.p), loss)
    return float(np.max(np.abs(c0))) if c0.size else 0.0


def duality_gap(X, y, beta, lam, loss="least_squares"):
    """Duality gap and the scaled dual-feasible point it was computed at."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    design = as_design(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    model = make_loss(loss, y)
    if not model.supports_gap_safe:
        raise ValueError("the poisson loss has no duality-gap support")
    beta = np.asarray(beta, dtype=np.float64).ravel()
    eta = _eta(design, beta)
    res = model.residual(eta, y)
    corr = design.column_dots(res)
    scale = max(lam, float(np.max(np.abs(corr))) if corr.size else 0.0)
    theta = res / scale
    primal = model.smooth_value(eta, y) + lam * float(np.sum(np.abs(beta)))
    gap = primal - model.dual_value(theta, y, lam)
    return max(gap, 0.0), theta


def curvature_weights(X, y, beta0, loss, bounded=False):
    """Local quadratic model at beta0: curvature weights + working response."""
    design = as_design(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    model = make_loss(loss, y)
    beta0 = np.asarray(beta0, dtype=np.float64).ravel()
    eta = _eta(design, beta0)
    w = model.weights(eta, bounded=bounded)
    w_safe = np.maximum(w, _W_MIN)
    ytilde = eta + model.residual(eta, y) / w_safe
    return QuadraticLocalModel(w, ytilde, beta0)


def deviance_stats(X, y, beta, loss="least_squares"):
    """(deviance, null deviance, explained-deviance ratio)."""
    design = as_design(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    model = make_loss(loss, y)
    beta = np.asarray(beta, dtype=np.float64).ravel()
    eta = _eta(design, beta)
    if model.kind == "least_squares":
        dev = float(np.sum((y - eta) ** 2))
        null = float(np.sum((y - np.mean(y)) ** 2))
    else:
        sat = model.saturated_value(y)
        dev = 2.0 * (model.smooth_value(eta, y) - sat)
        null = 2.0 * (model.smooth_value(np.zeros_like(y), y) - sat)
    if null <= 0.0:
        return dev, null, 1.0
    return dev, null, 1.0 - dev / null
