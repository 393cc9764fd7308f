"""Screening rules: strong, Hessian-based, and Gap Safe, plus KKT checks.

Every rule is the same test in disguise: build an estimate of the
correlation vector at the next penalty and discard predictor j when the
estimate's magnitude falls below that penalty. The strong rule moves the
current correlation by the unit bound; the Hessian rule moves it along the
second-order path tangent; Gap Safe bounds the dual point inside a sphere
whose radius comes from the duality gap (and is therefore safe).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import as_design


@dataclass
class ScreenSets:
    """The index sets threaded through one path step (boolean masks)."""

    active: np.ndarray
    strong: np.ndarray
    working: np.ndarray
    gap_safe: np.ndarray
    violations: np.ndarray


@dataclass
class HessianEstimate:
    """Correlation estimate for the next penalty, in three refinements.

    ``second_order`` is the raw tangent extrapolation (NaN where it was not
    evaluated), ``restricted`` applies the three-case restriction (active /
    strong-discarded / evaluated), and ``inflated`` adds the gamma fraction
    of the unit bound, pushing entries away from zero.
    """

    second_order: np.ndarray
    restricted: np.ndarray
    inflated: np.ndarray
    gamma: float


def strong_estimate(corr, lam_k, lam_next):
    """Unit-bound extrapolation of the correlation vector."""
    return corr + (lam_k - lam_next) * np.sign(corr)


def strong_kept(corr, lam_k, lam_next):
    """Mask of predictors the strong rule keeps at lam_next."""
    return np.abs(strong_estimate(corr, lam_k, lam_next)) >= lam_next


def hessian_estimate(corr, lam_k, lam_next, gram, X, sign_active, strong_mask,
                     gamma=0.01, weights=None):
    """Second-order correlation estimate restricted to the strong-kept set.

    The one expensive object is the n-vector u = D(w) X_A H^{-1} sign; the
    tangent correction for candidate j is just (lam_next - lam_k) x_j' u,
    evaluated only for strong-kept predictors outside the active set. With
    an empty active set the estimate degenerates to the strong rule.
    """
    design = as_design(X)
    p = corr.size
    if gram.active.size == 0:
        est = strong_estimate(corr, lam_k, lam_next)
        return HessianEstimate(est.copy(), est.copy(), est.copy(), gamma)

    active_mask = np.zeros(p, dtype=bool)
    active_mask[gram.active] = True
    sign_active = np.asarray(sign_active, dtype=np.float64)
    u = design.matvec(gram.inverse @ sign_active, gram.active)
    if weights is not None:
        u = weights * u

    candidates = strong_mask & ~active_mask
    discarded = ~strong_mask & ~active_mask
    # the three cases must partition {1..p}
    assert not np.any(active_mask & candidates)
    assert not np.any(active_mask & discarded)
    assert not np.any(candidates & discarded)

    second = np.full(p, np.nan)
    cand_idx = np.flatnonzero(candidates)
    second[cand_idx] = corr[cand_idx] + (lam_next - lam_k) * design.column_dots(u, cand_idx)

    restricted = np.zeros(p)
    restricted[gram.active] = lam_next * sign_active
    restricted[cand_idx] = second[cand_idx]

    inflated = restricted + gamma * (lam_k - lam_next) * np.sign(corr)
    return HessianEstimate(second, restricted, inflated, gamma)


def hessian_screen(estimate, lam_next, ever_active):
    """Working set for the next step: kept-by-estimate union ever-active."""
    if lam_next > 0:
        kept = np.abs(estimate.inflated) >= lam_next
    else:
        kept = estimate.inflated != 0.0
    return kept | ever_active


def gap_safe_screen(X, theta, gap, lam, gap_safe_mask, column_norms=None, dots=None):
    """Shrink the safe set: discard j when |x_j' theta| < 1 - ||x_j|| r.

    The sphere radius is r = sqrt(2 G / lam^2); every discarded predictor is
    provably zero at the optimum for this lam. ``dots`` may supply the
    precomputed x_j' theta values for the columns in the mask.
    """
    design = as_design(X)
    idx = np.flatnonzero(gap_safe_mask)
    if idx.size == 0:
        return gap_safe_mask.copy()
    radius = np.sqrt(max(2.0 * gap, 0.0)) / lam
    if column_norms is None:
        column_norms = np.sqrt(design.column_sq_norms())
    thresholds = 1.0 - column_norms[idx] * radius
    if np.all(thresholds <= 0.0):
        return gap_safe_mask.copy()
    if dots is None:
        dots = design.column_dots(theta, idx)
    out = np.zeros_like(gap_safe_mask)
    # keep on ties, with one-ulp slack so boundary predictors are never lost
    out[idx] = np.abs(dots) >= thresholds - 1e-12
    return out


def kkt_check(X, residual, candidates, lam):
    """Violations |x_j' residual| >= lam among ``candidates``.

    Returns the violation mask and the correlations computed for the
    candidate columns (reused by Gap Safe screening at marginal cost).
    """
    design = as_design(X)
    idx = np.flatnonzero(candidates)
    dots = design.column_dots(residual, idx)
    out = np.zeros_like(candidates)
    out[idx] = np.abs(dots) >= lam
    return out, dots
