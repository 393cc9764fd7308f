"""Active-set Gram matrix H = X_A' D X_A and its inverse, maintained
incrementally.

Dropping columns uses the block-inverse identity (the kept block of H has
inverse Q_EE - Q_EC Q_CC^{-1} Q_CE, all read off the current inverse);
adding columns uses the Schur complement S = H_DD - B' Q B. Rank-deficient
blocks are handled by ridge preconditioning: H + alpha I with
alpha = n * 1e-4, latched for the rest of the fit by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

ALPHA_PER_OBS = 1e-4


class GramSingularError(RuntimeError):
    """A block to invert is numerically singular; precondition and retry."""


class FlopCounter:
    """Coarse analytic multiply-add counts for the update-vs-rebuild model."""

    def __init__(self):
        self.enabled = False
        self.total = 0

    def reset(self):
        self.total = 0

    def add(self, amount):
        if self.enabled:
            self.total += int(amount)


FLOPS = FlopCounter()


@dataclass
class GramState:
    """Gram matrix over an ordered active set, with (preconditioned) inverse.

    ``hessian`` stores H itself; ``inverse`` stores (H + alpha I)^{-1} where
    alpha = ``precond_alpha`` (0 when no preconditioning was needed).
    """

    active: np.ndarray
    hessian: np.ndarray
    inverse: np.ndarray
    precond_alpha: float = 0.0


def _sym(M):
    return (M + M.T) / 2.0


def _chol_inverse(M, pivot_floor=None):
    """Inverse via Cholesky; raises GramSingularError on failure.

    ``pivot_floor``: treat the factorization as failed when the smallest
    squared pivot falls below this value (cheap rank-deficiency test).
    """
    if M.shape[0] == 0:
        return np.zeros((0, 0))
    try:
        factor = sla.cho_factor(M, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise GramSingularError(str(exc)) from exc
    if pivot_floor is not None and float(np.min(np.diag(factor[0]))) ** 2 < pivot_floor:
        raise GramSingularError("smallest Cholesky pivot below preconditioning threshold")
    return _sym(sla.cho_solve(factor, np.eye(M.shape[0]), check_finite=False))


def precondition(evals, evecs, n_obs):
    """Ridge the spectrum when needed: (H + alpha I, its inverse, alpha).

    alpha = n_obs * 1e-4 when the smallest eigenvalue falls below that value,
    otherwise 0 and the exact inverse is returned.
    """
    evals = np.asarray(evals, dtype=np.float64)
    evecs = np.asarray(evecs, dtype=np.float64)
    alpha = n_obs * ALPHA_PER_OBS
    if evals.size == 0:
        return np.zeros((0, 0)), np.zeros((0, 0)), 0.0
    if float(np.min(evals)) >= alpha:
        alpha = 0.0
    shifted = evals + alpha
    h_plus = _sym((evecs * shifted) @ evecs.T)
    inverse = _sym((evecs / shifted) @ evecs.T)
    return h_plus, inverse, alpha


def build_gram(design, active, weights=None, alpha=None):
    """Construct a GramState from scratch.

    ``alpha=None`` decides automatically (exact inverse if well conditioned,
    otherwise spectral preconditioning); a positive ``alpha`` is applied
    unconditionally (the latched case).
    """
    active = np.asarray(active, dtype=np.int64)
    H = design.gram_block(active, active, weights)
    e = active.size
    FLOPS.add(e * e * design.n + e**3)
    if e == 0:
        return GramState(active, H, H.copy(), float(alpha or 0.0))
    if alpha is not None and alpha > 0.0:
        inverse = _chol_inverse(H + alpha * np.eye(e))
        return GramState(active, H, inverse, float(alpha))
    threshold = design.n * ALPHA_PER_OBS
    try:
        inverse = _chol_inverse(H, pivot_floor=threshold)
        return GramState(active, H, inverse, 0.0)
    except GramSingularError:
        if alpha is not None:  # exact inverse was demanded
            raise
        evals, evecs = sla.eigh(H, check_finite=False)
        _, inverse, a = precondition(evals, evecs, design.n)
        return GramState(active, H, inverse, a)


def reduce_gram(state, keep):
    """Restrict the state to ``keep`` (a subset of the active set)."""
    keep = np.asarray(keep, dtype=np.int64)
    keep_set = set(keep.tolist())
    if not keep_set <= set(state.active.tolist()):
        raise ValueError("keep must be a subset of the active set")
    pos = np.array([i for i, a in enumerate(state.active) if a in keep_set], dtype=np.int64)
    if pos.size == state.active.size:
        return state
    drop = np.array([i for i in range(state.active.size) if i not in set(pos.tolist())],
                    dtype=np.int64)
    Q = state.inverse
    Qkk = Q[np.ix_(pos, pos)]
    Qkd = Q[np.ix_(pos, drop)]
    Qdd = Q[np.ix_(drop, drop)]
    c, e = drop.size, pos.size
    FLOPS.add(c**3 + c * c * e + c * e * e)
    try:
        factor = sla.cho_factor(Qdd, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise GramSingularError(
            "dropped block of the inverse is singular; precondition and retry"
        ) from exc
    new_inverse = _sym(Qkk - Qkd @ sla.cho_solve(factor, Qkd.T, check_finite=False))
    new_hessian = state.hessian[np.ix_(pos, pos)]
    return GramState(state.active[pos], new_hessian, new_inverse, state.precond_alpha)


def augment_gram(state, add, design, weights=None):
    """Append columns ``add`` (disjoint from the active set) to the state."""
    add = np.asarray(add, dtype=np.int64)
    if add.size == 0:
        return state
    if set(add.tolist()) & set(state.active.tolist()):
        raise ValueError("add overlaps the active set")
    alpha = state.precond_alpha
    e, d, n = state.active.size, add.size, design.n
    B = design.gram_block(state.active, add, weights)
    Hdd = design.gram_block(add, add, weights)
    S = Hdd + alpha * np.eye(d)
    if e:
        QB = state.inverse @ B
        S = S - B.T @ QB
    FLOPS.add(d * d * n + n * d * e + d * d * e + d**3 + e * e * d)
    pivot_floor = n * ALPHA_PER_OBS if alpha == 0.0 else None
    S_inv = _chol_inverse(_sym(S), pivot_floor=pivot_floor)
    if e:
        QBS = QB @ S_inv
        new_inverse = np.block([[state.inverse + QBS @ QB.T, -QBS], [-QBS.T, S_inv]])
        new_hessian = np.block([[state.hessian, B], [B.T, Hdd]])
    else:
        new_inverse = S_inv
        new_hessian = Hdd
    return GramState(
        np.concatenate([state.active, add]), _sym(new_hessian), _sym(new_inverse), alpha
    )


def update_gram(state, new_active, design, weights=None):
    """Reduce to the intersection, then augment with the new columns."""
    new_active = np.asarray(new_active, dtype=np.int64)
    new_set = set(new_active.tolist())
    old_set = set(state.active.tolist())
    if new_set == old_set:
        return state
    keep = np.array([a for a in state.active if a in new_set], dtype=np.int64)
    add = np.array([b for b in new_active if b not in old_set], dtype=np.int64)
    state = reduce_gram(state, keep)
    return augment_gram(state, add, design, weights)
