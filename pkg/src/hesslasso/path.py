"""Full regularization-path fitting with pluggable screening strategies.

Each step solves the problem restricted to a working set, then loops:
check KKT conditions on the strong set first, then certify the full problem
with a dual-feasible duality gap; on failure, optionally shrink the safe set
with Gap Safe screening, pull in violating predictors, and re-solve. A step
concludes only when the gap certificate holds *and* no predictor outside the
working set violates its optimality condition, so every recorded solution
survives an independent KKT sweep. Between steps the active-set Gram matrix
is updated incrementally and drives both the screen for the next penalty and
a second-order warm start that is exact while the active set is constant.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cd import SubproblemSpec, solve_subproblem
from .design import StandardizedData
from .gram import ALPHA_PER_OBS, GramSingularError, build_gram, update_gram
from .losses import make_loss
from .screening import (
    ScreenSets,
    gap_safe_screen,
    hessian_estimate,
    hessian_screen,
    kkt_check,
    strong_kept,
)

STRATEGIES = ("hessian", "strong", "working_plus", "gap_safe_only", "none")


@dataclass
class PathConfig:
    """Settings for one path fit. ``xi`` defaults to 1e-2 if p > n else 1e-4.

    ``dev_ratio_stop`` / ``dev_change_stop`` may be set to None to disable
    the corresponding early-termination rule.
    """

    loss: str = "least_squares"
    strategy: str = "hessian"
    path_length: int = 100
    xi: float | None = None
    epsilon: float = 1e-4
    gamma: float = 0.01
    gap_safe_augmentation: bool = True
    seed: int = 0
    dev_ratio_stop: float | None = 0.999
    dev_change_stop: float | None = 1e-5
    sparsity_heuristic_threshold: float = 1e-3
    max_passes: int = 100_000
    hessian_warm_starts: bool = True
    incremental_gram: bool = True
    lambdas: np.ndarray | None = None


@dataclass
class StepRecord:
    lam: float
    gap: float
    passes: int
    n_screened: int
    n_strong: int
    n_gap_safe: int
    n_violations: int
    n_active: int
    dev_ratio: float
    alpha: float
    coef_indices: np.ndarray
    coef_values: np.ndarray
    screened_indices: np.ndarray = None
    cd_time: float = 0.0
    kkt_time: float = 0.0
    gram_time: float = 0.0
    screen_time: float = 0.0
    step_time: float = 0.0


@dataclass
class PathResult:
    lambdas: np.ndarray
    records: list
    termination: str
    lam_max: float
    zeta: float
    n: int
    p: int
    config: PathConfig
    criterion: str

    def coef_matrix(self):
        out = np.zeros((len(self.records), self.p))
        for i, rec in enumerate(self.records):
            out[i, rec.coef_indices] = rec.coef_values
        return out

    @property
    def total_passes(self):
        return sum(r.passes for r in self.records)

    @property
    def total_violations(self):
        return sum(r.n_violations for r in self.records)

    def time_totals(self):
        return {
            "total": sum(r.step_time for r in self.records),
            "cd": sum(r.cd_time for r in self.records),
            "kkt": sum(r.kkt_time for r in self.records),
            "gram": sum(r.gram_time for r in self.records),
            "screen": sum(r.screen_time for r in self.records),
        }


def lambda_grid(lam_max, m, xi):
    """Log-spaced penalties from lam_max down to xi * lam_max."""
    if lam_max <= 0.0:
        return np.array([0.0])
    if m == 1:
        return np.array([lam_max])
    ratio = xi ** (1.0 / (m - 1))
    lams = lam_max * ratio ** np.arange(m)
    lams[0] = lam_max
    lams[-1] = lam_max * xi
    return lams


def warm_start(beta_active, lam_k, lam_next, gram):
    """Second-order coefficient warm start over the active set.

    Exact at lam_next when the active set and signs are unchanged on
    [lam_next, lam_k] and no preconditioning is in effect.
    """
    beta_active = np.asarray(beta_active, dtype=np.float64)
    if beta_active.size == 0:
        return beta_active.copy()
    signs = np.sign(beta_active)
    return beta_active + (lam_k - lam_next) * (gram.inverse @ signs)


class _Timer:
    def __init__(self):
        self.buckets = {"cd": 0.0, "kkt": 0.0, "gram": 0.0, "screen": 0.0}

    def add(self, bucket, t0):
        self.buckets[bucket] += time.perf_counter() - t0


def _deviance(model, y, eta, null_dev):
    if model.kind == "least_squares":
        dev = float(np.sum((y - eta) ** 2))
    else:
        dev = 2.0 * (model.smooth_value(eta, y) - model.saturated_value(y))
    if null_dev <= 0.0:
        return dev, 1.0
    return dev, 1.0 - dev / null_dev


def _gram_weights(model, config, design, eta):
    """Curvature weights for the Gram state, or None for unit weights.

    Returns (weights, rebuild_each_step): logistic uses exact weights with a
    from-scratch rebuild when the design is sparse enough, otherwise the 1/4
    bound with incremental updates; Poisson always rebuilds exactly.
    """
    if model.kind == "least_squares":
        return None, not config.incremental_gram
    if model.kind == "logistic":
        n, p = design.n, design.p
        full = design.density * n / max(n, p) < config.sparsity_heuristic_threshold
        if full:
            return model.weights(eta), True
        return np.full(design.n, 0.25), not config.incremental_gram
    return model.weights(eta), True


def _degenerate_result(config, n, p, zeta, criterion):
    rec = StepRecord(0.0, 0.0, 0, 0, 0, p, 0, 0, 1.0, 0.0,
                     np.zeros(0, dtype=np.int64), np.zeros(0),
                     np.zeros(0, dtype=np.int64))
    return PathResult(np.array([0.0]), [rec], "degenerate", 0.0, zeta, n, p,
                      config, criterion)


def fit_path(data: StandardizedData, config: PathConfig) -> PathResult:
    """Fit the regularization path on standardized data."""
    if config.strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {config.strategy!r}")
    design, y = data.design, data.y
    n, p = design.n, design.p
    model = make_loss(config.loss, y)
    if model.kind == "poisson" and config.strategy == "gap_safe_only":
        raise ValueError("gap_safe_only is unavailable for the poisson loss")
    use_gap = model.supports_gap_safe
    criterion = "duality_gap" if use_gap else "primal_decrease"
    gap_augmented = config.gap_safe_augmentation and use_gap
    rng = np.random.default_rng(config.seed)

    zeta = model.zeta
    tol = config.epsilon * zeta
    corr0 = design.column_dots(model.residual(np.zeros(n), y))
    lam_max = float(np.max(np.abs(corr0))) if p else 0.0
    if lam_max <= 0.0:
        return _degenerate_result(config, n, p, zeta, criterion)

    if config.lambdas is not None:
        lams = np.asarray(config.lambdas, dtype=np.float64)
        if np.any(lams <= 0) or np.any(np.diff(lams) >= 0):
            raise ValueError("lambdas must be positive and strictly decreasing")
        auto_grid = False
    else:
        xi = config.xi if config.xi is not None else (1e-2 if p > n else 1e-4)
        lams = lambda_grid(lam_max, config.path_length, xi)
        auto_grid = True

    beta = np.zeros(p)
    working = np.zeros(p, dtype=bool)
    strong = np.zeros(p, dtype=bool)
    safe = np.ones(p, dtype=bool)
    ever_active = np.zeros(p, dtype=bool)
    gram = build_gram(design, np.zeros(0, dtype=np.int64))
    latched_alpha = 0.0
    column_norms = np.sqrt(design.column_sq_norms())
    null_dev = _deviance(model, y, np.zeros(n), -1.0)[0]
    n_strong_pending = 0

    records = []
    termination = None
    prev_ratio = None
    k = 0
    while k < len(lams):
        lam = float(lams[k])
        timer = _Timer()
        step_t0 = time.perf_counter()
        violations_step = 0
        passes_step = 0
        stalled = False
        eta = np.zeros(n)
        corr_full = np.zeros(p)
        gap_val = 0.0
        first_iteration = True

        if k == 0 and auto_grid:
            # beta = 0 is optimal at lam_max by construction
            corr_full = corr0.copy()
        else:
            while True:
                if config.strategy == "gap_safe_only" and first_iteration:
                    # dynamic sequential screen from the incoming solution
                    t0 = time.perf_counter()
                    nz = np.flatnonzero(beta)
                    eta = design.matvec(beta[nz], nz)
                    res = model.residual(eta, y)
                    dots = design.column_dots(res, np.flatnonzero(safe))
                    scale = max(lam, float(np.max(np.abs(dots))) if dots.size else 0.0)
                    theta = res / scale
                    primal = model.smooth_value(eta, y) + lam * float(np.sum(np.abs(beta)))
                    g = max(primal - model.dual_value(theta, y, lam), 0.0)
                    safe = gap_safe_screen(design, theta, g, lam, safe, column_norms,
                                           dots=dots / scale)
                    working = safe.copy()
                    beta[~working] = 0.0
                    timer.add("screen", t0)
                first_iteration = False

                widx = np.flatnonzero(working)
                if widx.size:
                    t0 = time.perf_counter()
                    sub = solve_subproblem(
                        design, y,
                        SubproblemSpec(widx, lam, tol, beta[widx], config.max_passes),
                        model, rng,
                    )
                    timer.add("cd", t0)
                    beta[widx] = sub.coefficients
                    passes_step += sub.passes
                    eta = sub.eta
                    corr_w = sub.corr_working
                    if not sub.converged:
                        stalled = True
                        break
                else:
                    sub = None
                    eta = np.zeros(n)
                    corr_w = np.zeros(0)

                res = model.residual(eta, y)
                t0 = time.perf_counter()
                tier1 = strong & ~working
                v1, dots1 = kkt_check(design, res, tier1, lam)
                if v1.any():
                    working |= v1
                    violations_step += int(v1.sum())
                    timer.add("kkt", t0)
                    continue

                tier2 = safe & ~working & ~tier1
                dots2 = design.column_dots(res, np.flatnonzero(tier2))
                corr_full = np.zeros(p)
                corr_full[widx] = corr_w
                corr_full[np.flatnonzero(tier1)] = dots1
                corr_full[np.flatnonzero(tier2)] = dots2
                abs_safe = np.abs(corr_full[safe])
                scale = max(lam, float(np.max(abs_safe)) if abs_safe.size else 0.0)
                timer.add("kkt", t0)

                if use_gap:
                    t0 = time.perf_counter()
                    theta = res / scale
                    primal = model.smooth_value(eta, y) + lam * float(np.sum(np.abs(beta)))
                    gap_val = max(primal - model.dual_value(theta, y, lam), 0.0)
                    certified = gap_val < tol
                    if certified and not safe.all():
                        # validate the certificate against the full scaling
                        outside = np.flatnonzero(~safe)
                        corr_full[outside] = design.column_dots(res, outside)
                        full_scale = max(lam, float(np.max(np.abs(corr_full))))
                        if full_scale > scale * (1.0 + 1e-12):
                            gap_full = max(
                                primal - model.dual_value(res / full_scale, y, lam), 0.0
                            )
                            if gap_full < tol:
                                gap_val = gap_full
                            else:
                                safe[:] = True
                                viol = (np.abs(corr_full) >= lam) & ~working
                                working |= viol
                                violations_step += int(viol.sum())
                                timer.add("kkt", t0)
                                continue
                    timer.add("kkt", t0)
                    if certified:
                        # corr_full is complete here (tiers + outside-safe fill)
                        t0 = time.perf_counter()
                        viol = (np.abs(corr_full) >= lam) & ~working
                        timer.add("kkt", t0)
                        if viol.any():
                            working |= viol
                            safe |= viol
                            violations_step += int(viol.sum())
                            continue
                        break
                    # not certified: shrink the safe set, pull in violators
                    t0 = time.perf_counter()
                    if gap_augmented or config.strategy == "gap_safe_only":
                        new_safe = gap_safe_screen(
                            design, theta, gap_val, lam, safe, column_norms,
                            dots=corr_full[safe] / scale,
                        )
                        dropped = working & ~new_safe
                        if dropped.any():
                            beta[dropped] = 0.0
                        safe = new_safe
                        working &= safe
                        strong &= safe
                    if config.strategy == "gap_safe_only":
                        working = safe.copy()
                        timer.add("kkt", t0)
                        continue
                    viol = (np.abs(corr_full) >= lam) & safe & ~strong & ~working
                    if not viol.any():
                        # float-boundary fallback; the certificate failing
                        # guarantees a violator exists in exact arithmetic
                        viol = (np.abs(corr_full) >= lam * (1.0 - 1e-12)) & safe & ~working
                    timer.add("kkt", t0)
                    if viol.any():
                        working |= viol
                        violations_step += int(viol.sum())
                        continue
                    stalled = True
                    break
                else:
                    # poisson: conclude on a clean KKT sweep over everything
                    gap_val = sub.gap if sub is not None else 0.0
                    t0 = time.perf_counter()
                    viol = (np.abs(corr_full) >= lam) & ~working
                    timer.add("kkt", t0)
                    if viol.any():
                        working |= viol
                        violations_step += int(viol.sum())
                        continue
                    break

        if stalled:
            termination = "stalled"
            break

        active = beta != 0.0
        sets = ScreenSets(active, strong, working, safe, np.zeros(p, dtype=bool))
        assert not np.any(sets.active & ~sets.working)
        assert not np.any(sets.working & ~sets.gap_safe)
        ever_active |= active
        dev, ratio = _deviance(model, y, eta, null_dev)
        nz = np.flatnonzero(active)
        records.append(StepRecord(
            lam, gap_val, passes_step, int(working.sum()), n_strong_pending,
            int(safe.sum()), violations_step, nz.size, ratio, latched_alpha,
            nz, beta[nz].copy(), np.flatnonzero(working),
            cd_time=timer.buckets["cd"], kkt_time=timer.buckets["kkt"],
            gram_time=timer.buckets["gram"], screen_time=timer.buckets["screen"],
            step_time=time.perf_counter() - step_t0,
        ))

        if config.dev_ratio_stop is not None and ratio >= config.dev_ratio_stop:
            termination = "dev_ratio"
            break
        if (config.dev_change_stop is not None and prev_ratio is not None
                and ratio > 0 and (ratio - prev_ratio) < config.dev_change_stop * ratio):
            termination = "dev_change"
            break
        prev_ratio = ratio
        if int(ever_active.sum()) > p:
            termination = "ever_active_exceeds_p"
            break
        if k + 1 >= len(lams):
            termination = "max_steps"
            break

        # screen and warm-start for the next penalty
        lam_next = float(lams[k + 1])
        t0 = time.perf_counter()
        strong = strong_kept(corr_full, lam, lam_next)
        n_strong_pending = int(strong.sum())
        timer.buckets["screen"] += time.perf_counter() - t0
        records[-1].screen_time = timer.buckets["screen"]

        if config.strategy == "hessian":
            t0 = time.perf_counter()
            weights, rebuild = _gram_weights(model, config, design, eta)
            try:
                if rebuild:
                    gram = build_gram(design, nz, weights,
                                      alpha=latched_alpha if latched_alpha else None)
                else:
                    gram = update_gram(gram, nz, design, weights)
            except GramSingularError:
                latched_alpha = n * ALPHA_PER_OBS
                gram = build_gram(design, nz, weights, alpha=latched_alpha)
            latched_alpha = max(latched_alpha, gram.precond_alpha)
            timer.add("gram", t0)
            records[-1].gram_time = timer.buckets["gram"]

            t0 = time.perf_counter()
            signs = np.sign(beta[gram.active])
            estimate = hessian_estimate(corr_full, lam, lam_next, gram, design,
                                        signs, strong, config.gamma, weights=weights)
            working = hessian_screen(estimate, lam_next, ever_active)
            if config.hessian_warm_starts and gram.active.size:
                beta[gram.active] = warm_start(beta[gram.active], lam, lam_next, gram)
            timer.add("screen", t0)
            records[-1].screen_time = timer.buckets["screen"]
        elif config.strategy == "strong":
            working = strong | ever_active
        elif config.strategy == "working_plus":
            working = ever_active.copy()
        else:  # gap_safe_only, none
            working = np.ones(p, dtype=bool)
        working |= active
        safe = np.ones(p, dtype=bool)
        records[-1].step_time = time.perf_counter() - step_t0
        k += 1

    if termination is None:
        termination = "max_steps"
    recorded = np.array([r.lam for r in records])
    return PathResult(recorded, records, termination, lam_max, zeta, n, p,
                      config, criterion)
