"""Benchmark harness: runs the path experiments and writes CSV tables.

Every experiment writes one row per (repetition x strategy x condition) with
a stable column order; datasets are simulated once per (condition, rep) and
shared across strategies so comparisons are paired. Rows are reproducible in
isolation from their recorded seed via replay.
"""

from __future__ import annotations

import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .datasets import (
    SimSpec,
    drop_duplicate_columns,
    find_duplicate_columns,
    load_libsvm,
    response_for_loss,
    simulate,
)
from .design import standardize
from .path import PathConfig, fit_path

EXPERIMENTS = (
    "timings", "efficiency", "violations", "warmstarts", "gamma_sweep",
    "tolerance_sweep", "path_length", "ablation", "breakdown",
)

ALL_STRATEGIES = ("hessian", "strong", "working_plus", "gap_safe_only")

COLUMNS = [
    "strategy", "rho", "n", "p", "loss", "seed",
    "total_time_s", "cd_time_s", "kkt_time_s", "gram_time_s",
    "mean_screened", "mean_active", "total_violations", "total_passes",
    "steps", "termination_reason",
    "gamma", "epsilon", "path_length", "variant", "mean_strong", "notes", "row_id",
]

TIME_COLUMNS = ("total_time_s", "cd_time_s", "kkt_time_s", "gram_time_s")

STEP_COLUMNS = [
    "strategy", "variant", "rho", "n", "p", "loss", "seed", "step", "lam",
    "n_screened", "n_strong", "n_gap_safe", "n_active", "passes", "violations",
    "cd_time_s", "kkt_time_s", "gram_time_s", "screen_time_s", "step_time_s",
    "row_id",
]

STEP_EXPERIMENTS = ("efficiency", "warmstarts", "breakdown")

# ablation features are cumulative in this order
VARIANTS = {
    "vanilla": dict(strategy="none", hessian_warm_starts=False,
                    incremental_gram=False, gap_safe_augmentation=False),
    "screening": dict(strategy="hessian", hessian_warm_starts=False,
                      incremental_gram=False, gap_safe_augmentation=False),
    "warm_starts": dict(strategy="hessian", hessian_warm_starts=True,
                        incremental_gram=False, gap_safe_augmentation=False),
    "sweep_updates": dict(strategy="hessian", hessian_warm_starts=True,
                          incremental_gram=True, gap_safe_augmentation=False),
    "gap_safe": dict(strategy="hessian", hessian_warm_starts=True,
                     incremental_gram=True, gap_safe_augmentation=True),
    "hessian_warm": dict(strategy="hessian", hessian_warm_starts=True),
    "standard_warm": dict(strategy="hessian", hessian_warm_starts=False),
}


@dataclass
class ExperimentSpec:
    experiment: str
    n: int = 200
    p: int = 2000
    s: int = 20
    snr: float = 2.0
    rhos: tuple = (0.0, 0.4, 0.8)
    loss: str = "least_squares"
    strategies: tuple = ALL_STRATEGIES
    variants: tuple = ()
    repetitions: int = 5
    gamma: float = 0.01
    gammas: tuple = ()
    epsilon: float = 1e-4
    epsilons: tuple = ()
    path_length: int = 100
    path_lengths: tuple = ()
    xi: float | None = None
    seed: int = 0
    out_dir: str = "."
    workers: int = 1
    data_path: str | None = None
    drop_duplicates: bool = False
    replay: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.strategies and not self.variants:
            raise ValueError("at least one strategy is required")


def default_spec(experiment, **overrides):
    """Desk-scale defaults per experiment; any field can be overridden."""
    base = dict(experiment=experiment)
    if experiment == "timings":
        base.update(n=400, p=4000, repetitions=5)
    elif experiment == "efficiency":
        base.update(repetitions=10)
    elif experiment == "violations":
        base.update(repetitions=10, strategies=("hessian", "strong", "working_plus"))
    elif experiment == "warmstarts":
        base.update(n=1000, p=50, s=5, snr=1.0, rhos=(0.0,), repetitions=3,
                    strategies=(), variants=("hessian_warm", "standard_warm"))
    elif experiment == "gamma_sweep":
        base.update(repetitions=10, strategies=("hessian",),
                    gammas=(0.001, 0.01, 0.1, 0.3))
    elif experiment == "tolerance_sweep":
        base.update(repetitions=3, rhos=(0.0, 0.8),
                    strategies=("hessian", "working_plus"),
                    epsilons=(1e-3, 1e-4, 1e-5, 1e-6))
    elif experiment == "path_length":
        base.update(repetitions=3, rhos=(0.4,),
                    strategies=("hessian", "working_plus"),
                    path_lengths=(10, 20, 50, 100))
    elif experiment == "ablation":
        base.update(repetitions=3, rhos=(0.0, 0.8), strategies=(),
                    variants=("vanilla", "screening", "warm_starts",
                              "sweep_updates", "gap_safe"))
    elif experiment == "breakdown":
        base.update(repetitions=1, rhos=(0.8,),
                    strategies=("hessian", "working_plus"))
    base.update(overrides)
    return ExperimentSpec(**base)


def _conditions(spec):
    """Cartesian grid of run conditions for the experiment."""
    gammas = spec.gammas or (spec.gamma,)
    epsilons = spec.epsilons or (spec.epsilon,)
    lengths = spec.path_lengths or (spec.path_length,)
    tags = [("variant", v) for v in spec.variants] or [("strategy", s) for s in spec.strategies]
    # with a real dataset the correlation level is not a run dimension
    rhos = spec.rhos if spec.data_path is None else (0.0,)
    conds = []
    for rho in rhos:
        for g in gammas:
            for eps in epsilons:
                for m in lengths:
                    for kind, tag in tags:
                        cond = dict(rho=rho, gamma=g, epsilon=eps, path_length=m,
                                    loss=spec.loss)
                        if kind == "variant":
                            cond["variant"] = tag
                            cond["strategy"] = VARIANTS[tag]["strategy"]
                        else:
                            cond["variant"] = ""
                            cond["strategy"] = tag
                        conds.append(cond)
    return conds


def _row_id(spec, cond, rep):
    tag = cond["variant"] or cond["strategy"]
    return (f"{spec.experiment}:{cond['loss']}:{tag}:n{spec.n}:p{spec.p}"
            f":rho{cond['rho']}:g{cond['gamma']}:e{cond['epsilon']}"
            f":m{cond['path_length']}:rep{rep}")


def _config_for(cond, spec, seed):
    kwargs = dict(
        loss=cond["loss"], strategy=cond["strategy"], path_length=cond["path_length"],
        xi=spec.xi, epsilon=cond["epsilon"], gamma=cond["gamma"], seed=seed,
    )
    if cond["variant"]:
        for key, val in VARIANTS[cond["variant"]].items():
            kwargs[key] = val
    return PathConfig(**kwargs)


def _load_dataset(spec, cond, seed):
    if spec.data_path is not None:
        X, y = load_libsvm(spec.data_path, loss=cond["loss"])
        dup = find_duplicate_columns(X)
        if dup:
            action = "dropped" if spec.drop_duplicates else "kept (preconditioning covers them)"
            print(f"note: {spec.data_path}: {len(dup)} duplicate column group(s), {action}",
                  file=sys.stderr)
            if spec.drop_duplicates:
                X, _ = drop_duplicate_columns(X)
        return standardize(X, y, cond["loss"])
    sim = SimSpec(n=spec.n, p=spec.p, rho=cond["rho"], s=spec.s, snr=spec.snr,
                  seed=seed, response=response_for_loss(cond["loss"]))
    X, y, _ = simulate(sim)
    return standardize(X, y, cond["loss"])


def _run_job(payload):
    """One dataset, all conditions sharing it. Returns rows (+steps/results)."""
    spec, conds, rep, keep = payload
    seed = spec.seed + rep
    rows, step_rows, results = [], [], {}
    data = _load_dataset(spec, conds[0], seed)
    for cond in conds:
        config = _config_for(cond, spec, seed)
        result = fit_path(data, config)
        times = result.time_totals()
        recs = result.records
        rid = _row_id(spec, cond, rep)
        row = {
            "strategy": cond["strategy"],
            "rho": cond["rho"] if spec.data_path is None else "",
            "n": result.n,
            "p": result.p,
            "loss": cond["loss"],
            "seed": seed,
            "total_time_s": times["total"],
            "cd_time_s": times["cd"],
            "kkt_time_s": times["kkt"],
            "gram_time_s": times["gram"],
            "mean_screened": float(np.mean([r.n_screened for r in recs])),
            "mean_active": float(np.mean([r.n_active for r in recs])),
            "total_violations": result.total_violations,
            "total_passes": result.total_passes,
            "steps": len(recs),
            "termination_reason": result.termination,
            "gamma": cond["gamma"],
            "epsilon": cond["epsilon"],
            "path_length": cond["path_length"],
            "variant": cond["variant"],
            "mean_strong": float(np.mean([r.n_strong for r in recs])),
            "notes": "primal_decrease" if cond["loss"] == "poisson" else "",
            "row_id": rid,
        }
        rows.append(row)
        if spec.experiment in STEP_EXPERIMENTS:
            for i, r in enumerate(recs):
                step_rows.append({
                    "strategy": cond["strategy"], "variant": cond["variant"],
                    "rho": row["rho"], "n": result.n, "p": result.p,
                    "loss": cond["loss"], "seed": seed, "step": i, "lam": r.lam,
                    "n_screened": r.n_screened, "n_strong": r.n_strong,
                    "n_gap_safe": r.n_gap_safe, "n_active": r.n_active,
                    "passes": r.passes, "violations": r.n_violations,
                    "cd_time_s": r.cd_time, "kkt_time_s": r.kkt_time,
                    "gram_time_s": r.gram_time, "screen_time_s": r.screen_time,
                    "step_time_s": r.step_time, "row_id": rid,
                })
        if keep:
            results[rid] = result
    return rows, step_rows, results


@dataclass
class ExperimentOutput:
    paths: list
    rows: list
    step_rows: list
    results: dict


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return Path(path)


def run_experiment(spec, keep_results=False):
    """Run every (condition x repetition), write CSVs, return the outputs."""
    if spec.data_path is not None and not os.path.exists(spec.data_path):
        raise FileNotFoundError(f"dataset not found: {spec.data_path}")
    conds = _conditions(spec)
    jobs = []
    for rep in range(spec.repetitions):
        # one dataset per (data-affecting condition, rep), shared by strategies
        by_data_key = {}
        for ci, cond in enumerate(conds):
            key = (cond["rho"], cond["loss"])
            by_data_key.setdefault(key, []).append((ci, cond))
        for key in sorted(by_data_key):
            group = by_data_key[key]
            if spec.replay is not None:
                group = [(ci, c) for ci, c in group
                         if _row_id(spec, c, rep) == spec.replay]
                if not group:
                    continue
            jobs.append(((rep, [ci for ci, _ in group]),
                         (spec, [c for _, c in group], rep, keep_results)))
    if spec.replay is not None and not jobs:
        raise ValueError(f"row id {spec.replay!r} matches nothing")

    outputs = []
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outputs = list(pool.map(_run_job, [payload for _, payload in jobs]))
    else:
        outputs = [_run_job(payload) for _, payload in jobs]

    # deterministic order: by (condition index, repetition)
    tagged = []
    for ((rep, cond_indices), _), (rows, steps, results) in zip(jobs, outputs):
        for ci, row in zip(cond_indices, rows):
            tagged.append(((ci, rep), row))
    tagged.sort(key=lambda t: t[0])
    rows = [row for _, row in tagged]
    step_rows = []
    all_results = {}
    for (_, payload), (rws, steps, results) in zip(jobs, outputs):
        step_rows.extend(steps)
        all_results.update(results)
    step_rows.sort(key=lambda r: (r["row_id"], r["step"]))

    os.makedirs(spec.out_dir, exist_ok=True)
    stem = spec.experiment if spec.replay is None else f"{spec.experiment}_replay"
    paths = [_write_csv(os.path.join(spec.out_dir, f"{stem}.csv"), COLUMNS, rows)]
    if spec.experiment in STEP_EXPERIMENTS and step_rows:
        paths.append(_write_csv(os.path.join(spec.out_dir, f"{stem}_steps.csv"),
                                STEP_COLUMNS, step_rows))
    return ExperimentOutput(paths, rows, step_rows, all_results)


def replay_row(spec, row_id, keep_results=True):
    """Re-run exactly one benchmark row from its recorded identity."""
    out = run_experiment(replace(spec, replay=row_id, workers=1),
                         keep_results=keep_results)
    return out.rows[0], out.results.get(row_id)


GROUP_COLUMNS = ("strategy", "variant", "rho", "n", "p", "loss",
                 "gamma", "epsilon", "path_length")
METRIC_COLUMNS = ("total_time_s", "cd_time_s", "kkt_time_s", "gram_time_s",
                  "mean_screened", "mean_active", "total_violations",
                  "total_passes", "steps", "mean_strong")


def summarize(csv_path, out_path=None):
    """Aggregate a benchmark CSV: group means, SEs and 95% intervals.

    Adds a relative-time column normalized by the smallest group mean of
    total_time_s.
    """
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{csv_path}: empty input")
    groups = {}
    for row in rows:
        key = tuple(row.get(c, "") for c in GROUP_COLUMNS)
        groups.setdefault(key, []).append(row)

    out_rows = []
    for key in sorted(groups):
        members = groups[key]
        out = dict(zip(GROUP_COLUMNS, key))
        out["n_rows"] = len(members)
        for metric in METRIC_COLUMNS:
            vals = np.array([float(m[metric]) for m in members])
            mean = float(np.mean(vals))
            se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            out[f"{metric}_mean"] = mean
            out[f"{metric}_se"] = se
            out[f"{metric}_lo"] = mean - 1.96 * se
            out[f"{metric}_hi"] = mean + 1.96 * se
        out_rows.append(out)
    floor = min(r["total_time_s_mean"] for r in out_rows)
    for r in out_rows:
        r["rel_time"] = r["total_time_s_mean"] / floor if floor > 0 else 1.0

    columns = list(GROUP_COLUMNS) + ["n_rows"]
    for metric in METRIC_COLUMNS:
        columns += [f"{metric}_mean", f"{metric}_se", f"{metric}_lo", f"{metric}_hi"]
    columns.append("rel_time")
    if out_path is None:
        out_path = str(Path(csv_path).with_name(Path(csv_path).stem + "_summary.csv"))
    return _write_csv(out_path, columns, out_rows)
