"""Command-line benchmark harness: ``bench <experiment> [options]``."""

from __future__ import annotations

import argparse
import os
import sys

from .bench import ALL_STRATEGIES, EXPERIMENTS, default_spec, run_experiment, summarize


def _add_common(parser):
    parser.add_argument("--n", type=int, help="observations per simulated dataset")
    parser.add_argument("--p", type=int, help="predictors per simulated dataset")
    parser.add_argument("--rho", type=float, nargs="+", dest="rhos",
                        help="pairwise correlation level(s)")
    parser.add_argument("--s", type=int, help="number of true nonzero coefficients")
    parser.add_argument("--snr", type=float, help="signal-to-noise ratio")
    parser.add_argument("--loss", choices=("least_squares", "logistic", "poisson"))
    parser.add_argument("--strategies", nargs="+", choices=ALL_STRATEGIES)
    parser.add_argument("--reps", type=int, dest="repetitions")
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--gammas", type=float, nargs="+")
    parser.add_argument("--eps", type=float, dest="epsilon")
    parser.add_argument("--epsilons", type=float, nargs="+")
    parser.add_argument("--path-length", type=int, dest="path_length")
    parser.add_argument("--path-lengths", type=int, nargs="+", dest="path_lengths")
    parser.add_argument("--xi", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", dest="out_dir", default=".")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--replay", metavar="ROW_ID",
                        help="re-run only the row with this id")
    parser.add_argument("--data", dest="data_path", metavar="LIBSVM_PATH",
                        help="use a libsvm-format dataset instead of simulating")
    parser.add_argument("--drop-duplicates", dest="drop_duplicates",
                        action="store_true", default=None,
                        help="drop exact duplicate columns from --data")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Regularization-path screening benchmarks (CSV output).",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for tag in EXPERIMENTS:
        _add_common(sub.add_parser(tag, help=f"run the {tag} experiment"))
    s = sub.add_parser("summarize", help="aggregate a benchmark CSV")
    s.add_argument("--csv", required=True)
    s.add_argument("--out", dest="out_path")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.experiment == "summarize":
            path = summarize(args.csv, args.out_path)
            print(path)
            return 0
        overrides = {
            k: v for k, v in vars(args).items()
            if k != "experiment" and v is not None
        }
        if "workers" not in overrides:
            overrides["workers"] = os.cpu_count() or 1
        env_workers = os.environ.get("HESSLASSO_THREADS")
        if env_workers:
            overrides["workers"] = int(env_workers)
        spec = default_spec(args.experiment, **overrides)
        out = run_experiment(spec)
        for path in out.paths:
            print(path)
        return 0
    except BrokenPipeError:
        raise
    except Exception as exc:  # diagnostic line + nonzero exit, per contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
