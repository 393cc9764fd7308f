"""L1 regularization paths with Hessian, strong, working-set and Gap Safe
screening, plus a benchmark harness."""

from .bench import ExperimentSpec, default_spec, replay_row, run_experiment, summarize
from .cd import SubproblemSpec, cd_epoch, line_search, solve_subproblem
from .datasets import SimSpec, find_duplicate_columns, load_libsvm, simulate, write_libsvm
from .design import DenseDesign, SparseDesign, StandardizedData, as_design, standardize
from .estimator import L1RegularizationPath
from .gram import (
    GramSingularError,
    GramState,
    augment_gram,
    build_gram,
    precondition,
    reduce_gram,
    update_gram,
)
from .losses import (
    LossModel,
    QuadraticLocalModel,
    correlation,
    curvature_weights,
    deviance_stats,
    duality_gap,
    lambda_max,
    make_loss,
)
from .path import PathConfig, PathResult, fit_path, lambda_grid, warm_start
from .screening import (
    HessianEstimate,
    ScreenSets,
    gap_safe_screen,
    hessian_estimate,
    hessian_screen,
    kkt_check,
    strong_estimate,
    strong_kept,
)

__version__ = "0.1.0"
