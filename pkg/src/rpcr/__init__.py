"""Rank-based sparse regression in empirical principal-components space.

The estimator ranks residuals instead of squaring them, which keeps the
fit stable under heavy-tailed response errors, and it regresses on the
left-singular-vector scores of the observed design, which absorbs additive
predictor noise.  A pilot l1 fit at a simulated penalty level feeds
concave-penalty weights to a second stage whose level is chosen by a
high-dimensional BIC.  Least-squares baselines (lasso on scores, lasso on
raw predictors), synthetic data generators, a seeded Monte Carlo harness,
and a leave-one-out protocol under predictor contamination round out the
package.
"""

from .bench import (
    ExperimentManifest,
    ExperimentResult,
    LoocvResult,
    emit_loocv_outputs,
    emit_outputs,
    prediction_error,
    run_loocv,
    run_monte_carlo,
    screen_predictors,
)
from .estimators import (
    fit_l1pcr,
    fit_lasso,
    fit_rpcr,
    l1pcr_on_design,
    predict,
    rpcr_on_design,
)
from .pcbasis import (
    Dataset,
    PCBasis,
    basis_from_raw,
    center_dataset,
    embed_row,
    load_dataset_csv,
    pc_basis,
)
from .penalty import PenaltySpec, adaptive_weights, penalty_deriv, penalty_value
from .rankloss import (
    RankProblem,
    rank_eta,
    rank_loss_fast,
    rank_loss_pairwise,
    rank_score,
    simulated_score,
)
from .results import FitResult, support_of
from .simgen import (
    CONTAMINATIONS,
    ERROR_LAWS,
    NoiseSpec,
    SimDesign,
    gen_design,
    gen_noise,
)
from .solver import (
    SolveOptions,
    SolveReport,
    solve_lasso_ls,
    solve_lasso_raw,
    solve_weighted_rank_l1,
)
from .tuning import (
    HbicConfig,
    Lambda0Config,
    calibrate_lambda0,
    default_lambda_grid,
    hbic_select,
    hbic_value,
)

__version__ = "0.1.0"

__all__ = [
    "CONTAMINATIONS",
    "ERROR_LAWS",
    "Dataset",
    "ExperimentManifest",
    "ExperimentResult",
    "FitResult",
    "HbicConfig",
    "Lambda0Config",
    "LoocvResult",
    "NoiseSpec",
    "PCBasis",
    "PenaltySpec",
    "RankProblem",
    "SimDesign",
    "SolveOptions",
    "SolveReport",
    "adaptive_weights",
    "basis_from_raw",
    "calibrate_lambda0",
    "center_dataset",
    "default_lambda_grid",
    "embed_row",
    "emit_loocv_outputs",
    "emit_outputs",
    "fit_l1pcr",
    "fit_lasso",
    "fit_rpcr",
    "gen_design",
    "gen_noise",
    "hbic_select",
    "hbic_value",
    "l1pcr_on_design",
    "load_dataset_csv",
    "pc_basis",
    "penalty_deriv",
    "penalty_value",
    "prediction_error",
    "predict",
    "rank_eta",
    "rank_loss_fast",
    "rank_loss_pairwise",
    "rank_score",
    "rpcr_on_design",
    "run_loocv",
    "run_monte_carlo",
    "screen_predictors",
    "simulated_score",
    "solve_lasso_ls",
    "solve_lasso_raw",
    "solve_weighted_rank_l1",
    "support_of",
    "__version__",
]
