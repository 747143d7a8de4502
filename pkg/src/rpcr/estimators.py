"""End-to-end fits on a raw dataset: RPCR, L1PCR, and raw-predictor LASSO.

All three center the predictors and the response, fit coefficients in the
centered scale, and restore location through an intercept at prediction
time.  RPCR and L1PCR share the scaled principal-component basis; LASSO
works on the centered raw predictors.
"""

from __future__ import annotations

import numpy as np

from .pcbasis import Dataset, PCBasis, basis_from_raw, embed_row
from .penalty import PenaltySpec, adaptive_weights
from .rankloss import RankProblem
from .results import FitResult, support_of
from .solver import (
    SolveOptions,
    cv_lasso_path,
    default_lasso_grid,
    solve_lasso_ls,
    solve_lasso_raw,
    solve_weighted_rank_l1,
)
from .tuning import HbicConfig, Lambda0Config, calibrate_lambda0, hbic_select


def rpcr_on_design(
    y_centered: np.ndarray,
    basis_design: np.ndarray,
    *,
    lambda0_cfg: Lambda0Config | None = None,
    family: str = "mcp",
    a: float | None = None,
    hbic_grid: np.ndarray | None = None,
    opts: SolveOptions | None = None,
) -> FitResult:
    """Two-stage rank fit on an already-centered response and basis design.

    Stage 1 solves the l1 problem at the simulated level lambda0; its
    solution drives concave-penalty weights, and stage 2 picks the level by
    HBIC.  The reported coefficients are the unpenalized refit on the
    selected support, the same estimate the criterion scores; the penalized
    stage-2 solution stays available in the diagnostics.
    """
    if lambda0_cfg is None:
        lambda0_cfg = Lambda0Config()
    if opts is None:
        opts = SolveOptions()
    prob = RankProblem.from_arrays(y_centered, basis_design)

    lam0 = calibrate_lambda0(prob.design, lambda0_cfg)
    rep1 = solve_weighted_rank_l1(prob, np.full(prob.m, lam0), opts)
    if not rep1.converged:
        raise RuntimeError(
            f"stage-1 solve did not converge at lambda0={lam0:.6g} "
            f"(gap {rep1.certificate_gap:.3e} after {rep1.iterations} iterations)"
        )
    pilot = rep1.theta_hat

    if hbic_grid is None:
        cfg = HbicConfig.for_problem(prob)
    else:
        cfg = HbicConfig(grid=np.asarray(hbic_grid, dtype=float), n=prob.n, m=prob.m)
    lam_hat, fit2 = hbic_select(prob, pilot, PenaltySpec(family, lam=1.0, a=a), cfg, opts)

    diagnostics = dict(fit2.diagnostics)
    diagnostics["lambda0"] = lam0
    diagnostics["stage1"] = {
        "theta": pilot,
        "objective": rep1.objective,
        "certificate_gap": rep1.certificate_gap,
        "iterations": rep1.iterations,
    }
    return FitResult(
        theta_hat=fit2.theta_hat,
        support=fit2.support,
        fitted_mean=fit2.fitted_mean,
        intercept=0.0,
        lambda_used={"lambda0": lam0, "lambda_hbic": lam_hat},
        method_tag="RPCR",
        diagnostics=diagnostics,
    )


def fit_rpcr(
    data: Dataset,
    *,
    lambda0_cfg: Lambda0Config | None = None,
    family: str = "mcp",
    a: float | None = None,
    hbic_grid: np.ndarray | None = None,
    opts: SolveOptions | None = None,
) -> FitResult:
    """Center, build the PC basis, and run the two-stage rank fit.

    The intercept is the median of the residuals: the rank loss only
    identifies the coefficients up to location, and the median keeps the
    restored location resistant to heavy-tailed errors.
    """
    basis, centered = basis_from_raw(data)
    fit = rpcr_on_design(
        centered.y, basis.Utilde,
        lambda0_cfg=lambda0_cfg, family=family, a=a,
        hbic_grid=hbic_grid, opts=opts,
    )
    intercept = float(np.median(centered.y - fit.fitted_mean))
    diagnostics = dict(fit.diagnostics)
    diagnostics["basis"] = basis
    return FitResult(
        theta_hat=fit.theta_hat,
        support=fit.support,
        fitted_mean=fit.fitted_mean,
        intercept=intercept,
        lambda_used=fit.lambda_used,
        method_tag="RPCR",
        diagnostics=diagnostics,
    )


def l1pcr_on_design(
    y_centered: np.ndarray,
    basis_design: np.ndarray,
    *,
    lam: float | None = None,
    cv_folds: int = 10,
    rng_seed: int = 0,
    opts: SolveOptions | None = None,
) -> FitResult:
    """Squared-loss lasso on the (fixed) PC basis design.

    With lam=None the level is chosen by cross-validation on rows: the
    basis itself stays fixed (it comes from the full design), only the
    lasso solve sees the training rows.  Validation error is pooled squared
    prediction error; ties go to the larger level.
    """
    X = np.asarray(basis_design, dtype=float)
    y = np.asarray(y_centered, dtype=float)
    n, m = X.shape
    if opts is None:
        opts = SolveOptions()

    cv_curve = None
    grid = None
    if lam is None:
        grid = default_lasso_grid(X, y)
        if grid.size == 1 and grid[0] == 0.0:
            lam = 0.0
            grid = None
        else:
            cv_curve = cv_lasso_path(X, y, grid, cv_folds, rng_seed)
            lam = float(grid[int(np.argmin(cv_curve))])

    report = solve_lasso_ls(y, X, float(lam), opts)
    theta = report.theta_hat
    diagnostics = {"solver": {
        "objective": report.objective,
        "certificate_gap": report.certificate_gap,
        "converged": report.converged,
    }}
    if cv_curve is not None:
        diagnostics["cv_lambda_grid"] = grid
        diagnostics["cv_error"] = cv_curve
    return FitResult(
        theta_hat=theta,
        support=support_of(theta),
        fitted_mean=X @ theta,
        intercept=0.0,
        lambda_used=float(lam),
        method_tag="L1PCR",
        diagnostics=diagnostics,
    )


def fit_l1pcr(
    data: Dataset,
    *,
    lam: float | None = None,
    cv_folds: int = 10,
    rng_seed: int = 0,
    opts: SolveOptions | None = None,
) -> FitResult:
    """Center, build the PC basis, and fit the squared-loss PC lasso."""
    basis, centered = basis_from_raw(data)
    fit = l1pcr_on_design(
        centered.y, basis.Utilde,
        lam=lam, cv_folds=cv_folds, rng_seed=rng_seed, opts=opts,
    )
    intercept = float(np.mean(centered.y - fit.fitted_mean))
    diagnostics = dict(fit.diagnostics)
    diagnostics["basis"] = basis
    return FitResult(
        theta_hat=fit.theta_hat,
        support=fit.support,
        fitted_mean=fit.fitted_mean,
        intercept=intercept,
        lambda_used=fit.lambda_used,
        method_tag="L1PCR",
        diagnostics=diagnostics,
    )


def fit_lasso(
    data: Dataset,
    *,
    lambda_grid: np.ndarray | None = None,
    cv_folds: int = 10,
    rng_seed: int = 0,
) -> FitResult:
    """Plain lasso on the centered raw predictors, level by cross-validation."""
    Z = np.asarray(data.Z, dtype=float)
    col_means = Z.mean(axis=0)
    Zc = Z - col_means
    y_mean = float(np.mean(data.y))
    yc = np.asarray(data.y, dtype=float) - y_mean
    fit = solve_lasso_raw(Zc, yc, lambda_grid=lambda_grid,
                          folds=cv_folds, rng_seed=rng_seed)
    intercept = float(np.mean(yc - fit.fitted_mean))
    diagnostics = dict(fit.diagnostics)
    diagnostics["col_means"] = col_means
    diagnostics["y_mean"] = y_mean
    return FitResult(
        theta_hat=fit.theta_hat,
        support=fit.support,
        fitted_mean=fit.fitted_mean,
        intercept=intercept,
        lambda_used=fit.lambda_used,
        method_tag="LASSO",
        diagnostics=diagnostics,
    )


def predict(fit: FitResult, basis: PCBasis | None, Z_new: np.ndarray) -> np.ndarray:
    """Predict responses for new predictor rows.

    PC-based fits embed each centered row into the basis coordinates; the
    raw lasso applies its coefficients to the centered predictors directly.
    Either way the location is restored as intercept + training y mean.
    """
    Z_new = np.atleast_2d(np.asarray(Z_new, dtype=float))
    if fit.method_tag == "LASSO":
        col_means = fit.diagnostics["col_means"]
        y_mean = fit.diagnostics["y_mean"]
        if Z_new.shape[1] != col_means.shape[0]:
            raise ValueError(
                f"rows have {Z_new.shape[1]} predictors, expected {col_means.shape[0]}"
            )
        return (Z_new - col_means) @ fit.theta_hat + fit.intercept + y_mean
    if basis is None:
        basis = fit.diagnostics.get("basis")
    if basis is None:
        raise ValueError("PC-based prediction needs the training basis")
    if Z_new.shape[1] != basis.col_means.shape[0]:
        raise ValueError(
            f"rows have {Z_new.shape[1]} predictors, expected {basis.col_means.shape[0]}"
        )
    out = np.empty(Z_new.shape[0])
    for i, row in enumerate(Z_new):
        coords = embed_row(basis, row - basis.col_means)
        out[i] = float(coords @ fit.theta_hat)
    return out + fit.intercept + basis.y_mean
