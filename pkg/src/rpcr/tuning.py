"""Penalty-level selection: simulated lambda0 and HBIC grid search.

The stage-1 level is calibrated from the permutation distribution of the
score at theta = 0, which is pivotal: it does not depend on the unknown
error law, only on the design.  Stage 2 picks its level by a BIC-type
criterion whose complexity term grows with log m, so it stays consistent
when m is comparable to n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .penalty import PenaltySpec, adaptive_weights
from .rankloss import RankProblem, rank_loss_fast, rank_score, simulated_score
from .results import FitResult, support_of
from .solver import SolveOptions, solve_weighted_rank_l1


@dataclass(frozen=True)
class Lambda0Config:
    """Controls the simulated calibration of the stage-1 level."""

    c: float = 1.01
    alpha0: float = 0.10
    B: int = 500
    rng_seed: int = 0

    def __post_init__(self):
        if not self.c > 1.0:
            raise ValueError(f"c must exceed 1, got {self.c}")
        if not 0.0 < self.alpha0 < 1.0:
            raise ValueError(f"alpha0 must lie in (0, 1), got {self.alpha0}")
        if self.B < 100:
            raise ValueError(f"B must be at least 100, got {self.B}")


@dataclass(frozen=True)
class HbicConfig:
    """Grid, dimensions, and model-size cap for the stage-2 criterion.

    max_support confines the selection to models well below the saturation
    size: once the support reaches n - 1 the refit interpolates the
    centered response, the log-loss term diverges to -inf, and the
    criterion would always pick the densest model.  None means
    ceil(n / log n), the usual restriction for BIC-type selectors of this
    kind.
    """

    grid: np.ndarray
    n: int
    m: int
    max_support: int | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid must be a nonempty 1-d array")
        if not np.all(np.isfinite(grid)) or (grid < 0).any():
            raise ValueError("grid values must be finite and nonnegative")
        if grid.size > 1 and not (np.diff(grid) < 0).all():
            raise ValueError("grid must be strictly decreasing")
        object.__setattr__(self, "grid", grid)
        if self.max_support is None:
            object.__setattr__(
                self, "max_support", int(math.ceil(self.n / math.log(self.n)))
            )
        elif self.max_support < 1:
            raise ValueError("max_support must be at least 1")

    @classmethod
    def for_problem(cls, prob: RankProblem, num: int = 30, ratio: float = 0.01,
                    max_support: int | None = None):
        return cls(grid=default_lambda_grid(prob, num=num, ratio=ratio),
                   n=prob.n, m=prob.m, max_support=max_support)


def calibrate_lambda0(basis_design: np.ndarray, cfg: Lambda0Config | None = None) -> float:
    """Simulated stage-1 level: c times the (1 - alpha0) quantile of the
    sup-norm of the permutation score at theta = 0.

    The quantile is the order statistic of rank ceil((1 - alpha0) * B).
    """
    if cfg is None:
        cfg = Lambda0Config()
    design = np.asarray(basis_design, dtype=float)
    rng = np.random.default_rng(cfg.rng_seed)
    sups = np.empty(cfg.B)
    for b in range(cfg.B):
        sups[b] = np.abs(simulated_score(design, rng)).max(initial=0.0)
    k = math.ceil((1.0 - cfg.alpha0) * cfg.B)
    return cfg.c * float(np.sort(sups)[k - 1])


def default_lambda_grid(prob: RankProblem, num: int = 30, ratio: float = 0.01) -> np.ndarray:
    """Log-spaced grid from lambda_max down to ratio * lambda_max, where
    lambda_max = ||S_n(0)||_inf is the smallest level that zeroes the plain
    l1 solution."""
    lam_max = float(np.abs(rank_score(np.zeros(prob.m), prob)).max(initial=0.0))
    if lam_max <= 0.0:
        return np.array([0.0])
    return np.geomspace(lam_max, ratio * lam_max, num)


def hbic_value(qn_refit: float, support_size: int, n: int, m: int) -> float:
    """log Q_n(refit) + |A| * (log log n / n) * log m; -inf on a perfect fit."""
    if qn_refit <= 0.0:
        return -math.inf
    return math.log(qn_refit) + support_size * (math.log(math.log(n)) / n) * math.log(m)


def hbic_select(
    prob: RankProblem,
    pilot: np.ndarray,
    family_spec: PenaltySpec,
    cfg: HbicConfig,
    opts: SolveOptions | None = None,
) -> tuple[float, FitResult]:
    """Stage-2 fit: concave-penalty weights from the pilot at each grid level,
    refit on the selected support, and pick the level minimizing the
    high-dimensional BIC (ties resolved toward the larger level).

    Refits are cached per support set, so levels sharing a support tie
    exactly and the tie-break is well defined.  A refit with zero loss is a
    perfect fit; its criterion is -inf and that level wins outright.
    Levels whose support exceeds cfg.max_support are inadmissible
    (criterion +inf); after two consecutive oversized supports the descent
    stops, since smaller levels only grow the model further.  If every
    level is oversized, the last computed penalized fit is returned so a
    singleton grid always selects its level.

    The returned coefficients are the unpenalized refit on the winning
    support (the bias-reduced estimate the criterion itself scores); the
    penalized solution at the winning level is kept in diagnostics.
    """
    pilot = np.asarray(pilot, dtype=float)
    if pilot.shape != (prob.m,):
        raise ValueError(f"pilot has shape {pilot.shape}, expected ({prob.m},)")
    if (cfg.n, cfg.m) != (prob.n, prob.m):
        raise ValueError("HbicConfig dimensions do not match the problem")
    if opts is None:
        opts = SolveOptions()

    grid = cfg.grid
    n_grid = grid.size
    hbics = np.full(n_grid, np.nan)
    loss_terms = np.full(n_grid, np.nan)
    complexity_terms = np.full(n_grid, np.nan)
    support_sizes = np.full(n_grid, -1, dtype=int)
    refit_losses = np.full(n_grid, np.nan)

    best = None
    fallback = None
    warm = None
    oversize_streak = 0
    refit_cache: dict[tuple[int, ...], tuple[np.ndarray, float]] = {}
    for idx, lam in enumerate(grid):
        pen = family_spec.with_lam(float(lam))
        weights = adaptive_weights(pen, pilot)
        rep = solve_weighted_rank_l1(prob, weights, opts, warm_start=warm)
        if not rep.converged:
            raise RuntimeError(
                f"stage-2 solve did not converge at lambda={lam:.6g} "
                f"(gap {rep.certificate_gap:.3e} after {rep.iterations} iterations)"
            )
        warm = rep.theta_hat
        sup = support_of(rep.theta_hat)
        support_sizes[idx] = sup.size
        fallback = (float(lam), rep)
        if sup.size > cfg.max_support:
            hbics[idx] = math.inf
            oversize_streak += 1
            if oversize_streak >= 2:
                break
            continue
        oversize_streak = 0
        key = tuple(sup.tolist())
        if key in refit_cache:
            refit_theta, qn = refit_cache[key]
        else:
            if sup.size:
                mask = np.ones(prob.m, dtype=bool)
                mask[sup] = False
                refit_opts = SolveOptions(
                    obj_tol=opts.obj_tol, max_iters=opts.max_iters,
                    rng_seed=opts.rng_seed, fixed_zero_mask=mask, method=opts.method,
                )
                refit_rep = solve_weighted_rank_l1(
                    prob, np.zeros(prob.m), refit_opts, warm_start=rep.theta_hat)
                if not refit_rep.converged:
                    raise RuntimeError(
                        f"stage-2 refit did not converge at lambda={lam:.6g}"
                    )
                refit_theta = refit_rep.theta_hat
            else:
                refit_theta = np.zeros(prob.m)
            qn = rank_loss_fast(refit_theta, prob)
            refit_cache[key] = (refit_theta, qn)
        crit = hbic_value(qn, sup.size, cfg.n, cfg.m)
        hbics[idx] = crit
        loss_terms[idx] = math.log(qn) if qn > 0 else -math.inf
        complexity_terms[idx] = sup.size * (math.log(math.log(cfg.n)) / cfg.n) * math.log(cfg.m)
        refit_losses[idx] = qn
        # strict improvement keeps the earlier (larger) level on ties
        if best is None or crit < best[0]:
            best = (crit, float(lam), rep, refit_theta)

    if best is None:
        lam_hat, rep_hat = fallback
        theta = rep_hat.theta_hat
        penalized = theta
    else:
        _, lam_hat, rep_hat, refit_hat = best
        theta = refit_hat
        penalized = rep_hat.theta_hat
    fit = FitResult(
        theta_hat=theta,
        support=support_of(theta),
        fitted_mean=prob.design @ theta,
        intercept=0.0,
        lambda_used=lam_hat,
        method_tag="RPCR",
        diagnostics={
            "lambda_grid": grid.copy(),
            "hbic": hbics,
            "hbic_loss_term": loss_terms,
            "hbic_complexity_term": complexity_terms,
            "support_sizes": support_sizes,
            "refit_loss": refit_losses,
            "penalized_theta": penalized,
            "selection_fallback": best is None,
            "solver": {
                "objective": rep_hat.objective,
                "certificate_gap": rep_hat.certificate_gap,
                "iterations": rep_hat.iterations,
                "converged": rep_hat.converged,
            },
        },
    )
    return lam_hat, fit
