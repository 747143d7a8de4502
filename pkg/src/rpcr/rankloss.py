"""Pairwise Wilcoxon rank loss, its score, and fast rank-based equivalents.

The loss of a coefficient vector theta on residuals ``r = y - X theta`` is

    Q(theta) = (1/(n(n-1))) * sum_{i != j} |r_i - r_j|,

a convex, location-invariant criterion.  A classical identity rewrites the
double sum through ranks, giving an O(n log n) evaluation path and the
score (negative gradient) used for tuning and optimality certificates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "RankProblem",
    "rank_loss_pairwise",
    "rank_loss_fast",
    "rank_eta",
    "rank_score",
    "simulated_score",
]


@dataclass
class RankProblem:
    """A centered response paired with a centered design.

    The design may be the scaled PC basis or any other column-centered
    matrix; losses and solvers only rely on centering.
    """

    y: np.ndarray
    design: np.ndarray
    n: int
    m: int

    @classmethod
    def from_arrays(cls, y, design, check_centering=True):
        y = np.asarray(y, dtype=float).ravel()
        design = np.asarray(design, dtype=float)
        n, m = design.shape
        if y.shape[0] != n:
            raise ValueError(f"y has length {y.shape[0]}, design has {n} rows")
        if check_centering:
            # tolerance is relative to data scale so large-magnitude inputs
            # do not trip on accumulated roundoff
            tol = 1e-8 * np.sqrt(n)
            if abs(y.sum()) > tol * max(1.0, np.abs(y).max(initial=0.0)):
                raise ValueError("y is not centered")
            colsum = np.abs(design.sum(axis=0))
            scale = np.maximum(1.0, np.abs(design).max(axis=0, initial=0.0))
            off = colsum > tol * scale
            if off.any():
                # a constant column is exempt: pairwise differencing cancels
                # it, and the trailing null component of a centered square
                # basis is necessarily the constant direction
                spread = design.max(axis=0) - design.min(axis=0)
                if (off & (spread > 1e-8 * scale)).any():
                    raise ValueError("design columns are not centered")
        return cls(y=y, design=design, n=n, m=m)


def _residuals(theta, prob):
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != prob.m:
        raise ValueError(f"theta has length {theta.shape[0]}, expected {prob.m}")
    return prob.y - prob.design @ theta


def rank_loss_pairwise(theta, prob: RankProblem):
    """Reference O(n^2) evaluation by direct pair enumeration."""
    r = _residuals(theta, prob)
    n = prob.n
    iu, ju = np.triu_indices(n, 1)
    return 2.0 * np.abs(r[iu] - r[ju]).sum() / (n * (n - 1))


def rank_loss_fast(theta, prob: RankProblem):
    """O(n log n) evaluation through the rank identity.

    With midranks R_i, ``sum_i (R_i - (n+1)/2) r_i = (1/2) sum_{i<j}
    |r_i - r_j|`` holds exactly (tied pairs contribute zero on both sides),
    so the pairwise loss equals ``(4/(n(n-1))) * sum_i (R_i-(n+1)/2) r_i``.
    """
    r = _residuals(theta, prob)
    n = prob.n
    R = rankdata(r, method="average")
    return 4.0 * np.dot(R - (n + 1) / 2.0, r) / (n * (n - 1))


def rank_eta(r):
    """Wilcoxon score vector eta_i = 2 R_i - (n+1) with midranks.

    Equals ``sum_{j != i} sign(r_i - r_j)``; entries lie in [-(n-1), n-1].
    """
    n = r.shape[0]
    return 2.0 * rankdata(r, method="average") - (n + 1)


def rank_score(theta, prob: RankProblem):
    """Negative gradient of the loss at theta (midrank selection on ties)."""
    r = _residuals(theta, prob)
    n = prob.n
    return 2.0 * (prob.design.T @ rank_eta(r)) / (n * (n - 1))


def simulated_score(basis_design, rng):
    """One draw of the null score used to calibrate the stage-1 level.

    Replaces the residual ranks with a uniform random permutation of
    ``1..n``:  ``S = -(2/(n(n-1))) * X^T xi`` with ``xi = 2 r - (n+1)``.

    Parameters
    ----------
    basis_design : column-centered design (n x m).
    rng : numpy Generator, or a seed accepted by ``np.random.default_rng``.
    """
    design = np.asarray(basis_design, dtype=float)
    n = design.shape[0]
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    perm = rng.permutation(n) + 1
    xi = 2.0 * perm - (n + 1)
    return -2.0 * (design.T @ xi) / (n * (n - 1))
