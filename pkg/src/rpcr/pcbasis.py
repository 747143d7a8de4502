"""Centered, scaled empirical principal-components design built by SVD.

Every estimator in this package regresses on ``Utilde = sqrt(n) * Uhat``,
where ``Uhat`` holds the left singular vectors of the column-centered
predictor matrix.  The scaling makes ``Utilde.T @ Utilde = n * I``, so the
least-squares lasso on this design has a closed form and the rank-based
solvers operate on a well-conditioned design.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "PCBasis",
    "center_dataset",
    "pc_basis",
    "basis_from_raw",
    "embed_row",
    "load_dataset_csv",
]


@dataclass
class Dataset:
    """Observed predictors ``Z`` (n x p) and response ``y`` (length n)."""

    Z: np.ndarray
    y: np.ndarray
    n: int
    p: int

    @classmethod
    def from_arrays(cls, Z, y):
        Z = np.asarray(Z, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if Z.ndim != 2:
            raise ValueError("Z must be a 2-d array")
        n, p = Z.shape
        if y.shape[0] != n:
            raise ValueError(f"y has length {y.shape[0]}, expected {n}")
        if n < 3:
            raise ValueError(f"need at least 3 observations, got {n}")
        if p < 1:
            raise ValueError("need at least one predictor column")
        if not (np.isfinite(Z).all() and np.isfinite(y).all()):
            raise ValueError("Z and y must be finite (no NaN/Inf)")
        return cls(Z=Z, y=y, n=n, p=p)


@dataclass
class PCBasis:
    """Scaled PC design plus the constants needed to reproduce it.

    Attributes
    ----------
    Utilde : ndarray of shape (n, m)
        sqrt(n) times the left singular vectors of the centered ``Z``.
    d : ndarray of shape (m,)
        Singular values of the centered ``Z``, nonincreasing.
    m : int
        min(n, p).
    col_means, y_mean :
        Centering constants of the training data; used at prediction time.
    """

    Utilde: np.ndarray
    d: np.ndarray
    m: int
    col_means: np.ndarray
    y_mean: float
    # right singular vectors; kept only so embed_row can score new rows
    Vt: np.ndarray = field(repr=False, default=None)


def center_dataset(raw: Dataset):
    """Column-center Z and mean-center y.

    Returns ``(centered, col_means, y_mean)``; the constants reconstruct
    raw-scale predictions later.
    """
    if raw.n < 3:
        raise ValueError(f"need at least 3 observations, got {raw.n}")
    col_means = raw.Z.mean(axis=0)
    y_mean = float(raw.y.mean())
    centered = Dataset(
        Z=raw.Z - col_means, y=raw.y - y_mean, n=raw.n, p=raw.p
    )
    return centered, col_means, y_mean


def pc_basis(data: Dataset, col_means=None, y_mean=0.0) -> PCBasis:
    """Thin SVD of the (already centered) predictor matrix.

    Column signs follow a fixed convention: each left singular vector is
    flipped so its largest-magnitude entry is positive (ties broken by the
    first occurrence), which makes the output deterministic across runs.
    Rank-deficient input is accepted; trailing zero singular values keep
    their (arbitrary orthonormal) columns.
    """
    n, p = data.n, data.p
    try:
        U, d, Vt = np.linalg.svd(data.Z, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"SVD failed to converge on a {n}x{p} matrix: {exc}"
        ) from exc
    m = min(n, p)
    # deterministic sign convention
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(m)])
    signs[signs == 0] = 1.0
    U = U * signs
    Vt = Vt * signs[:, None]
    if col_means is None:
        col_means = np.zeros(p)
    return PCBasis(
        Utilde=np.sqrt(n) * U,
        d=d,
        m=m,
        col_means=np.asarray(col_means, dtype=float),
        y_mean=float(y_mean),
        Vt=Vt,
    )


def basis_from_raw(raw: Dataset):
    """Center a raw dataset and build its PC basis in one step.

    Returns ``(basis, centered_dataset)``.
    """
    centered, col_means, y_mean = center_dataset(raw)
    return pc_basis(centered, col_means, y_mean), centered


def embed_row(basis: PCBasis, z_row, rtol=1e-8):
    """Score a centered predictor row in the training PC basis.

    Computes ``sqrt(n) * D^{-1} V^T z`` on components whose singular value
    exceeds ``rtol * d[0]``; dead components get score 0.  ``z_row`` must
    already be centered by ``basis.col_means``.
    """
    z = np.asarray(z_row, dtype=float).ravel()
    if z.shape[0] != basis.Vt.shape[1]:
        raise ValueError(
            f"row has {z.shape[0]} entries, basis expects {basis.Vt.shape[1]}"
        )
    n = basis.Utilde.shape[0]
    cutoff = rtol * (basis.d[0] if basis.d.size else 0.0)
    live = basis.d > cutoff
    scores = np.zeros(basis.m)
    if live.any():
        scores[live] = np.sqrt(n) * (basis.Vt[live] @ z) / basis.d[live]
    return scores


def load_dataset_csv(path, response):
    """Read a dataset from a CSV file with a header row.

    The column named ``response`` becomes y; every other column becomes a
    predictor, in file order.  Missing or non-numeric cells are rejected
    with their row and column named.

    Returns ``(Dataset, predictor_names)``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if response not in header:
            raise ValueError(f"{path}: no column named {response!r}")
        y_idx = header.index(response)
        pred_idx = [j for j in range(len(header)) if j != y_idx]
        rows = []
        for i, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ValueError(
                    f"{path}: line {i} has {len(rec)} fields, expected {len(header)}"
                )
            vals = []
            for j, cell in enumerate(rec):
                cell = cell.strip()
                try:
                    v = float(cell)
                except ValueError:
                    v = np.nan
                if cell == "" or not np.isfinite(v):
                    raise ValueError(
                        f"{path}: missing or non-numeric value at line {i}, "
                        f"column {header[j]!r}"
                    )
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    data = Dataset.from_arrays(arr[:, pred_idx], arr[:, y_idx])
    return data, [header[j] for j in pred_idx]
