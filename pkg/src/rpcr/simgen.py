"""Synthetic designs, error laws, and predictor contamination for the
simulation studies.

Both latent designs have exactly two singular-value tiers: Model 1 puts
90% of the design energy on the first seven components and concentrates
the signal there; Model 2 separates an "active" block of the six trailing
components whose eigenvalue sits a gap kappa below the rest, with a weakly
sparse coefficient vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

M1_HEAD = np.array([0.483, 0.0, 0.029, 0.019, 0.0, 0.126, 0.009])
M2_TAIL = np.array([0.009, 0.125, 0.003, 0.019, 0.029, 0.482])
M2_BASE = 0.003

ERROR_LAWS = ("normal", "t3_std", "mixnorm_std")
CONTAMINATIONS = ("none", "indep", "ar_corr")
AR_RHO = 0.5
MIX_PROB = 0.1
MIX_SD = 10.0
MIX_SCALE = np.sqrt(0.9 * 1.0 + 0.1 * MIX_SD**2)  # sqrt(10.9)


@dataclass(frozen=True)
class SimDesign:
    model: str
    n: int
    p: int
    kappa: float | None
    theta_star: np.ndarray
    X: np.ndarray
    y_star: np.ndarray


@dataclass(frozen=True)
class NoiseSpec:
    error_law: str = "normal"
    contamination: str = "none"
    rng_seed: object = 0

    def __post_init__(self):
        if self.error_law not in ERROR_LAWS:
            raise ValueError(f"unknown error law {self.error_law!r}")
        if self.contamination not in CONTAMINATIONS:
            raise ValueError(f"unknown contamination {self.contamination!r}")


def gen_design(model: str, n: int, p: int, kappa: float | None = None,
               rng_seed: object = 0) -> SimDesign:
    """Draw a latent two-tier design and its principal-components signal.

    A standard normal matrix supplies the singular bases; the two tiers a
    and b rescale the active and inactive blocks.  y* = sqrt(n) U theta*.
    """
    m = min(n, p)
    if model == "M1":
        if m <= 7:
            raise ValueError(f"model M1 needs min(n, p) > 7, got {m}")
        a = np.sqrt(0.9 * n * p / 7.0)
        b = np.sqrt(0.1 * n * p / (m - 7.0))
        active = np.arange(7)
        theta_star = np.zeros(m)
        theta_star[:7] = M1_HEAD
        kappa = None
    elif model == "M2":
        if m < 6:
            raise ValueError(f"model M2 needs min(n, p) >= 6, got {m}")
        if kappa is None or not kappa > 0:
            raise ValueError("model M2 needs kappa > 0")
        a = np.sqrt(kappa * p)
        b = np.sqrt(2.0 * kappa * p)
        active = np.arange(m - 6, m)
        theta_star = np.full(m, M2_BASE)
        theta_star[m - 6:] = M2_TAIL
    else:
        raise ValueError(f"unknown model {model!r}")

    rng = np.random.default_rng(rng_seed)
    M = rng.standard_normal((n, p))
    U, _, Vt = np.linalg.svd(M, full_matrices=False)
    scales = np.full(m, b)
    scales[active] = a
    X = (U * scales) @ Vt
    y_star = np.sqrt(n) * (U @ theta_star)
    return SimDesign(model=model, n=n, p=p, kappa=kappa,
                     theta_star=theta_star, X=X, y_star=y_star)


def _draw_errors(law: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if law == "normal":
        return rng.standard_normal(n)
    if law == "t3_std":
        z = rng.standard_normal(n)
        chi = rng.chisquare(3, n)
        return z / np.sqrt(chi / 3.0) / np.sqrt(3.0)
    # mixture 0.9 N(0,1) + 0.1 N(0,100), standardized to unit variance
    z = rng.standard_normal(n)
    wide = rng.random(n) < MIX_PROB
    z[wide] *= MIX_SD
    return z / MIX_SCALE


def _draw_contamination(kind: str, n: int, p: int,
                        rng: np.random.Generator) -> np.ndarray | None:
    if kind == "none":
        return None
    if kind == "indep":
        return rng.standard_normal((n, p))
    # row-wise AR(1): w_1 = z_1, w_j = rho w_{j-1} + sqrt(1-rho^2) z_j
    z = rng.standard_normal((n, p))
    W = np.empty((n, p))
    W[:, 0] = z[:, 0]
    fresh = np.sqrt(1.0 - AR_RHO**2)
    for j in range(1, p):
        W[:, j] = AR_RHO * W[:, j - 1] + fresh * z[:, j]
    return W


def gen_noise(design: SimDesign, spec: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Observed (Z, y): response errors first, then predictor contamination,
    in a fixed draw order so a seed pins both."""
    rng = np.random.default_rng(spec.rng_seed)
    eps = _draw_errors(spec.error_law, design.n, rng)
    y = design.y_star + eps
    W = _draw_contamination(spec.contamination, design.n, design.p, rng)
    Z = design.X if W is None else design.X + W
    return Z.copy() if W is None else Z, y
