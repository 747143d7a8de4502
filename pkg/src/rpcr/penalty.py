"""SCAD and MCP folded-concave penalties and the adaptive weights they induce.

Only the penalty derivative matters algorithmically: stage two of the rank
estimator solves a weighted-l1 problem with weights ``w_j = p'(|pilot_j|)``,
so strong pilot coordinates become unpenalized and killed coordinates keep
the full level lambda.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PenaltySpec", "penalty_value", "penalty_deriv", "adaptive_weights"]

_DEFAULT_A = {"scad": 3.7, "mcp": 3.0}


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family with shape parameter ``a`` and level ``lam``."""

    family: str
    a: float = None
    lam: float = 0.0

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in ("scad", "mcp"):
            raise ValueError(f"unknown penalty family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if self.a is None:
            object.__setattr__(self, "a", _DEFAULT_A[fam])
        if fam == "scad" and not self.a > 2:
            raise ValueError(f"SCAD requires a > 2, got a={self.a}")
        if fam == "mcp" and not self.a > 1:
            raise ValueError(f"MCP requires a > 1, got a={self.a}")
        if self.lam < 0 or not np.isfinite(self.lam):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")

    def with_lam(self, lam):
        return PenaltySpec(self.family, self.a, lam)


def penalty_value(spec: PenaltySpec, t):
    """Penalty p_lam(t) for t >= 0 (vectorized)."""
    t = np.asarray(t, dtype=float)
    if (t < 0).any():
        raise ValueError("penalty_value expects t >= 0")
    lam, a = spec.lam, spec.a
    if lam == 0.0:
        return np.zeros_like(t) if t.ndim else 0.0
    if spec.family == "scad":
        out = np.where(
            t < lam,
            lam * t,
            np.where(
                t <= a * lam,
                (a * lam * t - 0.5 * (t * t + lam * lam)) / (a - 1),
                0.5 * (a + 1) * lam * lam,
            ),
        )
    else:
        out = np.where(
            t < a * lam,
            lam * (t - t * t / (2 * a * lam)),
            0.5 * a * lam * lam,
        )
    return float(out) if out.ndim == 0 else out


def penalty_deriv(spec: PenaltySpec, t):
    """Derivative p'_lam(t) for t > 0; nonincreasing, zero beyond a*lam."""
    t = np.asarray(t, dtype=float)
    if (t <= 0).any():
        raise ValueError("penalty_deriv expects t > 0")
    lam, a = spec.lam, spec.a
    if lam == 0.0:
        return np.zeros_like(t) if t.ndim else 0.0
    if spec.family == "scad":
        out = np.where(
            t <= lam,
            lam,
            np.maximum(a * lam - t, 0.0) / (a - 1),
        )
    else:
        out = np.maximum(lam - t / a, 0.0)
    return float(out) if out.ndim == 0 else out


def adaptive_weights(spec: PenaltySpec, pilot):
    """Stage-2 weights w_j = p'_lam(|pilot_j|), with w_j = lam at pilot_j = 0.

    The value at zero is the right-limit of the derivative for both
    families, so coordinates the pilot kills stay fully penalized.
    """
    pilot = np.asarray(pilot, dtype=float).ravel()
    if not np.isfinite(pilot).all():
        raise ValueError("pilot must be finite")
    if spec.lam == 0.0:
        return np.zeros_like(pilot)
    w = np.full(pilot.shape, spec.lam)
    nz = pilot != 0
    if nz.any():
        w[nz] = penalty_deriv(spec, np.abs(pilot[nz]))
    return w
