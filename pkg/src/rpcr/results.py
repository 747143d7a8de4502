"""Common fit-result container shared by estimators and tuning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["FitResult", "SUPPORT_THRESHOLD", "support_of"]

# coefficients below this magnitude count as zero when reporting supports;
# solvers return exact zeros on penalized coordinates but refits may not
SUPPORT_THRESHOLD = 1e-8


def support_of(theta, threshold=SUPPORT_THRESHOLD):
    return np.flatnonzero(np.abs(np.asarray(theta)) > threshold)


@dataclass
class FitResult:
    """Fitted coefficients plus everything needed to predict and audit.

    ``theta_hat`` lives in the space the method regressed on (PC scores for
    RPCR/L1PCR, raw predictors for LASSO).  ``fitted_mean`` is the fitted
    value of the centered response, ``design @ theta_hat``.
    """

    theta_hat: np.ndarray
    support: np.ndarray
    fitted_mean: np.ndarray
    intercept: float
    lambda_used: object
    method_tag: str
    diagnostics: dict = field(default_factory=dict)
