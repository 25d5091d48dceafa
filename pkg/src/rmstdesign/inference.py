"""Final-analysis tests and confidence intervals for the RMST difference."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from scipy.stats import norm

from .augmentation import augmented_fit
from .datamodel import SurvivalDataset
from .estimators import rmst_fit

VARIANCES = ("influence", "plugin")


@dataclass(frozen=True)
class TestResult:
    estimate: float
    std_error: float
    z_value: float
    p_value: float
    ci: tuple
    method: str
    alpha: float = 0.05

    __test__ = False  # not a pytest class

    @property
    def rejects(self) -> bool:
        """True when the confidence interval excludes zero."""
        return not (self.ci[0] <= 0.0 <= self.ci[1])


def _result(estimate, se, alpha, method):
    crit = norm.isf(alpha / 2)
    z = estimate / se if se > 0 else (0.0 if estimate == 0 else math.copysign(math.inf, estimate))
    p = float(min(1.0, 2 * norm.sf(abs(z))))
    return TestResult(estimate, se, z, p, (estimate - crit * se, estimate + crit * se), method, alpha)


def rmst_test(
    d: SurvivalDataset,
    tau: float,
    alpha: float = 0.05,
    pi: float = 0.5,
    covariates: Optional[Sequence[str]] = None,
    variance: str = "influence",
) -> TestResult:
    """Wald test of no RMST difference.

    With covariates the augmented estimator and its variance are used;
    otherwise the unadjusted difference with the influence-function
    (default) or plug-in variance.
    """
    if variance not in VARIANCES:
        raise ValueError(f"variance must be one of {VARIANCES}")
    if covariates:
        fit = augmented_fit(d, tau, pi, covariates)
        return _result(fit.theta_aug, fit.std_error, alpha, "augmented")
    fit = rmst_fit(d, tau)
    return _result(fit.theta_diff, fit.std_error(variance), alpha, "unadjusted")


def analyze(d, tau, alpha=0.05, pi=0.5, covariates=None, variance="influence") -> list[TestResult]:
    """Unadjusted result, followed by the augmented one when covariates are given."""
    out = [rmst_test(d, tau, alpha, pi, None, variance)]
    if covariates:
        out.append(rmst_test(d, tau, alpha, pi, covariates))
    return out
