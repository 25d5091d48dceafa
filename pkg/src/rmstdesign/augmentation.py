"""Covariate augmentation of the RMST difference.

The augmentation term ``n^-1 sum (Z_i - pi) c'V_i`` has mean zero under
randomisation for any fixed ``c``; ``c_hat`` projects the influence values
onto the span of ``(Z - pi) V`` to minimise the variance. ``pi`` is always
the design allocation probability, never the observed fraction.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .datamodel import SurvivalDataset
from .errors import SingularGram
from .estimators import RmstFit, arm_martingale, rmst_fit

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


def _solve_gram(gram: np.ndarray, rhs: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Solve ``gram @ x = rhs`` with an SVD-based condition guard."""
    if gram.shape[0] == 0:
        return np.zeros(0)
    u, s, vt = np.linalg.svd(gram)
    cond = np.inf if s[-1] <= 0 else s[0] / s[-1]
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        # covariates loading on the weakest singular direction
        weak = np.abs(vt[-1])
        offending = [n for n, w in zip(names, weak) if w > 0.1 * weak.max()]
        raise SingularGram(
            f"covariate Gram matrix is singular (condition number {cond:.3g}); "
            f"collinear covariates: {offending}",
            condition_number=cond,
            offending=offending,
        )
    return vt.T @ ((u.T @ rhs) / s)


def _covariates(d: SurvivalDataset, covariates: Optional[Sequence[str]]):
    if covariates is None:
        return d.covariates, d.covariate_names
    covariates = tuple(covariates)
    return d.covariate_matrix(covariates), covariates


def _check_pi(pi):
    if not 0 < pi < 1:
        raise ValueError(f"allocation probability must be in (0, 1), got {pi}")


def c_hat(
    d: SurvivalDataset,
    tau: float,
    pi: float = 0.5,
    covariates: Optional[Sequence[str]] = None,
    fit: Optional[RmstFit] = None,
) -> np.ndarray:
    """Variance-minimising augmentation coefficients.

    ``{pi(1-pi) sum V V'}^-1 sum (Z - pi) V H`` where ``H`` are the
    influence values of the unadjusted difference.
    """
    _check_pi(pi)
    z = d.require_arm()
    v, names = _covariates(d, covariates)
    if fit is None:
        fit = rmst_fit(d, tau)
    gram = pi * (1 - pi) * (v.T @ v)
    rhs = v.T @ ((z - pi) * fit.influence)
    return _solve_gram(gram, rhs, names)


@dataclass(frozen=True, eq=False)
class AugmentedFit:
    base: RmstFit
    c_hat: np.ndarray
    theta_aug: float
    var_aug: float
    pi: float
    covariate_names: tuple = ()
    observed_fraction: float = field(default=float("nan"))

    @property
    def std_error(self) -> float:
        return float(np.sqrt(self.var_aug / self.base.n))


def augmented_fit(
    d: SurvivalDataset,
    tau: float,
    pi: float = 0.5,
    covariates: Optional[Sequence[str]] = None,
    c: Optional[np.ndarray] = None,
) -> AugmentedFit:
    """Augmented RMST difference.

    Parameters
    ----------
    c : array_like, optional
        Fixed coefficients. When omitted, :func:`c_hat` is used.
    """
    _check_pi(pi)
    z = d.require_arm()
    v, names = _covariates(d, covariates)
    base = rmst_fit(d, tau)
    if c is None:
        coef = c_hat(d, tau, pi, names, fit=base) if v.shape[1] else np.zeros(0)
    else:
        coef = np.asarray(c, dtype=float).ravel()
        if coef.size != v.shape[1]:
            raise ValueError(f"c has length {coef.size}, expected {v.shape[1]}")
    n = d.n
    if coef.size:
        term = (z - pi) * (v @ coef)
        theta_aug = base.theta_diff - float(np.sum(term)) / n
        resid = base.influence - term
        var_aug = float(np.dot(resid, resid) / n)
    else:
        theta_aug, var_aug = base.theta_diff, base.var_influence
    fraction = float(np.mean(z))
    if abs(fraction - pi) > 0.1:
        logger.info("observed allocation %.3f differs from design pi %.3f", fraction, pi)
    return AugmentedFit(base, coef, theta_aug, var_aug, float(pi), tuple(names), fraction)


@dataclass(frozen=True, eq=False)
class E2Estimate:
    """Plug-in estimate of the variance reduction available from covariates.

    ``projection = cross' gram^-1 cross`` with ``cross = n^-1 sum m_i V_i``
    and ``gram = n^-1 sum V_i V_i'``, where ``m_i`` are the weighted
    martingale residual integrals under the null. ``value`` is
    ``projection / (pi(1-pi))^2``, the scale on which the augmented
    variance is ``sigma2 - pi(1-pi) * value``.
    """

    value: float
    cross_moments: np.ndarray
    gram: np.ndarray
    projection: float
    pi: float = 0.5
    rank_deficient: bool = False
    residuals: Optional[np.ndarray] = None


def null_residuals(d: SurvivalDataset, tau: float, extend: str = "error") -> np.ndarray:
    """Pooled (arm-ignoring) weighted martingale residual integrals."""
    return arm_martingale(d.time, d.event, tau, d.n, extend).residual


def e2_hat(
    d: SurvivalDataset,
    tau: float,
    covariates: Optional[Sequence[str]] = None,
    residuals: Optional[np.ndarray] = None,
    pi: float = 0.5,
) -> E2Estimate:
    """Estimate the variance reduction available from ``covariates``.

    Treatment labels are never read: the data are treated as one sample
    (reference data or pooled blinded data). ``pi`` is the design
    allocation probability of the planned trial.
    """
    _check_pi(pi)
    v, names = _covariates(d, covariates)
    if v.shape[1] == 0:
        raise ValueError("e2_hat needs at least one covariate")
    m = null_residuals(d, tau) if residuals is None else residuals
    n = d.n
    cross = v.T @ m / n
    gram = v.T @ v / n
    sol = _solve_gram(gram, cross, names)
    proj = max(float(cross @ sol), 0.0)
    return E2Estimate(proj / (pi * (1 - pi)) ** 2, cross, gram, proj, float(pi), False, m)


@dataclass(frozen=True)
class SelectionStep:
    step: int
    added: Optional[str]
    covariates: tuple
    e2: float
    power: Optional[float] = None


Candidate = Union[str, Sequence[str]]


def _label(cand: Candidate) -> str:
    return cand if isinstance(cand, str) else "+".join(cand)


def _columns(cand: Candidate) -> tuple:
    return (cand,) if isinstance(cand, str) else tuple(cand)


def stepwise_select(
    d: SurvivalDataset,
    tau: float,
    candidates: Sequence[Candidate],
    power_at=None,
    pi: float = 0.5,
) -> list[SelectionStep]:
    """Greedy forward selection maximising ``e2_hat`` at each step.

    Parameters
    ----------
    candidates : sequence
        Covariate names; an entry may also be a tuple of column names that
        enter together (e.g. the dummy columns of one factor).
    power_at : callable, optional
        Maps an ``e2`` value to a predicted power; used to fill the power
        column. Step 0 (no covariates) is evaluated with ``e2 = 0``.

    Returns
    -------
    list of SelectionStep
        Step 0 followed by one row per added candidate. Ties are broken by
        input order; a candidate whose addition makes the Gram matrix
        singular is skipped with a warning.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate covariates")
    m = null_residuals(d, tau)
    trace = [SelectionStep(0, None, (), 0.0, power_at(0.0) if power_at else None)]
    chosen: list[str] = []
    remaining = list(candidates)
    while remaining:
        best, best_val = None, -np.inf
        for cand in list(remaining):
            cols = tuple(chosen) + _columns(cand)
            try:
                val = e2_hat(d, tau, cols, residuals=m, pi=pi).value
            except SingularGram as exc:
                warnings.warn(f"skipping candidate {_label(cand)!r}: {exc}", stacklevel=2)
                remaining.remove(cand)
                continue
            if val > best_val:
                best, best_val = cand, val
        if best is None:
            break
        remaining.remove(best)
        chosen.extend(_columns(best))
        trace.append(SelectionStep(len(trace), _label(best), tuple(chosen), best_val,
                                   power_at(best_val) if power_at else None))
    return trace
