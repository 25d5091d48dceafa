"""Local-alternative power and sample size for RMST-based tests.

The unadjusted variance is approximated under the null by

    sigma2 = 1/(pi(1-pi)) * int_0^tau {int_t^tau S0(u)du}^2 / (S0(t-) G(t-)) dLambda0(t)

and the augmented test subtracts ``pi(1-pi) * e2``. Both only need the
control (or pooled) survival curve and a censoring curve common to the arms.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .augmentation import e2_hat
from .datamodel import SurvivalDataset
from .errors import (
    DivergentIntegrand,
    NegativeVariance,
    NonSurvivalInput,
    TargetUnreachable,
    TauBeyondSupport,
)
from .estimators import StepFunction, censoring_km, kaplan_meier, nelson_aalen

logger = logging.getLogger(__name__)

COMMON_CENSORING_NOTE = "assumes a censoring distribution common to both arms"


def _check_survival(s: StepFunction, label: str):
    v = s.values
    if s.initial != 1.0 or np.any(v < 0) or np.any(v > 1) or np.any(np.diff(np.concatenate(([1.0], v))) > 0):
        raise NonSurvivalInput(f"{label} is not a survival function (must start at 1, be non-increasing, in [0, 1])")


def sigma_tilde_sq(
    s0: StepFunction,
    g: StepFunction,
    tau: float,
    pi: float = 0.5,
    cumhaz: Optional[StepFunction] = None,
) -> float:
    """Null-approximated asymptotic variance of the unadjusted RMST difference.

    Parameters
    ----------
    s0 : StepFunction
        Control (or pooled) survival function.
    g : StepFunction
        Censoring survival function.
    cumhaz : StepFunction, optional
        Cumulative hazard supplying ``dLambda0``. Defaults to the increments
        ``1 - S0(t)/S0(t-)`` of ``s0``, which coincide with the Nelson-Aalen
        increments when ``s0`` is a Kaplan-Meier estimate.
    """
    if not 0 < pi < 1:
        raise ValueError("pi must be in (0, 1)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    _check_survival(s0, "S0")
    _check_survival(g, "G")
    if s0.support_end < tau and float(s0(s0.support_end)) > 0:
        raise DivergentIntegrand(f"S0 support ends at {s0.support_end:g} before tau={tau:g}")

    if cumhaz is None:
        knots = s0.jump_times[s0.jump_times < tau]
        before = s0.left_limit(knots)
        with np.errstate(divide="ignore", invalid="ignore"):
            dlam = 1.0 - s0(knots) / before
    else:
        knots = cumhaz.jump_times[cumhaz.jump_times < tau]
        dlam = cumhaz(knots) - cumhaz.left_limit(knots)
    keep = dlam > 0
    knots, dlam = knots[keep], dlam[keep]
    at_risk = s0.left_limit(knots) * g.left_limit(knots)
    if np.any(at_risk <= 0):
        bad = knots[at_risk <= 0][0]
        raise DivergentIntegrand(f"S0(t-)G(t-) vanishes at t={bad:g} < tau")
    tail = s0.area_to(tau) - s0.area_to(knots)
    return float(np.sum(tail * tail / at_risk * dlam) / (pi * (1 - pi)))


def sigma_tilde_sq_parametric(
    survival: Callable[[float], float],
    hazard: Callable[[float], float],
    censoring: Callable[[float], float],
    tau: float,
    pi: float = 0.5,
) -> float:
    """Same variance for continuous model curves, by adaptive quadrature."""
    def tail(t):
        return integrate.quad(survival, t, tau, limit=200, epsabs=0, epsrel=1e-12)[0]

    def integrand(t):
        a = tail(t)
        return a * a * hazard(t) / (survival(t) * censoring(t))

    val = integrate.quad(integrand, 0.0, tau, limit=200, epsabs=0, epsrel=1e-11)[0]
    return val / (pi * (1 - pi))


def sigma_tilde_sq_exponential(rate_s: float, rate_g: float, tau: float, pi: float = 0.5) -> float:
    """Variance for exponential survival and exponential censoring."""
    return sigma_tilde_sq_parametric(
        lambda t: math.exp(-rate_s * t),
        lambda t: rate_s,
        lambda t: math.exp(-rate_g * t),
        tau, pi,
    )


def power_from_variance(theta_alt: float, sigma2: float, n: float, alpha: float = 0.05,
                        pi: float = 0.5, e2: float = 0.0) -> float:
    """Two-sided local power for ``theta_alt`` with ``n`` subjects."""
    var = sigma2 - pi * (1 - pi) * e2
    if var <= 0:
        raise NegativeVariance(
            f"pi(1-pi)*e2 = {pi * (1 - pi) * e2:.6g} is not below sigma2 = {sigma2:.6g}"
        )
    shift = theta_alt / math.sqrt(var / n)
    lo = norm.ppf(alpha / 2)
    hi = norm.isf(alpha / 2)
    return float(norm.cdf(lo - shift) + norm.sf(hi - shift))


@dataclass(frozen=True, eq=False)
class DesignInputs:
    """Everything the power formula needs.

    ``sigma2`` (the unadjusted variance) is computed from ``s0``/``g`` at
    construction, which also validates that ``S0*G`` stays positive before
    ``tau``. Pass ``sigma2`` explicitly to use a parametric model instead.
    """

    tau: float
    theta_alt: float
    s0: Optional[StepFunction] = None
    g: Optional[StepFunction] = None
    alpha: float = 0.05
    target_power: float = 0.8
    pi: float = 0.5
    e2: float = 0.0
    cumhaz: Optional[StepFunction] = None
    sigma2: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if not 0 < self.target_power < 1:
            raise ValueError("target power must be in (0, 1)")
        if not 0 < self.pi < 1:
            raise ValueError("pi must be in (0, 1)")
        if self.e2 < 0:
            raise ValueError("e2 must be non-negative")
        if self.sigma2 is None:
            if self.s0 is None or self.g is None:
                raise ValueError("need s0 and g, or an explicit sigma2")
            object.__setattr__(self, "sigma2", sigma_tilde_sq(self.s0, self.g, self.tau, self.pi, self.cumhaz))
        if self.pi * (1 - self.pi) * self.e2 >= self.sigma2:
            raise NegativeVariance("augmented variance would be non-positive")

    @property
    def aug_variance(self) -> float:
        """``sigma2 - pi(1-pi) e2``; the variance of ``sqrt(n) * estimate``."""
        return self.sigma2 - self.pi * (1 - self.pi) * self.e2

    def with_e2(self, e2: float) -> "DesignInputs":
        return DesignInputs(self.tau, self.theta_alt, self.s0, self.g, self.alpha,
                            self.target_power, self.pi, e2, self.cumhaz, self.sigma2)


def predicted_power(inputs: DesignInputs, n: int) -> float:
    if n < 2:
        raise ValueError("n must be at least 2")
    return power_from_variance(inputs.theta_alt, inputs.sigma2, n, inputs.alpha, inputs.pi, inputs.e2)


@dataclass(frozen=True)
class PowerCurve:
    rows: tuple  # ((n, power), ...) with n ascending
    recommended_n: Optional[int]
    target_power: float

    @property
    def reached(self) -> bool:
        return self.recommended_n is not None

    def power_at(self, n: int) -> float:
        return dict(self.rows)[n]


def required_n(
    inputs: DesignInputs,
    n_start: int = 10,
    n_step: int = 10,
    n_max: int = 2000,
    strict: bool = False,
) -> PowerCurve:
    """Evaluate the power on ``n_start, n_start + n_step, ... <= n_max``.

    The whole grid is always evaluated so the curve can be reported. With
    ``strict=True`` a curve that never reaches the target raises
    :class:`TargetUnreachable` (the curve is attached to the exception).
    """
    if n_step < 1:
        raise ValueError("n_step must be >= 1")
    if n_start < 2:
        raise ValueError("n_start must be >= 2")
    if n_max < n_start:
        raise ValueError("n_max must be >= n_start")
    grid = np.arange(n_start, n_max + 1, n_step)
    var = inputs.aug_variance
    shift = inputs.theta_alt / np.sqrt(var / grid)
    lo, hi = norm.ppf(inputs.alpha / 2), norm.isf(inputs.alpha / 2)
    power = norm.cdf(lo - shift) + norm.sf(hi - shift)
    hit = np.flatnonzero(power >= inputs.target_power)
    rec = int(grid[hit[0]]) if hit.size else None
    curve = PowerCurve(tuple((int(k), float(p)) for k, p in zip(grid, power)), rec, inputs.target_power)
    if rec is None and strict:
        raise TargetUnreachable(
            f"target power {inputs.target_power} not reached by n={int(grid[-1])}", curve
        )
    return curve


@dataclass(frozen=True)
class DesignReport:
    curve: PowerCurve
    s0_tau: float
    g_tau: float
    e2: float
    sigma2: float
    n_subjects: int
    n_events: int
    covariates: tuple = ()
    v_at_recommended: Optional[float] = None
    notes: tuple = field(default=(COMMON_CENSORING_NOTE,))


def curves_from_data(d: SurvivalDataset, tau: float):
    """KM survival, reversed-KM censoring and Nelson-Aalen hazard of one sample."""
    s0 = kaplan_meier(d.time, d.event)
    if s0.support_end < tau and float(s0(s0.support_end)) > 0:
        raise TauBeyondSupport(
            f"last observed time {s0.support_end:g} < tau={tau:g} with survival "
            f"{float(s0(s0.support_end)):.4g}"
        )
    return s0, censoring_km(d.time, d.event), nelson_aalen(d.time, d.event)


def design_inputs_from_data(d, tau, theta_alt, alpha=0.05, target_power=0.8, pi=0.5,
                            covariates: Optional[Sequence[str]] = None) -> DesignInputs:
    s0, g, lam = curves_from_data(d, tau)
    e2 = e2_hat(d, tau, covariates, pi=pi).value if covariates else 0.0
    return DesignInputs(tau=tau, theta_alt=theta_alt, s0=s0, g=g, alpha=alpha,
                        target_power=target_power, pi=pi, e2=e2, cumhaz=lam)


def _report(d, inputs: DesignInputs, curve: PowerCurve, covariates) -> DesignReport:
    v = None
    if curve.recommended_n is not None:
        v = math.sqrt(inputs.aug_variance / curve.recommended_n)
    return DesignReport(
        curve=curve,
        s0_tau=float(inputs.s0(inputs.tau)),
        g_tau=float(inputs.g(inputs.tau)),
        e2=inputs.e2,
        sigma2=inputs.sigma2,
        n_subjects=d.n,
        n_events=d.n_events,
        covariates=tuple(covariates or ()),
        v_at_recommended=v,
    )


def design_stage(
    reference: SurvivalDataset,
    tau: float,
    theta_alt: float,
    alpha: float = 0.05,
    target_power: float = 0.8,
    pi: float = 0.5,
    covariates: Optional[Sequence[str]] = None,
    n_start: int = 10,
    n_step: int = 10,
    n_max: int = 2000,
    strict: bool = False,
) -> DesignReport:
    """Size a study from reference (control-like) data.

    Any arm column on ``reference`` is ignored; the data are treated as a
    single sample standing in for the control group.
    """
    if theta_alt == 0:
        raise ValueError("theta_alt must be non-zero for sizing")
    inputs = design_inputs_from_data(reference, tau, theta_alt, alpha, target_power, pi, covariates)
    curve = required_n(inputs, n_start, n_step, n_max, strict=strict)
    return _report(reference, inputs, curve, covariates)


def midtrial_recalc(
    blinded: SurvivalDataset,
    tau: float,
    theta_alt: float,
    alpha: float = 0.05,
    target_power: float = 0.8,
    pi: float = 0.5,
    covariates: Optional[Sequence[str]] = None,
    n_start: Optional[int] = None,
    n_step: int = 10,
    n_max: int = 2000,
    strict: bool = False,
) -> DesignReport:
    """Recalculate the sample size from pooled, blinded interim data.

    The grid starts at ``max(n_mid, 10)`` by default, where ``n_mid`` is the
    number of subjects in ``blinded``. Treatment labels are never read.
    """
    if blinded.has_arm:
        warnings.warn("blinded dataset carries an arm column; it is ignored", stacklevel=2)
        blinded = blinded.blind()
    if n_start is None:
        n_start = max(blinded.n, 10)
    return design_stage(blinded, tau, theta_alt, alpha, target_power, pi, covariates,
                        n_start, n_step, n_max, strict)
