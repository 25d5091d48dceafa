"""Nonparametric survival estimators and the RMST difference.

All integrals are exact sums over the knots of right-continuous step
functions. Ties between an event and a censoring at the same time are
resolved events-first: a subject censored at ``t`` is still at risk for the
events at ``t``. The reversed Kaplan-Meier uses the mirror convention, so a
subject failing at ``t`` is still in the censoring risk set at ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import SurvivalDataset
from .errors import EmptyArm, EmptyInput, TauBeyondSupport

TAU_EXTEND_POLICIES = ("error", "last")


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous piecewise-constant function on ``[0, inf)``.

    Takes ``initial`` on ``[0, jump_times[0])`` and ``values[k]`` on
    ``[jump_times[k], jump_times[k+1])``. ``support_end`` is the largest
    time at which the function was actually observed (for estimates, the
    largest observed event or censoring time); evaluation past it is
    defined but may not be meaningful.
    """

    jump_times: np.ndarray
    values: np.ndarray
    initial: float = 1.0
    support_end: float = np.inf

    def __post_init__(self):
        t = np.asarray(self.jump_times, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if t.size != v.size:
            raise ValueError("jump_times and values must have equal length")
        if t.size and (np.any(t <= 0) or np.any(np.diff(t) <= 0)):
            raise ValueError("jump_times must be positive and strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "jump_times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "initial", float(self.initial))
        object.__setattr__(self, "support_end", float(self.support_end))
        # knots for the running area: breakpoints b_j with level h_j on [b_j, b_{j+1})
        b = np.concatenate(([0.0], t))
        h = np.concatenate(([self.initial], v))
        area = np.concatenate(([0.0], np.cumsum(h[:-1] * np.diff(b))))
        object.__setattr__(self, "_b", b)
        object.__setattr__(self, "_h", h)
        object.__setattr__(self, "_area", area)

    def __call__(self, t):
        j = np.searchsorted(self._b, np.asarray(t, dtype=float), side="right") - 1
        return self._h[np.maximum(j, 0)]

    def left_limit(self, t):
        """Value just before ``t`` (``initial`` at ``t = 0``)."""
        j = np.searchsorted(self._b, np.asarray(t, dtype=float), side="left") - 1
        return self._h[np.maximum(j, 0)]

    def area_to(self, t):
        """Exact integral of the function over ``[0, t]``."""
        t = np.asarray(t, dtype=float)
        j = np.maximum(np.searchsorted(self._b, t, side="right") - 1, 0)
        return self._area[j] + self._h[j] * (t - self._b[j])

    def scaled_time(self, k: float) -> "StepFunction":
        return StepFunction(self.jump_times * k, self.values, self.initial, self.support_end * k)


def risk_table(times, events):
    """Distinct times with event counts, censoring counts and risk-set sizes.

    Returns
    -------
    t, d, c, y : ndarray
        Sorted distinct observed times, number of events and of censorings
        at each, and the number at risk ``#{X >= t}``.
    """
    times = np.asarray(times, dtype=float).ravel()
    events = np.asarray(events).ravel()
    if times.size == 0:
        raise EmptyInput("no observations")
    if events.size != times.size:
        raise ValueError("times and events lengths differ")
    t, inverse = np.unique(times, return_inverse=True)
    d = np.bincount(inverse, weights=(events == 1), minlength=t.size)
    total = np.bincount(inverse, minlength=t.size).astype(float)
    y = np.cumsum(total[::-1])[::-1]
    return t, d, total - d, y


def _product_limit(t, d, y, support_end):
    keep = d > 0
    t, d, y = t[keep], d[keep], y[keep]
    return StepFunction(t, np.cumprod(1.0 - d / y), 1.0, support_end)


def kaplan_meier(times, events) -> StepFunction:
    """Kaplan-Meier estimate of the survival function."""
    t, d, _, y = risk_table(times, events)
    return _product_limit(t, d, y, t[-1])


def nelson_aalen(times, events) -> StepFunction:
    """Nelson-Aalen estimate of the cumulative hazard."""
    t, d, _, y = risk_table(times, events)
    keep = d > 0
    return StepFunction(t[keep], np.cumsum(d[keep] / y[keep]), 0.0, t[-1])


def censoring_km(times, events) -> StepFunction:
    """Reversed Kaplan-Meier estimate of the censoring survival function ``G``.

    Censorings are the "events"; a failure at ``t`` stays in the censoring
    risk set at ``t``.
    """
    t, _, c, y = risk_table(times, events)
    return _product_limit(t, c, y, t[-1])


def _check_support(s: StepFunction, tau: float, extend: str):
    if extend not in TAU_EXTEND_POLICIES:
        raise ValueError(f"tau extension policy must be one of {TAU_EXTEND_POLICIES}")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if extend == "error" and s.support_end < tau and float(s(s.support_end)) > 0:
        raise TauBeyondSupport(
            f"last observed time {s.support_end:g} < tau={tau:g} while the survival "
            f"estimate is still {float(s(s.support_end)):.4g}"
        )


def rmst_integral(s: StepFunction, tau: float, extend: str = "error") -> float:
    """Area under ``s`` on ``[0, tau]``."""
    _check_support(s, tau, extend)
    return float(s.area_to(tau))


def rmst_tail_integral(s: StepFunction, t, tau: float, extend: str = "error"):
    """Exact ``int_t^tau s(u) du`` for ``0 <= t <= tau`` (vectorised in ``t``)."""
    _check_support(s, tau, extend)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > tau):
        raise ValueError("need 0 <= t <= tau")
    out = s.area_to(tau) - s.area_to(t)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ArmMartingale:
    """Per-arm pieces of the RMST linearisation.

    ``residual[i]`` is ``int_0^tau w(t) dM_i(t)`` with weight
    ``w(t) = int_t^tau S(u)du / Ybar(t)``, where ``Ybar`` is the at-risk
    count divided by ``n_total``. ``var_term`` is ``int_0^tau w(t)^2 Ybar(t)
    dLambda(t)``, this arm's contribution to the plug-in variance.
    """

    theta: float
    km: StepFunction
    residual: np.ndarray
    var_term: float


def arm_martingale(times, events, tau: float, n_total: int, extend: str = "error") -> ArmMartingale:
    times = np.asarray(times, dtype=float)
    events = np.asarray(events)
    t, d, _, y = risk_table(times, events)
    km = _product_limit(t, d, y, t[-1])
    _check_support(km, tau, extend)
    theta = float(km.area_to(tau))

    keep = (d > 0) & (t <= tau)
    tk, dk, yk = t[keep], d[keep], y[keep]
    tail = theta - km.area_to(tk)
    ybar = yk / n_total
    weight = tail / ybar
    dlam = dk / yk
    var_term = float(np.sum(tail * tail / ybar * dlam))

    # compensator: sum of weight*dLambda over event times <= min(X_i, tau)
    cum = np.concatenate(([0.0], np.cumsum(weight * dlam)))
    residual = -cum[np.searchsorted(tk, times, side="right")]
    observed = (events == 1) & (times <= tau)
    if np.any(observed):
        residual[observed] += weight[np.searchsorted(tk, times[observed])]
    return ArmMartingale(theta, km, residual, var_term)


@dataclass(frozen=True, eq=False)
class RmstFit:
    """RMST per arm, their difference and both variance estimates.

    Variances are those of ``sqrt(n) * (theta_diff - theta)``; the standard
    error of ``theta_diff`` is ``sqrt(var / n)``.
    """

    tau: float
    theta_by_arm: tuple  # (control, treatment)
    theta_diff: float
    var_plugin: float
    var_influence: float
    influence: np.ndarray
    n: int
    km_by_arm: tuple = ()

    def std_error(self, variance: str = "influence") -> float:
        v = self.var_influence if variance == "influence" else self.var_plugin
        return float(np.sqrt(v / self.n))


def rmst_fit(d: SurvivalDataset, tau: float, extend: str = "error") -> RmstFit:
    """Unadjusted RMST difference (treatment minus control) up to ``tau``."""
    arm = d.require_arm()
    n = d.n
    influence = np.zeros(n)
    thetas, var1, kms = [], 0.0, []
    for z, sign in ((0, 1.0), (1, -1.0)):
        idx = np.flatnonzero(arm == z)
        if idx.size == 0:
            raise EmptyArm(f"arm {z} has no subjects")
        try:
            part = arm_martingale(d.time[idx], d.event[idx], tau, n, extend)
        except TauBeyondSupport as exc:
            raise TauBeyondSupport(f"arm {z}: {exc}") from None
        influence[idx] = sign * part.residual
        thetas.append(part.theta)
        kms.append(part.km)
        var1 += part.var_term
    influence.setflags(write=False)
    return RmstFit(
        tau=float(tau),
        theta_by_arm=(thetas[0], thetas[1]),
        theta_diff=thetas[1] - thetas[0],
        var_plugin=var1,
        var_influence=float(np.dot(influence, influence) / n),
        influence=influence,
        n=n,
        km_by_arm=tuple(kms),
    )
