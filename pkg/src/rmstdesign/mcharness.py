"""Monte Carlo operating characteristics for the benchmark scenarios.

``table1_run`` estimates empirical size/power of both tests at a fixed
``n`` together with the average predicted power from reference data.
``table2_run`` runs the blinded adaptive design end to end: recalculate the
sample size from the first ``n_mid`` subjects, enroll up to it, test.

Replications are independent (keyed generator streams), so they can be
farmed out to worker processes; results are aggregated in replication
order with exact summation, making summaries identical for any worker
count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .augmentation import augmented_fit
from .design import design_inputs_from_data, power_from_variance, required_n
from .errors import RmstError
from .simulation import (
    COVARIATES,
    TAU,
    ReferenceKind,
    Scenario,
    generate_reference,
    generate_subjects,
    true_rmst_diff,
)

WORKERS_ENV = "RMST_DESIGN_WORKERS"
NULL_TARGET = true_rmst_diff("sData2a")
METHODS = ("unadjusted", "augmented")


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def design_target(scenario) -> float:
    """RMST difference used for sizing: the true one, or sData2's under the null."""
    scenario = Scenario(scenario)
    return NULL_TARGET if scenario.is_null else true_rmst_diff(scenario)


def _mean(x) -> float:
    x = list(x)
    return math.fsum(x) / len(x) if x else float("nan")


def _var(x) -> float:
    x = list(x)
    if len(x) < 2:
        return float("nan")
    m = _mean(x)
    return math.fsum((v - m) ** 2 for v in x) / (len(x) - 1)


def _rate_se(p, k):
    return math.sqrt(p * (1 - p) / k) if k else float("nan")


def _map(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


# ---------------------------------------------------------------- table 1

def _table1_rep(task):
    scenario, n, seed, rep, alpha = task
    d = generate_subjects(scenario, n, seed, rep)
    fit = augmented_fit(d, TAU, 0.5, COVARIATES)
    crit = norm.isf(alpha / 2)
    se_u = fit.base.std_error()
    se_a = fit.std_error
    return (fit.base.theta_diff, fit.theta_aug, fit.base.var_influence, fit.var_aug,
            fit.base.var_plugin, abs(fit.base.theta_diff) > crit * se_u, abs(fit.theta_aug) > crit * se_a)


def _predicted_rep(task):
    scenario, kind, ref_n, seed, rep, n, theta, alpha = task
    try:
        ref = generate_reference(scenario, kind, ref_n, seed, rep)
        inputs = design_inputs_from_data(ref, TAU, theta, alpha, covariates=COVARIATES)
    except RmstError:
        return (math.nan, math.nan)
    return (power_from_variance(theta, inputs.sigma2, n, alpha),
            power_from_variance(theta, inputs.sigma2, n, alpha, inputs.pi, inputs.e2))


@dataclass(frozen=True)
class Table1Row:
    scenario: str
    n: int
    reps: int
    true_diff: float
    power_unadjusted: float
    power_augmented: float
    se_unadjusted: float
    se_augmented: float
    mean_theta: float
    mean_theta_aug: float
    emp_var_theta: float
    emp_var_theta_aug: float
    mean_var_influence: float
    mean_var_plugin: float
    mean_var_aug: float
    reference_reps: int = 0
    cpp_unadjusted: Optional[float] = None
    cpp_augmented: Optional[float] = None
    mpp_unadjusted: Optional[float] = None
    mpp_augmented: Optional[float] = None

    def as_dict(self):
        return asdict(self)


def table1_run(
    scenario,
    n: int = 500,
    reps: int = 10_000,
    reference_reps: Optional[int] = None,
    seed: int = 0,
    alpha: float = 0.05,
    reference_n: int = 200,
    workers: Optional[int] = None,
) -> Table1Row:
    """Empirical power of both tests, plus mean predicted power.

    Predicted powers (cPP/mPP) are only computed for non-null scenarios and
    use the true RMST difference as the design effect.
    """
    scenario = Scenario(scenario)
    if reps < 100:
        raise ValueError("reps must be at least 100")
    workers = default_workers() if workers is None else workers
    reference_reps = reps if reference_reps is None else reference_reps
    out = _map(_table1_rep, [(scenario, n, seed, r, alpha) for r in range(reps)], workers)
    th, tha, vi, va, vp, ru, ra = (list(c) for c in zip(*out))
    pu, pa = _mean(ru), _mean(ra)
    row = dict(
        scenario=scenario.value, n=n, reps=reps, true_diff=true_rmst_diff(scenario),
        power_unadjusted=pu, power_augmented=pa,
        se_unadjusted=_rate_se(pu, reps), se_augmented=_rate_se(pa, reps),
        mean_theta=_mean(th), mean_theta_aug=_mean(tha),
        emp_var_theta=_var(th), emp_var_theta_aug=_var(tha),
        mean_var_influence=_mean(vi), mean_var_plugin=_mean(vp), mean_var_aug=_mean(va),
    )
    if not scenario.is_null and reference_reps:
        theta = true_rmst_diff(scenario)
        row["reference_reps"] = reference_reps
        for kind, prefix in ((ReferenceKind.correctly_matched, "cpp"), (ReferenceKind.mis_matched, "mpp")):
            tasks = [(scenario, kind, reference_n, seed, r, n, theta, alpha) for r in range(reference_reps)]
            pp = _map(_predicted_rep, tasks, workers)
            row[f"{prefix}_unadjusted"] = float(np.nanmean([p[0] for p in pp]))
            row[f"{prefix}_augmented"] = float(np.nanmean([p[1] for p in pp]))
    return Table1Row(**row)


# ---------------------------------------------------------------- table 2

def _table2_rep(task):
    scenario, n_mid, target, method, seed, rep, n_step, n_max, alpha, theta = task
    covs = COVARIATES if method == "augmented" else None
    interim = generate_subjects(scenario, n_mid, seed, rep).blind()
    try:
        inputs = design_inputs_from_data(interim, TAU, theta, alpha, target, covariates=covs)
    except RmstError:
        return (None, False, False)
    curve = required_n(inputs, n_mid, n_step, n_max)
    if curve.recommended_n is None:
        return (n_max, False, True)
    final = generate_subjects(scenario, curve.recommended_n, seed, rep)
    try:
        fit = augmented_fit(final, TAU, 0.5, covs or ())
    except RmstError:
        return (None, False, False)
    crit = norm.isf(alpha / 2)
    return (curve.recommended_n, bool(abs(fit.theta_aug) > crit * fit.std_error), False)


@dataclass(frozen=True)
class Table2Row:
    scenario: str
    method: str
    n_mid: int
    reps: int
    true_diff: float
    target_diff: float
    power: float
    se: float
    n_min: float
    n_q1: float
    n_median: float
    n_q3: float
    n_max: float
    unreachable: int = 0
    failed: int = 0
    selected_n: tuple = field(default=(), repr=False)

    def as_dict(self):
        d = asdict(self)
        d.pop("selected_n")
        return d


def table2_run(
    scenario,
    n_mid: int = 200,
    target_power: float = 0.8,
    reps: int = 10_000,
    method: str = "unadjusted",
    seed: int = 0,
    n_step: int = 10,
    n_max: int = 2000,
    alpha: float = 0.05,
    workers: Optional[int] = None,
) -> Table2Row:
    """Blinded adaptive design: power and distribution of the selected n.

    Enrollment order is generation order. Replications whose curve never
    reaches the target by ``n_max`` are counted in ``unreachable``, those
    whose interim or final fit raised in ``failed``; both are left out of
    the power estimate and the quantiles.
    """
    scenario = Scenario(scenario)
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if n_mid >= n_max:
        raise ValueError("n_mid must be below n_max")
    workers = default_workers() if workers is None else workers
    theta = design_target(scenario)
    tasks = [(scenario, n_mid, target_power, method, seed, r, n_step, n_max, alpha, theta)
             for r in range(reps)]
    out = _map(_table2_rep, tasks, workers)
    failed = sum(1 for o in out if o[0] is None)
    unreachable = sum(1 for o in out if o[2])
    ok = [o for o in out if o[0] is not None and not o[2]]
    power = _mean(o[1] for o in ok)
    sizes = np.array([o[0] for o in ok], dtype=float)
    q = np.quantile(sizes, [0, 0.25, 0.5, 0.75, 1]) if sizes.size else [math.nan] * 5
    return Table2Row(
        scenario=scenario.value, method=method, n_mid=n_mid, reps=reps,
        true_diff=true_rmst_diff(scenario), target_diff=theta,
        power=power, se=_rate_se(power, len(ok)),
        n_min=float(q[0]), n_q1=float(q[1]), n_median=float(q[2]), n_q3=float(q[3]), n_max=float(q[4]),
        unreachable=unreachable, failed=failed, selected_n=tuple(int(s) for s in sizes),
    )
