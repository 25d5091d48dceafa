"""Seeded generators for the six benchmark scenarios.

Covariates ``V1 = b1 + e1`` and ``V2 = b2 + e2`` (all standard normal).
Failure times are exponential (piecewise exponential for the sData3
treatment arm) with the uniform variate ``U`` either tied to the covariates
(``U = Phi(b1 + b2 + eps)`` with variance-3 normal CDF, variants "a") or
independent of them (``U = Phi(eps)``, variants "b"). Censoring is
Uniform(0, 8), allocation is 1:1.

Subjects are generated in fixed-size chunks, each with its own generator
keyed by ``(seed, stream, replication, chunk)``. The first ``n`` subjects
of a stream therefore do not depend on how many are requested, and
replications are independent of execution order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import log_ndtr

from .datamodel import SurvivalDataset

LAMBDA0 = -math.log(0.2) / 5          # 5-year survival 0.2
LAMBDA1 = 0.7 * LAMBDA0               # hazard ratio 0.7
LAMBDA2 = -math.log(0.5) / 5          # late hazard for the non-PH arm
CHANGE_POINT = 1.0
CENSOR_MAX = 8.0
TAU = 5.0
CHUNK = 256
COVARIATES = ("V1", "V2")

_STREAM_TARGET = 0
_STREAM_REFERENCE = 1


class Scenario(str, enum.Enum):
    sData1a = "sData1a"
    sData1b = "sData1b"
    sData2a = "sData2a"
    sData2b = "sData2b"
    sData3a = "sData3a"
    sData3b = "sData3b"

    @property
    def model(self) -> int:
        return int(self.value[5])

    @property
    def dependent(self) -> bool:
        return self.value.endswith("a")

    @property
    def is_null(self) -> bool:
        return self.model == 1


class ReferenceKind(str, enum.Enum):
    none = "none"
    correctly_matched = "correctly_matched"
    mis_matched = "mis_matched"


def _rmst_exp(rate, tau=TAU):
    return (1 - math.exp(-rate * tau)) / rate


def true_rmst_diff(scenario, tau: float = TAU) -> float:
    """Closed-form treatment-minus-control RMST difference."""
    scenario = Scenario(scenario)
    control = _rmst_exp(LAMBDA0, tau)
    if scenario.model == 1:
        return 0.0
    if scenario.model == 2:
        return _rmst_exp(LAMBDA1, tau) - control
    # piecewise exponential: hazard LAMBDA0 before the change point, LAMBDA2 after
    c = min(CHANGE_POINT, tau)
    early = (1 - math.exp(-LAMBDA0 * c)) / LAMBDA0
    late = math.exp(-LAMBDA0 * c) * (1 - math.exp(-LAMBDA2 * (tau - c))) / LAMBDA2 if tau > c else 0.0
    return early + late - control


def treatment_survival(scenario, t):
    """Analytic survival of the treatment arm (control is ``exp(-LAMBDA0 t)``)."""
    scenario = Scenario(scenario)
    t = np.asarray(t, dtype=float)
    if scenario.model == 1:
        return np.exp(-LAMBDA0 * t)
    if scenario.model == 2:
        return np.exp(-LAMBDA1 * t)
    return np.where(t < CHANGE_POINT, np.exp(-LAMBDA0 * t),
                    np.exp(-LAMBDA0 * CHANGE_POINT - LAMBDA2 * (t - CHANGE_POINT)))


def _chunk(seed, stream, replication, index, scenario: Scenario, control_only: bool):
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, stream, int(replication), int(index)])
    rng = np.random.Generator(np.random.Philox(ss))
    normals = rng.standard_normal((CHUNK, 5))
    unif = rng.random((CHUNK, 2))
    b1, b2, e1, e2, eps = normals.T
    if scenario.dependent:
        log_u = log_ndtr((b1 + b2 + eps) / math.sqrt(3.0))
    else:
        log_u = log_ndtr(eps)
    cumhaz = np.maximum(-log_u, np.finfo(float).tiny)
    z = np.zeros(CHUNK) if control_only else (unif[:, 0] < 0.5).astype(float)
    t = _invert(scenario, cumhaz, z)
    c = CENSOR_MAX * (1.0 - unif[:, 1])          # in (0, 8]
    x = np.minimum(t, c)
    delta = (t <= c).astype(float)
    return x, delta, z, np.column_stack((b1 + e1, b2 + e2))


def _invert(scenario: Scenario, cumhaz, z):
    """Failure time with cumulative hazard ``cumhaz`` for each arm's law."""
    t0 = cumhaz / LAMBDA0
    if scenario.model == 1:
        t1 = t0
    elif scenario.model == 2:
        t1 = cumhaz / LAMBDA1
    else:
        h_change = LAMBDA0 * CHANGE_POINT
        t1 = np.where(cumhaz < h_change, t0, CHANGE_POINT + (cumhaz - h_change) / LAMBDA2)
    return np.where(z == 1, t1, t0)


def generate_subjects(scenario, n: int, seed: int = 0, replication: int = 0) -> SurvivalDataset:
    """First ``n`` subjects (in enrollment order) of a target-study replication."""
    scenario = Scenario(scenario)
    parts = [_chunk(seed, _STREAM_TARGET, replication, k, scenario, False)
             for k in range(-(-n // CHUNK))]
    x, delta, z, v = (np.concatenate(p)[:n] for p in zip(*parts))
    return SurvivalDataset(x, delta, z, v, COVARIATES)


def generate_reference(scenario, kind, n: int = 200, seed: int = 0, replication: int = 0) -> SurvivalDataset:
    """Control-arm reference data; ``mis_matched`` keeps only V1 < 1 and V2 < 1."""
    scenario = Scenario(scenario)
    kind = ReferenceKind(kind)
    if kind is ReferenceKind.none:
        raise ValueError("no reference data requested")
    xs, ds, vs, have, k = [], [], [], 0, 0
    while have < n:
        x, delta, _, v = _chunk(seed, _STREAM_REFERENCE, replication, k, scenario, True)
        if kind is ReferenceKind.mis_matched:
            keep = (v[:, 0] < 1) & (v[:, 1] < 1)
            x, delta, v = x[keep], delta[keep], v[keep]
        xs.append(x)
        ds.append(delta)
        vs.append(v)
        have += x.size
        k += 1
    return SurvivalDataset(np.concatenate(xs)[:n], np.concatenate(ds)[:n], None,
                           np.concatenate(vs)[:n], COVARIATES)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: Scenario
    n: int = 500
    reference_kind: ReferenceKind = ReferenceKind.none
    reference_n: int = 200
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "reference_kind", ReferenceKind(self.reference_kind))
        if self.n < 1 or self.reference_n < 1:
            raise ValueError("dataset sizes must be positive")


def generate(spec: ScenarioSpec, replication: int) -> tuple[SurvivalDataset, Optional[SurvivalDataset]]:
    target = generate_subjects(spec.scenario, spec.n, spec.seed, replication)
    ref = None
    if spec.reference_kind is not ReferenceKind.none:
        ref = generate_reference(spec.scenario, spec.reference_kind, spec.reference_n, spec.seed, replication)
    return target, ref
