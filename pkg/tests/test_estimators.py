import math

import numpy as np
import pytest

from rmstdesign.datamodel import SurvivalDataset
from rmstdesign.errors import EmptyArm, TauBeyondSupport
from rmstdesign.estimators import (
    StepFunction,
    censoring_km,
    kaplan_meier,
    nelson_aalen,
    rmst_fit,
    rmst_integral,
    rmst_tail_integral,
)

from conftest import exp_dataset

T3, E3 = [1.0, 2.0, 3.0], [1, 0, 1]
LAMBDA0 = -math.log(0.2) / 5


def test_km_hand_values():
    s = kaplan_meier(T3, E3)
    assert s(0.5) == 1 and s(1) == pytest.approx(2 / 3) and s(2.5) == pytest.approx(2 / 3)
    assert s(3) == 0 and s(10) == 0


def test_km_degenerate():
    assert np.all(kaplan_meier([1, 2], [0, 0])([0.5, 1.5, 5]) == 1)
    s = kaplan_meier([1.0], [1])
    assert s(0.99) == 1 and s(1) == 0


def test_nelson_aalen_hand_values():
    h = nelson_aalen(T3, E3)
    assert h(1) == pytest.approx(1 / 3) and h(3) == pytest.approx(4 / 3)
    assert np.all(nelson_aalen([1, 2], [0, 0])([1, 5]) == 0)
    assert nelson_aalen([1, 1], [1, 1])(1) == pytest.approx(1.0)


def test_censoring_km_hand_values():
    g = censoring_km(T3, E3)
    assert g(1.5) == 1 and g(2) == pytest.approx(0.5) and g(9) == pytest.approx(0.5)
    assert np.all(censoring_km([1, 2], [1, 1])([1, 5]) == 1)
    t = [1.0, 2.5, 4.0]
    assert np.allclose(censoring_km(t, [0, 0, 0])(t), kaplan_meier(t, [1, 1, 1])(t))


def test_censoring_km_tie_convention():
    # a failure tied with a censoring stays in the censoring risk set
    g = censoring_km([1, 1, 2], [1, 0, 1])
    assert g(1) == pytest.approx(2 / 3)


def test_rmst_hand_values():
    s = kaplan_meier(T3, E3)
    assert rmst_integral(s, 4) == pytest.approx(7 / 3)
    assert rmst_tail_integral(s, 1, 4) == pytest.approx(4 / 3)
    assert rmst_tail_integral(s, 4, 4) == 0
    assert rmst_integral(s, 0.5) == pytest.approx(0.5)
    one = StepFunction([], [])
    assert rmst_tail_integral(one, 1, 3) == pytest.approx(2)


def test_tau_beyond_support():
    s = kaplan_meier([1, 2, 3], [1, 1, 0])
    with pytest.raises(TauBeyondSupport):
        rmst_integral(s, 4)
    assert rmst_integral(s, 4, extend="last") == pytest.approx(1 + 2 / 3 + 1 / 3 + 1 / 3)


def test_exponential_rmst(rng):
    x = rng.exponential(1 / LAMBDA0, 100_000)
    s = kaplan_meier(x, np.ones_like(x))
    assert abs(rmst_integral(s, 5) - 0.8 / LAMBDA0) < 0.02


def test_identical_arms_zero_difference():
    t = np.array([1.0, 2, 3, 4, 5])
    e = np.array([1, 0, 1, 1, 0])
    d = SurvivalDataset(np.r_[t, t], np.r_[e, e], np.r_[np.zeros(5), np.ones(5)])
    assert rmst_fit(d, 4).theta_diff == 0.0


def test_empty_arm():
    with pytest.raises(EmptyArm):
        rmst_fit(SurvivalDataset([1, 2], [1, 1], [0, 0]), 1.5)


def test_plugin_vs_influence(rng):
    d = exp_dataset(rng, 2000, LAMBDA0, 0.7 * LAMBDA0, censor_max=8)
    fit = rmst_fit(d, 5)
    assert abs(fit.var_plugin - fit.var_influence) / fit.var_plugin <= 0.05
    assert abs(np.mean(fit.influence)) < 1e-10


def test_influence_matches_finite_difference(rng):
    # leave-one-out jackknife agrees with the influence values to O(1/n)
    d = exp_dataset(rng, 400, LAMBDA0, censor_max=8)
    fit = rmst_fit(d, 5)
    jack = np.array([rmst_fit(d.subset(np.delete(np.arange(d.n), i)), 5).theta_diff for i in range(40)])
    approx = (d.n - 1) * (fit.theta_diff - jack)
    assert np.corrcoef(approx, fit.influence[:40])[0, 1] > 0.99


def test_scaling_equivariance(rng):
    d = exp_dataset(rng, 300, LAMBDA0, censor_max=8)
    a = rmst_fit(d, 5)
    b = rmst_fit(SurvivalDataset(d.time * 365.25, d.event, d.arm), 5 * 365.25)
    assert b.theta_diff == pytest.approx(365.25 * a.theta_diff, rel=1e-12)
    assert b.var_influence == pytest.approx(365.25 ** 2 * a.var_influence, rel=1e-10)
