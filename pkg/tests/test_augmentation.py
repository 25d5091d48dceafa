import math

import numpy as np
import pytest

from rmstdesign.augmentation import augmented_fit, c_hat, e2_hat, null_residuals, stepwise_select
from rmstdesign.datamodel import SurvivalDataset
from rmstdesign.errors import SingularGram
from rmstdesign.estimators import rmst_fit
from rmstdesign.simulation import generate_reference, generate_subjects

from conftest import exp_dataset

LAMBDA0 = -math.log(0.2) / 5


def test_zero_column_singular(rng):
    d = exp_dataset(rng, 200, LAMBDA0, censor_max=8, p=2)
    v = d.covariates.copy()
    v[:, 1] = 0
    bad = SurvivalDataset(d.time, d.event, d.arm, v, d.covariate_names)
    with pytest.raises(SingularGram) as info:
        c_hat(bad, 5)
    assert "v1" in info.value.offending


def test_collinear_singular():
    d = generate_subjects("sData2a", 500, seed=3)
    v = d.covariates[:, 0]
    both = SurvivalDataset(d.time, d.event, d.arm, np.column_stack((v, 2 * v, np.ones(d.n))),
                           ("a", "b", "one"))
    with pytest.raises(SingularGram):
        augmented_fit(both, 5, covariates=("a", "b"))


def test_noise_covariate_coefficient_near_zero():
    coefs = []
    for r in range(40):
        rng = np.random.default_rng([7, r])
        coefs.append(c_hat(exp_dataset(rng, 5000, LAMBDA0, 0.7 * LAMBDA0, 8, p=1), 5)[0])
    coefs = np.array(coefs)
    assert abs(coefs.mean()) < 3 * coefs.std(ddof=1) / math.sqrt(coefs.size)


def test_fixed_zero_coefficients_reduce_to_unadjusted():
    d = generate_subjects("sData2a", 300, seed=1)
    fit = augmented_fit(d, 5, c=np.zeros(2))
    base = rmst_fit(d, 5)
    assert fit.theta_aug == base.theta_diff and fit.var_aug == base.var_influence


def test_zero_arity_bit_exact():
    d = generate_subjects("sData2a", 300, seed=1)
    fit = augmented_fit(d, 5, covariates=())
    base = rmst_fit(d, 5)
    assert fit.theta_aug == base.theta_diff and fit.var_aug == base.var_influence


def test_augmentation_reduces_variance():
    d = generate_subjects("sData2a", 2000, seed=2)
    fit = augmented_fit(d, 5, covariates=("V1", "V2"))
    assert fit.var_aug < fit.base.var_influence


def test_e2_zero_for_orthogonal_covariates():
    ref = generate_reference("sData2a", "correctly_matched", 300, seed=4)
    m = null_residuals(ref, 5)
    x = np.random.default_rng(0).standard_normal(ref.n)
    v = x - m * (m @ x) / (m @ m)
    d = SurvivalDataset(ref.time, ref.event, None, v[:, None], ("w",))
    assert e2_hat(d, 5, residuals=m).value == pytest.approx(0, abs=1e-20)


def test_e2_positive_for_dependent_covariates():
    ref = generate_reference("sData2a", "correctly_matched", 2000, seed=4)
    assert e2_hat(ref, 5).value > 1.0


def test_stepwise_single_candidate():
    ref = generate_reference("sData2a", "correctly_matched", 200, seed=4)
    trace = stepwise_select(ref, 5, ["V1"])
    assert [s.added for s in trace] == [None, "V1"]


def test_stepwise_skips_collinear():
    ref = generate_reference("sData2a", "correctly_matched", 200, seed=4)
    d = SurvivalDataset(ref.time, ref.event, None,
                        np.column_stack((ref.covariates, ref.covariates[:, 0] * 3)), ("V1", "V2", "V1x3"))
    with pytest.warns(UserWarning, match="V1x3"):
        trace = stepwise_select(d, 5, ["V1", "V2", "V1x3"])
    assert [s.added for s in trace[1:]] == ["V1", "V2"] or [s.added for s in trace[1:]] == ["V2", "V1"]
    e2 = [s.e2 for s in trace]
    assert all(b >= a - 1e-10 for a, b in zip(e2, e2[1:]))


def test_stepwise_groups_enter_together():
    ref = generate_reference("sData2a", "correctly_matched", 300, seed=5)
    trace = stepwise_select(ref, 5, [("V1", "V2")])
    assert trace[1].covariates == ("V1", "V2") and trace[1].added == "V1+V2"
