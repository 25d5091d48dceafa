"""Invariants checked over generated inputs."""

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rmstdesign.augmentation import augmented_fit, e2_hat
from rmstdesign.datamodel import SurvivalDataset, load_csv, write_csv
from rmstdesign.design import DesignInputs, midtrial_recalc, power_from_variance, required_n
from rmstdesign.estimators import kaplan_meier, rmst_fit, rmst_integral
from rmstdesign.inference import analyze
from rmstdesign.simulation import generate_reference, generate_subjects

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
seeds = st.integers(0, 2**32 - 1)


def _well_conditioned(seed, p):
    rng = np.random.default_rng(seed)
    while True:
        a = rng.standard_normal((p, p))
        if np.linalg.cond(a) < 50:
            return a


@SETTINGS
@given(seed=seeds, rep=st.integers(0, 50))
def test_e2_linear_invariance(seed, rep):
    ref = generate_reference("sData2a", "correctly_matched", 200, seed=seed, replication=rep)
    a = _well_conditioned(seed, 2)
    recoded = SurvivalDataset(ref.time, ref.event, None, ref.covariates @ a.T, ("w1", "w2"))
    e = e2_hat(ref, 5).value
    assert e2_hat(recoded, 5).value == pytest.approx(e, rel=1e-8, abs=1e-12)


@SETTINGS
@given(seed=seeds, rep=st.integers(0, 50))
def test_theta_aug_linear_invariance(seed, rep):
    d = generate_subjects("sData2a", 200, seed=seed, replication=rep)
    a = _well_conditioned(seed + 1, 2)
    recoded = SurvivalDataset(d.time, d.event, d.arm, d.covariates @ a.T, ("w1", "w2"))
    x, y = augmented_fit(d, 5), augmented_fit(recoded, 5)
    assert y.theta_aug == pytest.approx(x.theta_aug, rel=1e-8)
    assert y.var_aug == pytest.approx(x.var_aug, rel=1e-8)


@SETTINGS
@given(seed=seeds, extra=st.integers(1, 3))
def test_e2_span_monotone(seed, extra):
    ref = generate_reference("sData2a", "correctly_matched", 200, seed=seed)
    rng = np.random.default_rng(seed)
    v = np.column_stack((ref.covariates, rng.standard_normal((ref.n, extra))))
    names = ("V1", "V2") + tuple(f"n{j}" for j in range(extra))
    d = SurvivalDataset(ref.time, ref.event, None, v, names)
    small = e2_hat(d, 5, ("V1",)).value
    mid = e2_hat(d, 5, ("V1", "V2")).value
    big = e2_hat(d, 5, names).value
    assert small <= mid + 1e-10 and mid <= big + 1e-10


@SETTINGS
@given(theta=st.floats(0.01, 5), sigma2=st.floats(0.1, 100), n=st.integers(2, 5000),
       frac=st.floats(0, 0.95))
def test_power_monotone_and_dominance(theta, sigma2, n, frac):
    e2 = frac * sigma2 / 0.25
    p = power_from_variance(theta, sigma2, n)
    assert power_from_variance(theta, sigma2, n + 1) >= p
    assert power_from_variance(theta * 1.01, sigma2, n) >= p
    assert power_from_variance(theta, sigma2, n, e2=e2) >= p


@SETTINGS
@given(theta=st.floats(0.05, 2), sigma2=st.floats(1, 50), e2=st.floats(0, 10))
def test_required_n_step_consistency(theta, sigma2, e2):
    assume(0.25 * e2 < 0.9 * sigma2)
    inputs = DesignInputs(tau=5, theta_alt=theta, sigma2=sigma2, e2=e2)
    n1 = required_n(inputs, 10, 1, 20000).recommended_n
    n10 = required_n(inputs, 10, 10, 20000).recommended_n
    assume(n1 is not None and n10 is not None)
    assert n1 <= n10 < n1 + 10


@SETTINGS
@given(seed=seeds, rep=st.integers(0, 1000), alpha=st.sampled_from([0.01, 0.05, 0.1]))
def test_test_ci_duality(seed, rep, alpha):
    d = generate_subjects("sData3a", 150, seed=seed, replication=rep)
    for r in analyze(d, 5, alpha, covariates=("V1", "V2")):
        assert r.rejects == (r.p_value < alpha)


@SETTINGS
@given(seed=seeds)
def test_recalc_arm_permutation_invariance(seed):
    d = generate_subjects("sData2a", 200, seed=seed)
    perm = np.random.default_rng(seed).permutation(d.n)
    relabeled = SurvivalDataset(d.time, d.event, d.arm[perm], d.covariates, d.covariate_names)
    base = midtrial_recalc(d.blind(), 5, 0.514, covariates=("V1", "V2"))
    with pytest.warns(UserWarning):
        other = midtrial_recalc(relabeled, 5, 0.514, covariates=("V1", "V2"))
    assert other.curve == base.curve and other.e2 == base.e2


@SETTINGS
@given(seed=seeds, k=st.floats(1e-3, 1e3))
def test_time_scale_equivariance(seed, k):
    d = generate_subjects("sData2b", 200, seed=seed)
    a = rmst_fit(d, 5)
    b = rmst_fit(SurvivalDataset(d.time * k, d.event, d.arm), 5 * k)
    assert b.theta_diff == pytest.approx(k * a.theta_diff, rel=1e-9, abs=1e-12)
    s = kaplan_meier(d.time, d.event)
    assert rmst_integral(s.scaled_time(k), 5 * k) == pytest.approx(k * rmst_integral(s, 5), rel=1e-12)


times = arrays(float, st.integers(1, 30), elements=st.floats(1e-6, 1e6, allow_subnormal=False))


@settings(max_examples=60, deadline=None)
@given(t=times, data=st.data())
def test_csv_round_trip(tmp_path_factory, t, data):
    n = t.size
    e = data.draw(arrays(np.int8, n, elements=st.integers(0, 1)))
    z = data.draw(arrays(np.int8, n, elements=st.integers(0, 1)))
    v = data.draw(arrays(float, (n, 2), elements=st.floats(-1e9, 1e9, allow_subnormal=False)))
    d = SurvivalDataset(t, e, z, v, ("a", "b"))
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(d, path)
    assert load_csv(path, "arm", ["a", "b"]).equals(d)
