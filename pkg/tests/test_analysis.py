import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from whiteconv.analysis import (CSV_FIELDS, TailBoundQuery, Variant,
                                concentration_samples, eigenvalue_deviation_study,
                                eigenvalue_extremes, empirical_concentration, fit_constant_k,
                                measurement_bound, sharp_measurement_bound, tail_bound,
                                theorem_shape)
from whiteconv.bases import make_basis
from whiteconv.core import InvalidParameterError, SupportSet, Waveform
from whiteconv.operators import SensingOperator, make_subsample_set


def q(**kw):
    base = dict(m=64, S=4, n=256, mu=1.0, r=1.0, ensemble="gaussian", variant="fixed_vector")
    base.update(kw)
    return TailBoundQuery(**base)


# ---------------------------------------------------------------- tail bounds

def test_gaussian_fixed_vector_value():
    ev = tail_bound(q(m=128, r=0.5))
    assert ev.probability_bound == pytest.approx(0.0024787521766663585, rel=1e-12)
    assert ev.valid and ev.validity_threshold == pytest.approx(2 * 4 / 128)


def test_gaussian_any_support_value():
    # e^2 S^2 exp(-m r / (4 mu^2 S)) C(n, S), far above one so it clamps
    ev = tail_bound(q(m=128, r=0.5, variant="any_support"))
    assert ev.log_bound == pytest.approx(math.log(378489783.0732044), rel=1e-12)
    assert ev.probability_bound == 1.0


def test_bernoulli_values():
    fv = tail_bound(q(m=64, r=5.0, ensemble="bernoulli"))
    fs = tail_bound(q(m=64, r=5.0, ensemble="bernoulli", variant="fixed_support"))
    assert fv.probability_bound == pytest.approx(0.09957413673572788, rel=1e-12)
    assert fv.validity_threshold == pytest.approx(32 * 4 / 64)
    assert fs.log_bound == pytest.approx(math.log(19.40898111080427), rel=1e-12)
    assert fs.validity_threshold == pytest.approx(64 * 4 / 64)


@pytest.mark.parametrize("ens, var, thr", [
    ("gaussian", "fixed_vector", 2), ("gaussian", "fixed_support", 4),
    ("gaussian", "any_support", 4), ("bernoulli", "fixed_vector", 32),
    ("bernoulli", "fixed_support", 64), ("bernoulli", "any_support", 64)])
def test_validity_threshold_exact(ens, var, thr):
    t = thr * 2.0 ** 2 * 3 / 48
    assert not tail_bound(q(m=48, S=3, mu=2.0, r=t, ensemble=ens, variant=var)).valid
    assert tail_bound(q(m=48, S=3, mu=2.0, r=t * (1 + 1e-9), ensemble=ens, variant=var)).valid


def test_huge_r_underflows_to_zero():
    ev = tail_bound(q(r=1e6))
    assert ev.probability_bound == 0.0


def test_small_m_clamps_to_one():
    assert tail_bound(q(m=1, r=5.0, variant="fixed_support")).probability_bound == 1.0


@settings(max_examples=200, deadline=None)
@given(m=st.integers(1, 4096), S=st.integers(1, 64), mu=st.floats(1, 16),
       r=st.floats(0, 1e3), ens=st.sampled_from(["gaussian", "bernoulli"]))
def test_bound_clamped_and_variants_ordered(m, S, mu, r, ens):
    vals = [tail_bound(q(m=m, S=S, n=4096, mu=mu, r=r, ensemble=ens, variant=v))
            for v in Variant]
    for ev in vals:
        assert 0.0 <= ev.probability_bound <= 1.0
        assert ev.valid == (r > ev.validity_threshold)
    fv, fs, anys = vals
    if fs.valid:
        assert fv.log_bound <= fs.log_bound <= anys.log_bound


@pytest.mark.parametrize("kw", [{"mu": 0.5}, {"S": 0}, {"S": 300}, {"r": -1.0}, {"m": 0}])
def test_query_rejects(kw):
    with pytest.raises(InvalidParameterError):
        q(**kw)


# ---------------------------------------------------------------- measurement bounds

def test_measurement_bound_gaussian_value():
    assert measurement_bound(256, 4, 1.0, 0.1, "gaussian", 1.0) == 88


def test_measurement_bound_bernoulli_value():
    assert measurement_bound(256, 4, 1.0, 0.1, "bernoulli", 1.0) == 691


def test_sharp_bound_value():
    assert sharp_measurement_bound(256, 4, 1.0, 0.1) == pytest.approx(1457.8367126038195,
                                                                       rel=1e-12)


def test_measurement_bound_monotone():
    assert measurement_bound(256, 8, 1.0, 0.1) > measurement_bound(256, 4, 1.0, 0.1)
    assert measurement_bound(256, 4, 1.0, 0.01) > measurement_bound(256, 4, 1.0, 0.1)


@pytest.mark.parametrize("S", [1, 4, 16])
def test_bernoulli_needs_more(S):
    assert measurement_bound(256, S, 1.0, 0.1, "bernoulli") >= measurement_bound(256, S, 1.0, 0.1)


def test_measurement_bound_scales_with_K_and_mu():
    base = theorem_shape(512, 5, 1.0, 0.05)
    assert theorem_shape(512, 5, 3.0, 0.05) == pytest.approx(9 * base)
    assert measurement_bound(512, 5, 1.0, 0.05, K=2.5) == math.ceil(2.5 * base)


@pytest.mark.parametrize("delta", [0.0, 1.0, 1.5])
def test_measurement_bound_delta_range(delta):
    with pytest.raises(InvalidParameterError):
        measurement_bound(256, 4, 1.0, delta)


def test_fit_k_recovers_planted_constant():
    pts = [(S, 0.37 * theorem_shape(256, S, 1.0, 0.1)) for S in (1, 2, 4, 8)]
    K, resid = fit_constant_k(pts, 256, 1.0, 0.1)
    assert K == pytest.approx(0.37, rel=1e-12) and resid < 1e-9


def test_fit_k_noisy_points():
    pts = [(1, 9.0), (2, 14.0), (4, 30.0), (8, 51.0)]
    K, resid = fit_constant_k(pts, 256, 1.0, 0.1)
    f = np.array([theorem_shape(256, S, 1.0, 0.1) for S, _ in pts])
    m = np.array([m for _, m in pts])
    assert K == pytest.approx(np.linalg.lstsq(f[:, None], m, rcond=None)[0][0], rel=1e-12)
    assert 0 < K < math.inf and resid > 0


# ---------------------------------------------------------------- concentration

def test_expected_R_is_one():
    basis = make_basis("spikes", 64)
    R = concentration_samples(64, 4, basis, "gaussian", make_subsample_set(64, 16), 200, 3)
    assert abs(R.mean() - 1) < 0.1


def test_concentration_table():
    basis = make_basis("spikes", 64)
    study = empirical_concentration(64, 2, basis, "gaussian", "equal", 32,
                                    [0.1, 0.5, 1e9], 400, seed=7)
    assert [r.r for r in study.rows] == [0.1, 0.5, 1e9]
    assert study.rows[-1].empirical == 0.0
    for row in study.rows:
        assert set(row.as_dict()) == set(CSV_FIELDS)
        f = row.empirical
        assert row.stderr == pytest.approx(math.sqrt(f * (1 - f) / 400))
    assert study.rows[0].empirical >= study.rows[1].empirical


def test_concentration_needs_100_trials():
    with pytest.raises(InvalidParameterError):
        empirical_concentration(64, 2, make_basis("spikes", 64), "gaussian", "equal", 32,
                                [1.0], 99, 0)


def test_concentration_deterministic():
    args = (64, 2, make_basis("dct", 64), "bernoulli", "equal", 16, [0.5, 1.0], 150, 11)
    a, b = empirical_concentration(*args), empirical_concentration(*args)
    assert a.rows == b.rows and np.array_equal(a.samples, b.samples)


@pytest.mark.parametrize("scale, expect", [(4.0, 1.0), (1.0, 1 / 16)])
def test_eigenvalues_delta_operator(scale, expect):
    # a white waveform carries energy n, so the unit-eigenvalue case is sqrt(n) * delta
    n = 16
    op = SensingOperator(Waveform(scale * np.eye(n)[0], "gaussian", 0), make_subsample_set(n, n))
    lo, hi = eigenvalue_extremes(op, make_basis("spikes", n), SupportSet((1, 5, 9), n))
    assert lo == pytest.approx(expect, abs=1e-12) and hi == pytest.approx(expect, abs=1e-12)


def test_eigenvalues_rank_deficient():
    op = SensingOperator(Waveform(np.random.default_rng(0).standard_normal(16), "gaussian", 0),
                         make_subsample_set(16, 2))
    lo, hi = eigenvalue_extremes(op, make_basis("spikes", 16), SupportSet((0, 1, 2), 16))
    assert lo == 0.0 and hi > 0


def test_eigenvalue_study_centred_on_one():
    st_ = eigenvalue_deviation_study(64, 3, 32, make_basis("spikes", 64), "gaussian", 0.5,
                                     200, seed=2)
    assert abs(np.mean((st_.lambda_min + st_.lambda_max) / 2) - 1) < 0.1
    assert np.all(st_.lambda_min <= st_.lambda_max)
