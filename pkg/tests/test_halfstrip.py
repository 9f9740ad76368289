import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import driftlab as dl
from driftlab.errors import DomainError, IllPosedProfileError, RegimeMismatchError
from driftlab.halfstrip import (
    REGIME_CONSTANT,
    REGIME_GENERALIZED,
    REGIME_LAMPERTI,
    Moments,
    validate_states,
)


# ---------------------------------------------------------------------------
# empirical_moments


def test_moments_correlated_rw_drift():
    # q=0.6, both correction constants zero: drift is q - (1-q) = 0.2
    m = dl.CorrelatedRWModel(q=0.6)
    mom = dl.empirical_moments(m, 50.0, +1)
    assert mom.mu == pytest.approx(0.2, abs=1e-15)
    assert mom.q_row[m.line_index(+1)] == pytest.approx(0.6, abs=1e-15)
    assert mom.sigma2 == pytest.approx(1.0, abs=1e-15)


def test_moments_frozen_kernel():
    lines = ("a", "b")
    table = {(3.0, "a"): [(3.0, "a", 1.0)]}
    m = dl.tabular_model(lines, table)
    mom = dl.empirical_moments(m, 3.0, "a")
    assert mom.mu == 0.0
    assert mom.sigma2 == 0.0
    assert mom.q_row[0] == 1.0


def test_moments_match_bruteforce_oracle():
    # five support points across three lines, checked against a direct sum
    lines = (0, 1, 2)
    jumps = [(4.0, 0, 0.1), (5.5, 1, 0.25), (2.5, 1, 0.2), (7.0, 2, 0.15), (3.0, 2, 0.3)]
    m = dl.tabular_model(lines, {(4.0, 0): jumps})
    mom = dl.empirical_moments(m, 4.0, 0)

    mu = math.fsum(p * (y - 4.0) for y, _, p in jumps)
    sig2 = math.fsum(p * (y - 4.0) ** 2 for y, _, p in jumps)
    for j in lines:
        mu_j = math.fsum(p * (y - 4.0) for y, lab, p in jumps if lab == j)
        q_j = math.fsum(p for _, lab, p in jumps if lab == j)
        assert mom.mu_row[j] == pytest.approx(mu_j, abs=1e-14)
        assert mom.q_row[j] == pytest.approx(q_j, abs=1e-14)
    assert mom.mu == pytest.approx(mu, abs=1e-14)
    assert mom.sigma2 == pytest.approx(sig2, abs=1e-14)


def test_moments_outside_domain_errors():
    m = dl.tabular_model(("a",), {(1.0, "a"): [(1.0, "a", 1.0)]})
    with pytest.raises(DomainError):
        dl.empirical_moments(m, 2.0, "a")
    with pytest.raises(DomainError):
        dl.empirical_moments(m, 1.0, "zz")


def test_kernel_row_sum_validation():
    bad = dl.tabular_model(("a",), {(1.0, "a"): [(1.0, "a", 0.5)]})
    with pytest.raises(DomainError):
        bad.jumps(1.0, "a")
    negative = dl.tabular_model(("a",), {(1.0, "a"): [(2.0, "a", 1.5), (0.5, "a", -0.5)]})
    with pytest.raises(DomainError):
        negative.jumps(1.0, "a")


def test_validate_states_accepts_crw():
    m = dl.CorrelatedRWModel(q=0.55, c_plus=0.3, c_minus=-0.2)
    validate_states(m, [(x, i) for x in (0.0, 1.0, 5.0, 100.0) for i in (-1, +1)])


# ---------------------------------------------------------------------------
# fit_drift_profile


def test_fit_recovers_correlated_rw_constants():
    q, c = 0.7, 1.0
    m = dl.CorrelatedRWModel(q=q, c_plus=c, c_minus=c)
    fit = dl.fit_drift_profile(m, REGIME_GENERALIZED, [1e3, 1e4, 1e5])
    exact = dl.correlated_rw_profile(q, c, c)
    assert np.allclose(fit.d, exact.d, atol=1e-9)
    assert np.allclose(fit.e_or_c, exact.e_or_c, atol=1e-9)
    assert np.allclose(fit.gamma, exact.gamma, atol=1e-9)
    assert np.allclose(fit.cross, exact.cross, atol=1e-9)
    assert np.allclose(fit.var, exact.var, atol=1e-9)
    # the correction rows follow the +/- c/2 pattern
    assert np.allclose(fit.gamma, [[-0.5, 0.5], [-0.5, 0.5]], atol=1e-9)


def test_fit_pure_lamperti_kernel():
    q = np.array([[0.5, 0.5], [0.4, 0.6]])
    m = dl.lamperti_model(("u", "v"), c=[0.8, -0.3], s2=[1.5, 2.0], q_limit=q)
    fit = dl.fit_drift_profile(m, REGIME_LAMPERTI, [1e3, 1e4, 1e5])
    assert np.allclose(fit.e_or_c, [0.8, -0.3], atol=1e-9)
    assert np.allclose(fit.var, [1.5, 2.0], atol=1e-9)
    assert np.allclose(fit.q_limit, q, atol=1e-12)


def _synthetic_profile() -> dl.DriftProfile:
    q = np.array([[0.2, 0.5, 0.3], [0.3, 0.3, 0.4], [0.5, 0.2, 0.3]])
    gamma = np.array([[0.2, -0.1, -0.1], [-0.3, 0.2, 0.1], [0.0, 0.15, -0.15]])
    cross = np.array([[0.1, -0.3, 0.25], [0.2, -0.25, 0.0], [-0.05, 0.15, -0.1]])
    d = cross.sum(axis=1)
    pi = dl.stationary_distribution(q)
    # push d into the critical hyperplane, keeping row-sum consistency
    shift = float(pi @ d)
    cross = cross - shift / 3.0
    d = cross.sum(axis=1)
    e = np.array([0.4, -0.2, 0.1])
    t2 = np.array([2.0, 1.5, 2.5])
    return dl.DriftProfile(
        regime=REGIME_GENERALIZED, q_limit=q, d=d, e_or_c=e, var=t2, cross=cross, gamma=gamma
    )


def test_fit_round_trips_synthetic_profile_exactly():
    profile = _synthetic_profile()
    model = dl.profile_kernel_model(profile)
    fit = dl.fit_drift_profile(model, REGIME_GENERALIZED, [1e3, 1e4, 1e5])
    for name in ("d", "e_or_c", "var", "cross", "gamma", "q_limit"):
        assert np.allclose(getattr(fit, name), getattr(profile, name), atol=1e-9), name


def test_fit_tolerates_second_order_noise():
    profile = _synthetic_profile()
    model = dl.profile_kernel_model(profile, curvature=0.02)
    fit = dl.fit_drift_profile(model, REGIME_GENERALIZED, [1e3, 1e4, 1e5])
    for name in ("d", "e_or_c", "var", "cross", "gamma"):
        assert np.allclose(getattr(fit, name), getattr(profile, name), atol=1e-4), name
    # the perturbation is genuinely visible at the exact-recovery scale
    assert not np.allclose(fit.e_or_c, profile.e_or_c, atol=1e-9)


def test_fitted_profile_identities():
    profile = _synthetic_profile()
    fit = dl.fit_drift_profile(dl.profile_kernel_model(profile), REGIME_GENERALIZED, [1e3, 1e4, 1e5])
    assert np.max(np.abs(fit.gamma.sum(axis=1))) < 1e-8
    assert np.max(np.abs(fit.cross.sum(axis=1) - fit.d)) < 1e-8


def test_fit_regime_mismatch_is_loud():
    m = dl.CorrelatedRWModel(q=0.7, c_plus=1.0, c_minus=1.0)
    with pytest.raises(RegimeMismatchError):
        dl.fit_drift_profile(m, REGIME_LAMPERTI, [1e3, 1e4, 1e5])


def test_fit_constant_regime():
    m = dl.CorrelatedRWModel(q=0.8, c_plus=0.0, c_minus=0.0)
    fit = dl.fit_drift_profile(m, REGIME_CONSTANT, [1e3, 1e4, 1e5])
    assert np.allclose(fit.d, [-0.6, 0.6], atol=1e-10)


def test_fit_preconditions():
    m = dl.CorrelatedRWModel(q=0.6)
    with pytest.raises(ValueError):
        dl.fit_drift_profile(m, REGIME_GENERALIZED, [1e3, 1e4])
    with pytest.raises(ValueError):
        dl.fit_drift_profile(m, REGIME_GENERALIZED, [50.0, 1e3, 1e4])
    with pytest.raises(ValueError):
        dl.fit_drift_profile(m, REGIME_GENERALIZED, [1e4, 1e3, 1e5])


# ---------------------------------------------------------------------------
# DriftProfile invariants


def test_profile_rejects_bad_gamma_rows():
    with pytest.raises(ValueError):
        dl.DriftProfile(
            regime=REGIME_GENERALIZED,
            q_limit=np.array([[0.5, 0.5], [0.5, 0.5]]),
            d=np.array([0.1, -0.1]),
            e_or_c=np.zeros(2),
            var=np.ones(2),
            cross=np.array([[0.05, 0.05], [-0.05, -0.05]]),
            gamma=np.array([[0.3, 0.0], [0.0, -0.3]]),  # rows do not sum to 0
        )


def test_profile_rejects_cross_row_mismatch():
    with pytest.raises(ValueError):
        dl.DriftProfile(
            regime=REGIME_GENERALIZED,
            q_limit=np.array([[0.5, 0.5], [0.5, 0.5]]),
            d=np.array([0.3, -0.3]),
            e_or_c=np.zeros(2),
            var=np.ones(2),
            cross=np.zeros((2, 2)),
            gamma=np.zeros((2, 2)),
        )


def test_profile_rejects_reducible_q():
    with pytest.raises(ValueError):
        dl.DriftProfile(
            regime=REGIME_LAMPERTI,
            q_limit=np.eye(2),
            e_or_c=np.zeros(2),
            var=np.ones(2),
        )


def test_profile_requires_some_variance():
    with pytest.raises(ValueError):
        dl.DriftProfile(
            regime=REGIME_LAMPERTI,
            q_limit=np.array([[0.5, 0.5], [0.5, 0.5]]),
            e_or_c=np.zeros(2),
            var=np.zeros(2),
        )


# ---------------------------------------------------------------------------
# Lyapunov functions


def test_power_function_reduces_to_power():
    spec = dl.LyapunovSpec(nu=2.0, b=(0.0, 0.0))
    assert dl.lyapunov_value(spec, "f_nu", 3.0, 0) == pytest.approx(9.0, abs=1e-14)


def test_power_function_with_offsets():
    spec = dl.LyapunovSpec(nu=2.0, b=(1.0, 1.0), x0=1.0 + math.sqrt(2.0))
    # direct substitution above the cutoff: x^2 + b
    assert dl.lyapunov_value(spec, "f_nu", 3.0, 0) == pytest.approx(10.0, abs=1e-12)
    # below the cutoff the value freezes at x0
    x0 = 1.0 + math.sqrt(2.0)
    assert dl.lyapunov_value(spec, "f_nu", 2.0, 0) == pytest.approx(x0**2 + 1.0, abs=1e-12)


def test_inverse_power_clamps_below_cutoff():
    spec = dl.LyapunovSpec(nu=1.0, b=(0.5, -0.5))
    x0 = spec.cutoff("h_nu")
    assert x0 == pytest.approx(2.0)
    for i in (0, 1):
        frozen = dl.lyapunov_value(spec, "h_nu", 0.7, i)
        assert frozen == pytest.approx(dl.lyapunov_value(spec, "h_nu", x0, i), abs=1e-14)


def test_linear_function():
    spec = dl.LyapunovSpec(nu=0.0, b=(2.5, -1.0))
    assert dl.lyapunov_value(spec, "g", 4.0, 1) == pytest.approx(3.0)


def test_spec_rejects_inconsistent_cutoff():
    spec = dl.LyapunovSpec(nu=2.0, b=(1.0, 1.0), x0=7.0)
    with pytest.raises(ValueError):
        dl.lyapunov_value(spec, "f_nu", 10.0, 0)


@settings(max_examples=200, deadline=None)
@given(
    nu=st.floats(min_value=-3.0, max_value=3.0, allow_nan=False),
    b=st.lists(st.floats(min_value=-5.0, max_value=5.0), min_size=1, max_size=4),
    x=st.floats(min_value=0.0, max_value=1e4),
)
def test_power_function_two_sided_bounds(nu, b, x):
    # k1 (1+x)^nu <= f_nu(x, i) <= k2 (1+x)^nu above the cutoff
    spec = dl.LyapunovSpec(nu=nu, b=tuple(b))
    x0 = spec.cutoff("f_nu")
    if x < x0:
        return
    k1 = 0.5 * min(1.0, 2.0**-nu)
    k2 = 1.5 * max(1.0, 2.0**-nu)
    for i in range(len(b)):
        val = dl.lyapunov_value(spec, "f_nu", x, i)
        assert k1 * (1 + x) ** nu <= val * (1 + 1e-12) + 1e-300
        assert val <= k2 * (1 + x) ** nu * (1 + 1e-12)


def test_drift_check_vanishing_coefficient():
    # c_i = s_i^2 (1 - nu)/2 makes the leading term vanish
    nu = 2.0
    s2 = [1.0, 1.0]
    c = [s2[0] * (1 - nu) / 2, s2[1] * (1 - nu) / 2]
    q = np.array([[0.5, 0.5], [0.5, 0.5]])
    m = dl.lamperti_model(("a", "b"), c=c, s2=s2, q_limit=q)
    spec = dl.LyapunovSpec(nu=nu, b=(0.0, 0.0))
    emp, predicted = dl.lyapunov_drift_check(m, spec, 1e4, "a")
    assert predicted == pytest.approx(0.0, abs=1e-6)
    assert emp == pytest.approx(0.0, abs=1e-6)


def test_drift_check_matches_exact_expectation():
    # constants from the correlated walk after the shift transformation
    profile = dl.correlated_rw_profile(0.7, 1.0, 1.0)
    pi = dl.stationary_distribution(profile.q_limit)
    a = dl.solve_shifts(profile.q_limit, profile.d, pi)
    c, s2 = dl.transform_to_lamperti(profile, a)
    m = dl.lamperti_model((-1, +1), c=c, s2=s2, q_limit=profile.q_limit)
    spec = dl.LyapunovSpec(nu=1.0, b=(0.2, -0.1))
    emp, pred = dl.lyapunov_drift_check(m, spec, 1e4, +1)
    assert abs(emp - pred) <= 1e-2 * abs(pred) + 1e-6


def test_drift_check_negative_case():
    # offsets chosen through the shift solver force a negative leading term
    q = np.array([[0.3, 0.7], [0.6, 0.4]])
    pi = dl.stationary_distribution(q)
    nu = 1.0
    c = np.array([-0.8, 0.1])
    s2 = np.array([1.0, 1.0])
    u = 2 * c + (nu - 1) * s2
    total = float(pi @ u)
    assert total < 0
    eps = -total / (2 * pi)
    b = dl.solve_shifts(q, u + eps, pi)
    m = dl.lamperti_model(("lo", "hi"), c=c, s2=s2, q_limit=q, x_min=10.0)
    spec = dl.LyapunovSpec(nu=nu, b=tuple(b))
    for label in ("lo", "hi"):
        _, pred = dl.lyapunov_drift_check(m, spec, 1e4, label)
        assert pred < 0


# ---------------------------------------------------------------------------
# model families


def test_crw_forced_right_at_origin():
    m = dl.CorrelatedRWModel(q=0.7)
    jumps = m.jumps(0.0, -1)
    assert jumps == [(1.0, +1, 1.0)]


def test_crw_two_step_lines():
    m = dl.CorrelatedRWModel(q=0.5, memory=2)
    assert m.lines == ((-1, -1), (-1, +1), (+1, -1), (+1, +1))
    jumps = m.jumps(5.0, (-1, +1))
    targets = {j for _, j, _ in jumps}
    assert targets == {(+1, +1), (+1, -1)}


def test_lamperti_model_requires_enough_variance():
    with pytest.raises(IllPosedProfileError):
        dl.lamperti_model(("a",), c=[60.0], s2=[1.0], q_limit=np.array([[1.0]]), x_min=50.0)


@settings(max_examples=60, deadline=None)
@given(
    q=st.floats(min_value=0.05, max_value=0.95),
    c=st.floats(min_value=-2.0, max_value=2.0),
    x=st.integers(min_value=0, max_value=500),
    i=st.sampled_from([-1, +1]),
)
def test_crw_rows_always_sum_to_one(q, c, x, i):
    m = dl.CorrelatedRWModel(q=q, c_plus=c, c_minus=c)
    mom = dl.empirical_moments(m, float(x), i)
    assert mom.q_row.sum() == pytest.approx(1.0, abs=1e-12)
