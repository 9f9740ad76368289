import numpy as np
import pytest

import driftlab as dl
from driftlab.classifier import (
    BOUNDARY_NULL_RECURRENT,
    NULL_RECURRENT,
    POSITIVE_RECURRENT,
    TRANSIENT,
)
from driftlab.errors import (
    DegenerateVarianceError,
    NotCriticalError,
    StructuralError,
)
from driftlab.halfstrip import REGIME_CONSTANT, REGIME_GENERALIZED, REGIME_LAMPERTI


def random_stochastic(rng, n, min_entry=0.02):
    q = rng.dirichlet(np.ones(n), size=n)
    q = (1 - n * min_entry) * q + min_entry  # strictly positive => irreducible
    return q / q.sum(axis=1, keepdims=True)


def random_generalized_profile(rng, n, cross_scale=0.5, var_range=(0.5, 3.0)):
    q = random_stochastic(rng, n)
    pi = dl.stationary_distribution(q)
    gamma = rng.normal(size=(n, n))
    gamma -= gamma.mean(axis=1, keepdims=True)
    cross = rng.normal(size=(n, n)) * cross_scale
    d = cross.sum(axis=1)
    shift = float(pi @ d)  # push the average drift to zero, rows staying consistent
    cross = cross - shift / n
    d = cross.sum(axis=1)
    e = rng.normal(size=n)
    t2 = rng.uniform(*var_range, size=n)
    return dl.DriftProfile(
        regime=REGIME_GENERALIZED, q_limit=q, d=d, e_or_c=e, var=t2, cross=cross, gamma=gamma
    )


# ---------------------------------------------------------------------------
# stationary_distribution


def test_stationary_symmetric_two_state():
    for q in (0.1, 0.5, 0.9):
        pi = dl.stationary_distribution(np.array([[q, 1 - q], [1 - q, q]]))
        assert np.allclose(pi, [0.5, 0.5], atol=1e-12)


def test_stationary_flip_chain():
    pi = dl.stationary_distribution(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(pi, [0.5, 0.5], atol=1e-12)


def test_stationary_matches_power_iteration():
    rng = np.random.default_rng(12)
    q = random_stochastic(rng, 4)
    pi = dl.stationary_distribution(q)
    vec = np.full(4, 0.25)
    for _ in range(10_000):
        vec = vec @ q
    assert np.max(np.abs(pi - vec)) < 1e-10


def test_stationary_rejects_reducible():
    q = np.array([[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(StructuralError) as err:
        dl.stationary_distribution(q)
    assert "reducible" in str(err.value)


# ---------------------------------------------------------------------------
# solve_shifts


def test_shifts_correlated_rw():
    for q in (0.3, 0.6, 0.75):
        prof = dl.correlated_rw_profile(q, 0.0, 0.0)
        pi = dl.stationary_distribution(prof.q_limit)
        a = dl.solve_shifts(prof.q_limit, prof.d, pi)
        assert a[0] == 0.0
        assert a[1] == pytest.approx((2 * q - 1) / (1 - q), abs=1e-12)


def test_shifts_zero_drift():
    q = np.array([[0.2, 0.8], [0.6, 0.4]])
    pi = dl.stationary_distribution(q)
    a = dl.solve_shifts(q, np.zeros(2), pi)
    assert np.allclose(a, 0.0, atol=1e-13)


def test_shifts_match_minimum_norm_oracle():
    rng = np.random.default_rng(5)
    q = random_stochastic(rng, 3)
    pi = dl.stationary_distribution(q)
    d = rng.normal(size=3)
    d = d - float(pi @ d)  # subtracting a constant moves pi.d to zero
    a = dl.solve_shifts(q, d, pi)
    # independent path: pseudo-inverse minimum-norm solve, then the same gauge
    a_oracle = np.linalg.pinv(q - np.eye(3)) @ (-d)
    a_oracle = a_oracle - a_oracle[0]
    assert np.max(np.abs(a - a_oracle)) < 1e-10
    assert np.max(np.abs((q - np.eye(3)) @ a + d)) < 1e-10


def test_shifts_reject_noncritical():
    q = np.array([[0.5, 0.5], [0.5, 0.5]])
    pi = dl.stationary_distribution(q)
    with pytest.raises(NotCriticalError):
        dl.solve_shifts(q, np.array([0.2, 0.1]), pi)


# ---------------------------------------------------------------------------
# transform_to_lamperti / compute_UV


def test_transform_reproduces_crw_closed_forms():
    q, cp, cm = 0.7, 1.0, 0.5
    prof = dl.correlated_rw_profile(q, cp, cm)
    pi = dl.stationary_distribution(prof.q_limit)
    a = dl.solve_shifts(prof.q_limit, prof.d, pi)
    u, v = dl.compute_UV(pi, a, prof)
    assert u == pytest.approx((cp + cm) / (2 * (1 - q)), abs=1e-12)
    assert v == pytest.approx(q / (1 - q), abs=1e-12)


def test_transform_passthrough_for_plain_lamperti_numbers():
    q = np.array([[0.5, 0.5], [0.5, 0.5]])
    prof = dl.DriftProfile(
        regime=REGIME_GENERALIZED,
        q_limit=q,
        d=np.zeros(2),
        e_or_c=np.array([0.3, -0.4]),
        var=np.array([1.0, 2.0]),
        cross=np.zeros((2, 2)),
        gamma=np.zeros((2, 2)),
    )
    c, s2 = dl.transform_to_lamperti(prof, np.zeros(2))
    assert np.allclose(c, prof.e_or_c)
    assert np.allclose(s2, prof.var)


def test_transform_matches_shift_and_refit_oracle():
    # independent derivation: translate each line of the kernel by a_i >= 0,
    # fit the shifted model as a plain Lamperti one, compare constants
    rng = np.random.default_rng(21)
    prof = random_generalized_profile(rng, 3, cross_scale=0.2, var_range=(4.0, 6.0))
    pi = dl.stationary_distribution(prof.q_limit)
    a = dl.solve_shifts(prof.q_limit, prof.d, pi)
    c_exp, s2_exp = dl.transform_to_lamperti(prof, a)

    base = dl.profile_kernel_model(prof)
    a_pos = a - a.min()  # translation-invariant, keeps the shifted state in R+
    c_shift, s2_shift = dl.transform_to_lamperti(prof, a_pos)

    def shifted_kernel(x, i):
        idx = int(i)
        jumps = base.kernel(x - a_pos[idx], idx)
        return [(y + a_pos[int(j)], j, p) for y, j, p in jumps]

    shifted = dl.HalfStripModel(lines=base.lines, kernel=shifted_kernel)
    fit = dl.fit_drift_profile(
        shifted, REGIME_LAMPERTI, [1e4, 3e4, 1e5, 3e5, 1e6], constant_tol=1e-6
    )
    assert np.allclose(fit.e_or_c, c_shift, atol=2e-4)
    assert np.allclose(fit.var, s2_shift, atol=2e-4)
    # and the U, V the report derives agree with the unshifted constants
    u1, v1 = dl.compute_UV(pi, a, prof)
    u2 = 2 * float(pi @ fit.e_or_c)
    v2 = float(pi @ fit.var)
    assert u2 == pytest.approx(u1, abs=1e-3)
    assert v2 == pytest.approx(v1, abs=1e-3)


def test_uv_two_path_agreement():
    rng = np.random.default_rng(33)
    for _ in range(25):
        prof = random_generalized_profile(rng, 3)
        pi = dl.stationary_distribution(prof.q_limit)
        a = dl.solve_shifts(prof.q_limit, prof.d, pi)
        u, v = dl.compute_UV(pi, a, prof)
        try:
            c, s2 = dl.transform_to_lamperti(prof, a)
        except Exception:
            continue
        assert 2 * float(pi @ c) == pytest.approx(u, abs=1e-10)
        assert float(pi @ s2) == pytest.approx(v, abs=1e-10)


def test_uv_lamperti_reduction():
    prof = dl.DriftProfile(
        regime=REGIME_LAMPERTI,
        q_limit=np.array([[0.5, 0.5], [0.5, 0.5]]),
        e_or_c=np.array([0.3, -0.1]),
        var=np.array([1.0, 0.5]),
    )
    pi = dl.stationary_distribution(prof.q_limit)
    u, v = dl.compute_UV(pi, np.zeros(2), prof)
    assert u == pytest.approx(2 * (0.3 - 0.1) * 0.5)
    assert v == pytest.approx(0.75)


# ---------------------------------------------------------------------------
# classify / moment_threshold


def test_classify_crw_phases():
    q = 0.7
    for c, expected in [
        (1.0, TRANSIENT),
        (0.8, TRANSIENT),
        (0.7, BOUNDARY_NULL_RECURRENT),
        (0.3, NULL_RECURRENT),
        (0.0, NULL_RECURRENT),
        (-0.7, BOUNDARY_NULL_RECURRENT),
        (-0.8, POSITIVE_RECURRENT),
    ]:
        rep = dl.classify(dl.correlated_rw_profile(q, c, c))
        assert rep.verdict == expected, (c, rep.verdict)


def test_classify_chapter_five_thresholds():
    # one-step scenario: q = 1/3, phase changes at c = +-1/3
    q = 1.0 / 3.0
    assert dl.classify(dl.correlated_rw_profile(q, 0.34, 0.34)).verdict == TRANSIENT
    assert dl.classify(dl.correlated_rw_profile(q, -0.34, -0.34)).verdict == POSITIVE_RECURRENT
    assert dl.classify(dl.correlated_rw_profile(q, 0.2, 0.2)).verdict == NULL_RECURRENT
    rep = dl.classify(dl.correlated_rw_profile(q, 0.2, 0.2))
    assert rep.theta_star == pytest.approx(0.5 - 3 * 0.2 / 2, abs=1e-12)


def test_classify_constant_regime():
    prof = dl.DriftProfile(
        regime=REGIME_CONSTANT,
        q_limit=np.array([[0.5, 0.5], [0.5, 0.5]]),
        d=np.array([0.4, 0.1]),
    )
    rep = dl.classify(prof)
    assert rep.verdict == TRANSIENT
    assert rep.theta_star is None
    neg = dl.DriftProfile(
        regime=REGIME_CONSTANT,
        q_limit=np.array([[0.5, 0.5], [0.5, 0.5]]),
        d=np.array([-0.4, -0.1]),
    )
    assert dl.classify(neg).verdict == POSITIVE_RECURRENT


def test_classify_constant_with_zero_mean_drift_refuses():
    prof = dl.DriftProfile(
        regime=REGIME_CONSTANT,
        q_limit=np.array([[0.5, 0.5], [0.5, 0.5]]),
        d=np.array([0.4, -0.4]),
    )
    with pytest.raises(NotCriticalError):
        dl.classify(prof)


def test_classify_degenerate_variance():
    prof = dl.DriftProfile(
        regime=REGIME_LAMPERTI,
        q_limit=np.array([[0.5, 0.5], [0.5, 0.5]]),
        e_or_c=np.array([0.3, -0.3]),
        var=np.array([1e-15, 1e-16]),
    )
    with pytest.raises(DegenerateVarianceError):
        dl.classify(prof)


def test_moment_threshold_closed_form():
    for q in (0.3, 0.5, 0.7):
        for c in (-1.0, -0.2, 0.0, 0.5, 2.0):
            prof = dl.correlated_rw_profile(q, c, c)
            pi = dl.stationary_distribution(prof.q_limit)
            a = dl.solve_shifts(prof.q_limit, prof.d, pi)
            u, v = dl.compute_UV(pi, a, prof)
            assert dl.moment_threshold(u, v) == pytest.approx(0.5 - c / (2 * q), abs=1e-12)
    assert dl.moment_threshold(0.0, 1.7) == pytest.approx(0.5, abs=1e-15)


def test_moment_threshold_degenerate():
    with pytest.raises(DegenerateVarianceError):
        dl.moment_threshold(0.5, 0.0)


def test_classify_clips_theta_and_caps():
    rep = dl.classify(dl.correlated_rw_profile(0.7, 1.0, 1.0), p=4.0)
    assert rep.verdict == TRANSIENT
    assert rep.theta_star == 0.0  # raw value is negative, clipped at zero
    assert rep.theta_cap == 2.0
    rep2 = dl.classify(dl.correlated_rw_profile(0.7, -10.0, -10.0), p=4.0)
    assert rep2.theta_star == 2.0  # clipped at p/2


# ---------------------------------------------------------------------------
# structural properties


def test_translation_invariance_of_uv():
    rng = np.random.default_rng(77)
    for _ in range(50):
        prof = random_generalized_profile(rng, int(rng.integers(2, 6)))
        pi = dl.stationary_distribution(prof.q_limit)
        a = dl.solve_shifts(prof.q_limit, prof.d, pi)
        u, v = dl.compute_UV(pi, a, prof)
        shift = rng.normal() * 10
        u2, v2 = dl.compute_UV(pi, a + shift, prof)
        assert u2 == pytest.approx(u, abs=1e-10 * (1 + abs(u)))
        assert v2 == pytest.approx(v, abs=1e-10 * (1 + abs(v)))


def test_quadratic_exchange_identity():
    # sum_ij (a_j^2 - a_i^2) q_ij pi_i vanishes for any stationary pair
    rng = np.random.default_rng(99)
    for _ in range(50):
        n = int(rng.integers(2, 6))
        q = random_stochastic(rng, n)
        pi = dl.stationary_distribution(q)
        a = rng.normal(size=n) * 5
        a2 = a * a
        total = float(pi @ (q @ a2 - a2))
        assert abs(total) < 1e-10


def test_classify_permutation_invariant():
    from driftlab.errors import IllPosedProfileError

    rng = np.random.default_rng(13)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        prof = random_generalized_profile(rng, n)
        perm = rng.permutation(n)
        permuted = dl.DriftProfile(
            regime=REGIME_GENERALIZED,
            q_limit=prof.q_limit[np.ix_(perm, perm)],
            d=prof.d[perm],
            e_or_c=prof.e_or_c[perm],
            var=prof.var[perm],
            cross=prof.cross[np.ix_(perm, perm)],
            gamma=prof.gamma[np.ix_(perm, perm)],
        )
        try:
            verdict = dl.classify(prof).verdict
        except IllPosedProfileError:
            with pytest.raises(IllPosedProfileError):
                dl.classify(permuted)
            continue
        assert dl.classify(permuted).verdict == verdict


def test_lamperti_and_generalized_agree_when_degenerate():
    rng = np.random.default_rng(3)
    q = random_stochastic(rng, 3)
    c = rng.normal(size=3)
    s2 = rng.uniform(0.5, 2.0, size=3)
    lam = dl.DriftProfile(regime=REGIME_LAMPERTI, q_limit=q, e_or_c=c, var=s2)
    gen = dl.DriftProfile(
        regime=REGIME_GENERALIZED,
        q_limit=q,
        d=np.zeros(3),
        e_or_c=c,
        var=s2,
        cross=np.zeros((3, 3)),
        gamma=np.zeros((3, 3)),
    )
    rep_l, rep_g = dl.classify(lam), dl.classify(gen)
    assert rep_l.verdict == rep_g.verdict
    assert rep_l.U == pytest.approx(rep_g.U, abs=1e-12)
    assert rep_l.V == pytest.approx(rep_g.V, abs=1e-12)


def test_theta_star_strictly_decreasing_in_u():
    v = 1.3
    thetas = [dl.moment_threshold(u, v) for u in np.linspace(-2, 2, 9)]
    assert all(b < a for a, b in zip(thetas, thetas[1:]))
