import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motthop.env import (
    EnergyLaw,
    GapLaw,
    GeneratorSpec,
    LazyEnvironment,
    USpec,
    make_periodic,
    sample_environment,
)
from motthop.errors import ConfigError, NumericsError
from motthop.kernel import (
    DerivativeTables,
    conductance,
    derivative_tables,
    jump_law,
    local_drift,
    log_conductance,
    rate,
    tail_bound,
    total_rate,
)


def lattice(n=1):
    return make_periodic(np.ones(n), np.zeros(n), d=1.0, u=USpec.zero())


def random_penv(seed, n=5, beta=1.0):
    gen = np.random.default_rng(seed)
    return make_periodic(
        gen.uniform(1.0, 3.0, n),
        gen.uniform(-1.0, 1.0, n),
        d=1.0,
        u=USpec.mott(beta, 1.0),
    )


def lattice_sum(lam, m, kmax=600):
    """Brute series sum_{k != 0} k^m e^{-|k| + lam k}, saturated numerically."""
    ks = np.concatenate([np.arange(-kmax, 0), np.arange(1, kmax + 1)])
    return float(np.sum(ks**m * np.exp(-np.abs(ks) + lam * ks)))


# ---------------------------------------------------------------- rates


def test_rate_lattice_values():
    env = lattice()
    assert rate(env, 0.0, 0, 1) == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert rate(env, 0.0, 0, -3) == pytest.approx(math.exp(-3.0), rel=1e-14)
    assert rate(env, 0.5, 0, 2) == pytest.approx(math.exp(-2.0 + 1.0), rel=1e-14)
    assert rate(env, 0.0, 4, 4) == 0.0


def test_rate_rejects_unit_bias():
    env = lattice()
    for lam in (1.0, -1.0, 1.5):
        with pytest.raises(ConfigError):
            rate(env, lam, 0, 1)


def test_conductance_symmetric_and_gauge_identity():
    env = random_penv(1)
    lam = 0.4
    for i, j in [(0, 1), (2, 5), (-3, 1), (4, -2)]:
        cij = conductance(env, lam, i, j)
        assert cij == pytest.approx(conductance(env, lam, j, i), rel=1e-14)
        gauge = math.exp(2.0 * lam * env.position(i))
        assert cij == pytest.approx(gauge * rate(env, lam, i, j), rel=1e-12)


def test_energy_marks_enter_through_u():
    penv = make_periodic([1.0, 1.0], [0.8, -0.5], d=1.0, u=USpec.mott(2.0, 1.0))
    expected = math.exp(-1.0 + penv.u(0.8, -0.5))
    assert rate(penv, 0.0, 0, 1) == pytest.approx(expected, rel=1e-14)


# ---------------------------------------------------------------- tail bound


def test_tail_bound_dominates_brute_force_tail():
    for lam in (0.0, 0.5):
        env = lattice()
        for K in (1, 2, 5, 10, 30):
            ks = np.concatenate([np.arange(-3000, -K), np.arange(K + 1, 3000)])
            brute = float(np.sum(np.exp(-np.abs(ks) + lam * ks)))
            assert tail_bound(1.0, lam, 0.0, K) >= brute


def test_tail_bound_dominates_with_marks_and_wide_gaps():
    env = random_penv(3)
    lam = 0.3
    ks = np.arange(-4000, 4001)
    pos, ener = env.arrays(-4000, 4000)
    w = np.exp(-np.abs(pos) + lam * pos + np.asarray(env.u(ener[4000], ener)))
    for K in (2, 6, 15):
        brute = float(np.sum(w[np.abs(ks) > K]))
        assert tail_bound(env.d, lam, env.u.bound, K) >= brute


@given(st.integers(1, 40), st.integers(2, 41))
@settings(max_examples=30, deadline=None)
def test_tail_bound_monotone_in_radius(k1, k2):
    lo, hi = sorted((k1, k2))
    assert tail_bound(1.0, 0.3, 0.5, hi) <= tail_bound(1.0, 0.3, 0.5, lo)


# ---------------------------------------------------------------- jump law


def test_lattice_jump_probability_closed_form():
    law = jump_law(lattice(), 0.0)
    s0 = lattice_sum(0.0, 0)
    assert law.prob(1) == pytest.approx(math.exp(-1.0) / s0, rel=1e-12)
    assert law.prob(1) == pytest.approx((math.e - 1.0) / (2.0 * math.e), rel=1e-12)
    assert law.prob(-1) == law.prob(1)
    assert law.prob(0) == 0.0
    assert law.pi == pytest.approx(s0, rel=1e-12)
    assert law.pi == pytest.approx(2.0 / (math.e - 1.0), rel=1e-12)


def test_jump_law_certified_tail_and_normalization():
    env = random_penv(7)
    for lam in (0.0, 0.3, 0.7):
        law = jump_law(env, lam, i=2, tail_tol=1e-12)
        assert law.tail_mass <= 1e-12 * law.pi
        assert abs(np.sum(law.probs) - 1.0) < 1e-12
        assert np.all(law.probs > 0)
        assert law.cdf[-1] == 1.0


def test_jump_law_rows_from_rates_and_conductances_agree():
    env = random_penv(11)
    lam = 0.4
    i = 3
    law = jump_law(env, lam, i=i)
    cs = np.array(
        [conductance(env, lam, i, i + int(k)) for k in law.offsets]
    )
    probs_c = cs / cs.sum()
    assert np.max(np.abs(probs_c - law.probs) / law.probs) < 1e-12


def test_jump_law_fixed_radius_and_window_error():
    env = lattice()
    law = jump_law(env, 0.0, radius=9)
    assert law.radius == 9 and len(law.offsets) == 18
    small = sample_environment(
        GeneratorSpec(GapLaw.constant(1.0), EnergyLaw(), USpec.zero(), window=8, seed=0)
    )
    with pytest.raises(NumericsError, match="radius"):
        jump_law(small, 0.0, tail_tol=1e-30)


def test_jump_law_respects_lam_cap():
    with pytest.raises(ConfigError):
        jump_law(lattice(), 0.95)
    law = jump_law(lattice(), 0.95, lam_max=0.99)
    assert law.lam == 0.95


def test_jump_law_on_lazy_environment_extends_window():
    spec = GeneratorSpec(
        GapLaw.exponential(d=1.0, rate=3.0), EnergyLaw(), USpec.zero(), window=4, seed=2
    )
    lazy = LazyEnvironment(spec)
    law = jump_law(lazy, 0.0, i=200, tail_tol=1e-12)
    assert abs(np.sum(law.probs) - 1.0) < 1e-12


# ---------------------------------------------------------------- totals, drift


def test_total_rate_lattice_and_gauge():
    env = lattice()
    assert total_rate(env, 0.0) == pytest.approx(2.0 / (math.e - 1.0), rel=1e-12)
    lam, i = 0.4, 3
    law = jump_law(env, lam, i=i)
    assert total_rate(env, lam, i) == pytest.approx(
        math.exp(2.0 * lam * env.position(i)) * law.pi, rel=1e-12
    )


def test_local_drift_matches_brute_series():
    env = lattice()
    assert local_drift(env, 0.0) == pytest.approx(0.0, abs=1e-14)
    # displacement moments see ~radius * tail_tol of truncation error
    for lam in (0.1, 0.5):
        expected = lattice_sum(lam, 1) / lattice_sum(lam, 0)
        assert local_drift(env, lam) == pytest.approx(expected, rel=1e-9)


def test_local_drift_derivative_is_second_moment_on_lattice():
    tab = derivative_tables(lattice(), 0.0)
    mu2 = lattice_sum(0.0, 2) / lattice_sum(0.0, 0)
    assert float(np.dot(tab.dp, tab.law.disp)) == pytest.approx(mu2, rel=1e-11)
    assert tab.second_moment == pytest.approx(mu2, rel=1e-11)


# ---------------------------------------------------------------- derivatives


def _fd_tables(env, lam, i, h, radius):
    lo = jump_law(env, lam - h, i=i, radius=radius).probs
    mid = jump_law(env, lam, i=i, radius=radius).probs
    hi = jump_law(env, lam + h, i=i, radius=radius).probs
    return (hi - lo) / (2 * h), (hi - 2 * mid + lo) / (h * h)


@pytest.mark.parametrize("lam", [0.0, 0.3])
@pytest.mark.parametrize("seed", [5, 17])
def test_derivative_tables_match_finite_differences(lam, seed):
    env = random_penv(seed)
    i = 1
    radius = jump_law(env, lam, i=i).radius
    tab = derivative_tables(env, lam, i=i, radius=radius)
    fd1, fd2 = _fd_tables(env, lam, i, 1e-4, radius)
    assert np.max(np.abs(tab.dp - fd1)) <= 1e-6 * np.max(np.abs(tab.dp))
    assert np.max(np.abs(tab.d2p - fd2)) <= 1e-6 * np.max(np.abs(tab.d2p))


def test_derivative_tables_sum_to_zero():
    env = random_penv(23)
    for lam in (0.0, 0.5):
        tab = derivative_tables(env, lam, i=4)
        assert abs(np.sum(tab.dp)) < 1e-13
        assert abs(np.sum(tab.d2p)) < 1e-13
