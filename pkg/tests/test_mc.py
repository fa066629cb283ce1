"""Monte Carlo estimators against exact chain values and closed forms.

Statistical assertions run at 4 standard errors with fixed seeds; the error
bars themselves come from replica spread, so each z-test also exercises the
interval machinery.
"""

import math

import numpy as np
import pytest

from motthop.env import GapLaw, GeneratorSpec, USpec, make_periodic
from motthop.errors import ConfigError
from motthop.mc import (
    EstimateCI,
    batch_means,
    ci_calibration,
    einstein_mc,
    estimate_Q,
    estimate_clt,
    estimate_diffusion,
    estimate_velocity,
    observable_vector,
)
from motthop.mc import _run_periodic_ensemble
from motthop.oracle import (
    build_chain,
    derivative_two_ways,
    diffusion_spectral,
    drift_vector,
    exact_velocity,
    exact_velocity_ct,
    reversible_law,
    stationary,
)

E = math.e


def lattice():
    return make_periodic([1.0])


def random_penv(seed, n=4, beta=1.0):
    gen = np.random.default_rng(seed)
    gaps = gen.uniform(1.0, 3.0, size=n)
    energies = gen.uniform(-1.0, 1.0, size=n)
    return make_periodic(gaps, energies, u=USpec.mott(beta, energy_bound=1.0))


# ------------------------------------------------------------ observables


def test_observable_vectors_on_lattice():
    chain = build_chain(lattice(), 0.0)
    np.testing.assert_allclose(observable_vector(chain, "one"), [1.0])
    np.testing.assert_allclose(observable_vector(chain, "pi"), [2.0 / (E - 1.0)])
    np.testing.assert_allclose(observable_vector(chain, "inv_pi"), [(E - 1.0) / 2.0])
    np.testing.assert_allclose(observable_vector(chain, "phi"), [0.0], atol=1e-14)
    np.testing.assert_allclose(observable_vector(chain, "gap"), [1.0])


def test_gap_indicator_observable():
    chain = build_chain(make_periodic([1.0, 2.0]), 0.0)
    np.testing.assert_allclose(observable_vector(chain, "gap_in:1.5,2.5"), [0.0, 1.0])
    with pytest.raises(ConfigError):
        observable_vector(chain, "gap_in:2,1")
    with pytest.raises(ConfigError):
        observable_vector(chain, "gap_in:oops")
    with pytest.raises(ConfigError):
        observable_vector(chain, "entropy")


# ------------------------------------------------------------ estimate_Q


def test_constant_observable_is_exact():
    est = estimate_Q(lattice(), 0.3, "one", n=200, replicas=8, seed=1)
    assert est.value == 1.0
    assert est.stderr == 0.0


def test_lattice_pi_observable_is_exact():
    # On the one-state chain every visited value equals the constant.
    est = estimate_Q(lattice(), 0.0, "pi", n=100, replicas=4, seed=2)
    assert est.value == pytest.approx(2.0 / (E - 1.0), rel=1e-15)
    assert est.stderr == 0.0


def test_q_matches_exact_stationary_expectation():
    penv = random_penv(11, n=4)
    lam = 0.3
    chain = build_chain(penv, lam)
    truth = float(stationary(chain) @ observable_vector(chain, "pi"))
    est = estimate_Q(penv, lam, "pi", n=4000, replicas=40, seed=3)
    assert est.z(truth) < 4.0
    assert est.replicas == 40


def test_q_gap_indicator_counts_state_occupation():
    penv = make_periodic([1.0, 2.0], [0.3, -0.2], u=USpec.mott(1.0, 1.0))
    chain = build_chain(penv, 0.0)
    truth = float(reversible_law(chain)[1])
    est = estimate_Q(penv, 0.0, "gap_in:1.5,2.5", n=4000, replicas=30, seed=4)
    assert est.z(truth) < 4.0


def test_q_iid_environment_matches_size_biased_moments():
    # For i.i.d. gaps with no marks the stationary environment law is the
    # pi-size-biased one, so Q(pi) = E[pi^2]/E[pi]; both moments close in
    # terms of m_p = E[exp(-p Z)] by summing the two independent sides.
    law = GapLaw.exponential(d=1.0, rate=3.0)
    m1 = law.exp_moment(-1.0)
    m2 = law.exp_moment(-2.0)
    el = m1 / (1.0 - m1)
    el2 = m2 / (1.0 - m2) * (1.0 + 2.0 * m1 / (1.0 - m1))
    e_pi = 2.0 * el
    e_pi2 = 2.0 * el2 + 2.0 * el * el
    truth = e_pi2 / e_pi

    spec = GeneratorSpec(gap_law=law)
    est = estimate_Q(spec, 0.0, "pi", n=1500, replicas=40, seed=5)
    assert est.z(truth) < 4.0
    assert "burn-in" in est.note


def test_single_replica_falls_back_to_path_batches():
    penv = random_penv(1, n=2)
    est = estimate_Q(penv, 0.2, "pi", n=6000, replicas=1, seed=6)
    chain = build_chain(penv, 0.2)
    truth = float(stationary(chain) @ observable_vector(chain, "pi"))
    assert est.replicas == 1
    assert est.batches >= 25
    assert est.stderr > 0.0
    assert est.z(truth) < 5.0


def test_estimate_is_deterministic_in_seed():
    penv = random_penv(3, n=2)
    a = estimate_Q(penv, 0.1, "pi", n=500, replicas=6, seed=42)
    b = estimate_Q(penv, 0.1, "pi", n=500, replicas=6, seed=42)
    c = estimate_Q(penv, 0.1, "pi", n=500, replicas=6, seed=43)
    assert a == b
    assert a.value != c.value
    row = a.to_row()
    assert row["estimate"] == a.value and row["seed"] == 42


def test_replica_streams_do_not_depend_on_replica_count():
    penv = random_penv(9, n=4)
    f = observable_vector(build_chain(penv, 0.2), "pi")
    small = _run_periodic_ensemble(penv, 0.2, 300, 5, seed=7, obs_vectors=(f,))
    big = _run_periodic_ensemble(penv, 0.2, 300, 10, seed=7, obs_vectors=(f,))
    assert np.array_equal(small.obs_sums, big.obs_sums[:, :5])
    assert np.array_equal(small.disp, big.disp[:5])


# ------------------------------------------------------------ velocity


def test_velocity_vanishes_without_bias():
    est = estimate_velocity(random_penv(2, n=2), 0.0, n=2000, replicas=30, seed=8)
    assert est.z(0.0) < 4.0


def test_velocity_matches_exact_value():
    penv = random_penv(5, n=2)
    truth = exact_velocity(penv, 0.3)
    est = estimate_velocity(penv, 0.3, n=3000, replicas=40, seed=9)
    assert est.z(truth) < 4.0


def test_continuous_velocity_and_clock_identity():
    penv = random_penv(5, n=2)
    lam = 0.3
    truth_ct = exact_velocity_ct(penv, lam)
    v_ct = estimate_velocity(penv, lam, n=3000, replicas=40, seed=10, clock="continuous")
    assert v_ct.z(truth_ct) < 4.0

    # Jump-count velocity over the mean hold recovers the real-time one.
    v_disc = estimate_velocity(penv, lam, n=3000, replicas=40, seed=11)
    q_hold = estimate_Q(penv, lam, "inv_pi", n=3000, replicas=40, seed=12)
    predicted = v_disc.value / q_hold.value
    spread = (
        v_ct.stderr
        + v_disc.stderr / q_hold.value
        + abs(predicted) * q_hold.stderr / q_hold.value
    )
    assert abs(v_ct.value - predicted) < 5.0 * spread


def test_velocity_stderr_scales_with_replicas():
    penv = random_penv(5, n=2)
    few = estimate_velocity(penv, 0.3, n=800, replicas=10, seed=13)
    many = estimate_velocity(penv, 0.3, n=800, replicas=40, seed=13)
    ratio = few.stderr / many.stderr
    assert 1.1 < ratio < 3.8


# ------------------------------------------------------------ diffusion


def test_diffusion_lattice_closed_form():
    truth = E * (E + 1.0) / (E - 1.0) ** 2
    est = estimate_diffusion(lattice(), n=4000, replicas=120, seed=14)
    assert est.z(truth) < 4.0


def test_diffusion_continuous_clock_rescaling():
    penv = random_penv(4, n=2)
    d_y, d_ct = diffusion_spectral(penv)
    est_y = estimate_diffusion(penv, n=3000, replicas=100, seed=15)
    est_ct = estimate_diffusion(penv, n=3000, replicas=100, seed=16, clock="continuous")
    assert est_y.z(d_y) < 4.0
    assert est_ct.z(d_ct) < 4.0


def test_diffusion_slope_stable_in_run_length():
    short = estimate_diffusion(lattice(), n=2000, replicas=60, seed=17)
    long = estimate_diffusion(lattice(), n=8000, replicas=60, seed=18)
    assert abs(short.value - long.value) < 4.0 * math.hypot(short.stderr, long.stderr)


# ------------------------------------------------------------ CLT pair


def test_clt_pair_matches_spectral_limits():
    penv = random_penv(7, n=4)
    chain = build_chain(penv, 0.0)
    q0 = reversible_law(chain)
    f = observable_vector(chain, "pi")
    rep = derivative_two_ways(penv, f - float(q0 @ f))
    out = estimate_clt(penv, "pi", n=6000, replicas=120, seed=19)
    assert out.var_f.z(rep.var_f) < 4.0
    assert out.var_phi.z(rep.var_phi) < 4.0
    assert out.cov.z(rep.covariance) < 4.0
    assert "exact centering" in out.note


def test_clt_covariance_sign_matches_response():
    # The response of the mean of f to a small bias has the opposite sign
    # of Cov(N^f, N^phi); check the measured covariance agrees with -sole.
    penv = random_penv(7, n=4)
    chain = build_chain(penv, 0.0)
    q0 = reversible_law(chain)
    f = observable_vector(chain, "pi")
    rep = derivative_two_ways(penv, f - float(q0 @ f))
    out = estimate_clt(penv, "pi", n=6000, replicas=120, seed=20)
    assert out.cov.z(-rep.sole) < 4.0


# ------------------------------------------------------------ Einstein (MC)


def test_einstein_mc_lattice():
    rep = einstein_mc(
        lattice(), lam_grid=(0.04, 0.08, 0.16), n=2500, replicas=50, seed=21
    )
    truth = E * (E + 1.0) / (E - 1.0) ** 2
    assert rep.z < 4.0
    assert abs(rep.intercept - truth) < 4.0 * rep.intercept_se
    assert 0.7 < rep.ratio < 1.3
    vs = [row[1] for row in rep.rows]
    assert vs == sorted(vs)
    d = rep.to_dict()
    assert len(d["rows"]) == 3 and d["z"] == rep.z


def test_einstein_mc_validates_grid():
    with pytest.raises(ConfigError):
        einstein_mc(lattice(), lam_grid=(0.3,), n=100, replicas=10)
    with pytest.raises(ConfigError):
        einstein_mc(lattice(), lam_grid=(), n=100, replicas=10)
    with pytest.raises(ConfigError):
        einstein_mc(lattice(), lam_grid=(-0.05, 0.1), n=100, replicas=10)


# ------------------------------------------------------------ intervals


def test_batch_means_recovers_iid_error():
    gen = np.random.default_rng(0)
    x = gen.standard_normal(3000)
    mean, se, b = batch_means(x)
    assert b == 30
    assert mean == pytest.approx(x.mean())
    assert se == pytest.approx(1.0 / math.sqrt(3000), rel=0.4)
    with pytest.raises(ConfigError):
        batch_means([1.0])


def test_ci_calibration_on_ar1():
    rep = ci_calibration(seed=0, n_trials=200)
    assert rep.n_trials == 200
    assert 0.90 <= rep.coverage <= 1.0
    d = rep.to_dict()
    assert d["coverage"] == rep.coverage


def test_estimate_ci_interval_helpers():
    est = EstimateCI(value=1.0, stderr=0.1, batches=30, replicas=30, seed=0)
    lo, hi = est.ci()
    assert lo < 1.0 < hi
    assert est.covers(1.05)
    assert not est.covers(2.0)
    assert est.z(1.2) == pytest.approx(2.0)


# ------------------------------------------------------------ validation


def test_rejects_unknown_env_spec():
    with pytest.raises(ConfigError):
        estimate_Q([1.0, 2.0], 0.0, "pi", n=100, replicas=4)


def test_rejects_bad_clock_and_small_ensembles():
    with pytest.raises(ConfigError):
        estimate_velocity(lattice(), 0.1, n=100, replicas=8, clock="sidereal")
    with pytest.raises(ConfigError):
        estimate_velocity(lattice(), 0.1, n=100, replicas=1)
    with pytest.raises(ConfigError):
        estimate_diffusion(lattice(), n=100, replicas=5)
    with pytest.raises(ConfigError):
        estimate_clt(lattice(), "pi", n=100, replicas=5)
