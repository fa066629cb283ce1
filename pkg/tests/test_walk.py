"""Sampling engines: determinism, clock coupling, hitting statistics."""

import math

import numpy as np
import pytest

from motthop.env import GapLaw, GeneratorSpec, USpec, make_periodic, sample_environment
from motthop.env import EnergyLaw, LazyEnvironment
from motthop.errors import BudgetError, ConfigError, NumericsError
from motthop.oracle import exact_velocity
from motthop.walk import (
    LawCache,
    read_trajectory_log,
    run_continuous,
    run_discrete,
    run_truncated,
    sample_T,
    sample_two_sided,
)

E = math.e


def lattice():
    return make_periodic([1.0])


def mix_env():
    return make_periodic([1.0, 2.0], [0.4, -0.6], u=USpec.mott(1.0, energy_bound=1.0))


def test_same_seed_reproduces_and_seeds_differ():
    a = run_discrete(lattice(), 0.3, 400, seed=7)
    b = run_discrete(lattice(), 0.3, 400, seed=7)
    c = run_discrete(lattice(), 0.3, 400, seed=8)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.positions, b.positions)
    assert not np.array_equal(a.indices, c.indices)


def test_continuous_embeds_the_discrete_chain_bitwise():
    d = run_discrete(mix_env(), 0.3, 600, seed=11)
    c = run_continuous(mix_env(), 0.3, 600, seed=11)
    np.testing.assert_array_equal(d.indices, c.indices)
    assert d.times is None
    assert np.all(np.diff(c.times) > 0.0)
    assert c.times[0] == 0.0


def test_positions_follow_the_geometry():
    env = mix_env()
    traj = run_discrete(env, 0.4, 300, seed=3)
    for t in (0, 57, 300):
        assert traj.positions[t] == pytest.approx(env.position(int(traj.indices[t])), abs=1e-9)
    assert traj.displacement == pytest.approx(
        env.position(int(traj.indices[-1])), abs=1e-9
    )


def test_drift_matches_exact_velocity():
    lam, n = 0.5, 6000
    traj = run_discrete(lattice(), lam, n, seed=21)
    incr = np.diff(traj.positions)
    v_hat = float(np.mean(incr))
    se = float(np.std(incr, ddof=1)) / math.sqrt(n)
    assert abs(v_hat - exact_velocity(lattice(), lam)) < 5.0 * se


def test_no_bias_walk_stays_put_on_average():
    traj = run_discrete(lattice(), 0.0, 2000, seed=5)
    # per-step displacement variance is about 3.42 on the unit lattice
    assert abs(traj.displacement) < 4.0 * math.sqrt(2000 * 3.43)


def test_truncated_self_loop_rate_on_lattice():
    # keep only nearest neighbours: the loop mass is exactly 1/e
    n = 4000
    traj = run_truncated(lattice(), 0.0, 1, n, seed=13)
    moves = np.diff(traj.indices)
    assert set(np.unique(moves)) <= {-1, 0, 1}
    stay_frac = float(np.mean(moves == 0))
    se = math.sqrt((1 / E) * (1 - 1 / E) / n)
    assert abs(stay_frac - 1 / E) < 4.0 * se


def test_truncated_without_range_is_the_plain_engine():
    a = run_truncated(mix_env(), 0.3, None, 500, seed=17)
    b = run_discrete(mix_env(), 0.3, 500, seed=17)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.positions, b.positions)


def test_law_cache_folds_periodic_orbits():
    cache = LawCache(mix_env(), 0.3)
    for i in (-7, -1, 0, 1, 2, 9, 100):
        cache.at(i)
    assert len(cache._laws) <= 2


def test_binary_log_round_trip(tmp_path):
    path = tmp_path / "traj.bin"
    traj = run_continuous(mix_env(), 0.2, 50, seed=9, log_path=path)
    rec = read_trajectory_log(path)
    assert len(rec) == 51
    np.testing.assert_array_equal(rec["step"], np.arange(51))
    np.testing.assert_array_equal(rec["index"], traj.indices)
    np.testing.assert_array_equal(rec["time"], traj.times)
    assert path.stat().st_size == 51 * 24


def test_discrete_log_uses_step_clock(tmp_path):
    path = tmp_path / "traj.bin"
    run_discrete(lattice(), 0.0, 20, seed=1, log_path=path)
    rec = read_trajectory_log(path)
    np.testing.assert_array_equal(rec["time"], np.arange(21, dtype=float))


def test_occupation_counts():
    traj = run_discrete(mix_env(), 0.3, 400, seed=19)
    occ = traj.occupation(2)
    assert occ.sum() == 401
    np.testing.assert_array_equal(occ, np.bincount(traj.indices % 2, minlength=2))


def test_hitting_sample_basics():
    hs = sample_T(lattice(), 0.4, 3, level=20, n_samples=100, seed=23)
    assert np.all(hs.steps >= 1)
    assert np.all(hs.overshoot >= 0)
    assert np.all(hs.overshoot < 3)  # a range-3 move cannot overshoot by 3
    assert 0.0 < hs.landing_exact_fraction <= 1.0
    assert hs.mean_steps > 20 / 3


def test_hitting_budget_raises():
    with pytest.raises(BudgetError):
        sample_T(lattice(), 0.1, 1, level=500, n_samples=5, seed=29, budget=50)
    with pytest.raises(ConfigError):
        sample_T(lattice(), 0.1, 1, level=0, n_samples=5, seed=29)


def test_geometric_compression_matches_explicit_walk():
    # same law, two samplers: compressed holds vs literal self-loop steps
    lam, rho, level = 0.4, 2, 15
    hs = sample_T(lattice(), lam, rho, level=level, n_samples=400, seed=31)

    explicit = []
    for s in range(400):
        traj = run_truncated(lattice(), lam, rho, 600, seed=10_000 + s)
        hit = np.nonzero(traj.indices >= level)[0]
        assert len(hit) > 0
        explicit.append(hit[0])
    explicit = np.asarray(explicit, dtype=float)

    se = math.sqrt(np.var(hs.steps, ddof=1) / 400 + np.var(explicit, ddof=1) / 400)
    assert abs(hs.mean_steps - explicit.mean()) < 4.0 * se


def test_two_sided_hitting_is_gamblers_ruin():
    # nearest-neighbour conditional walk on the lattice at lam=0 is the
    # symmetric simple walk: P_k(hit 0 before m) = (m - k) / m
    n = 2000
    hit = sample_two_sided(lattice(), 0.0, 1, start=2, lower=0, upper=4, n_samples=n, seed=37)
    p_hat = float(np.mean(hit))
    se = math.sqrt(0.5 * 0.5 / n)
    assert abs(p_hat - 0.5) < 4.0 * se


def test_two_sided_validates_interval():
    with pytest.raises(ConfigError):
        sample_two_sided(lattice(), 0.0, 1, start=5, lower=0, upper=4, n_samples=1, seed=1)


def test_windowed_environment_walk_raises_when_exhausted():
    spec = GeneratorSpec(
        gap_law=GapLaw.constant(1.0),
        energy_law=EnergyLaw(kind="zero"),
        window=220,
        seed=99,
    )
    env = sample_environment(spec)
    with pytest.raises(NumericsError):
        run_discrete(env, 0.5, 4000, seed=41)


def test_lazy_environment_walk_grows_transparently():
    spec = GeneratorSpec(
        gap_law=GapLaw.exponential(d=0.5, rate=2.0),
        energy_law=EnergyLaw(kind="uniform", amplitude=1.0),
        window=64,
        seed=7,
    )
    env = LazyEnvironment(spec)
    traj = run_discrete(env, 0.5, 3000, seed=43)
    assert traj.indices[-1] > 500
    assert traj.positions[-1] == pytest.approx(
        env.position(int(traj.indices[-1])), abs=1e-8
    )
