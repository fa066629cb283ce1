"""Resistor-network solves against series laws, hand values, and MC."""

import csv
import math

import numpy as np
import pytest

from motthop.env import USpec, make_periodic
from motthop.errors import ConfigError, NumericsError
from motthop.kernel import conductance
from motthop.network import (
    FiniteChain,
    check_dromedario,
    conductance_report,
    effective_conductance,
    expected_hitting_time,
    hitting_probability,
    hitting_probability_general,
    nn_series,
    reduce_chain,
)
from motthop.walk import sample_two_sided

E = math.e


def lattice():
    return make_periodic([1.0])


def mix_env(seed=0, n=3):
    gen = np.random.default_rng(seed)
    return make_periodic(
        gen.uniform(1.0, 2.5, n),
        gen.uniform(-1.0, 1.0, n),
        u=USpec.mott(0.8, energy_bound=1.0),
    )


def path_chain(c=1.0, n=3):
    cond = np.zeros((n, n))
    for i in range(n - 1):
        cond[i, i + 1] = cond[i + 1, i] = c
    return FiniteChain(cond=cond)


# ------------------------------------------------------------ conductances


def test_single_edge_is_its_conductance():
    env = mix_env(1)
    for lam in (0.0, 0.3):
        got = effective_conductance(env, lam, 1, [0], [1], (-1, 2))
        assert got == pytest.approx(conductance(env, lam, 0, 1), rel=1e-12)


def test_lattice_ray_hand_value():
    got = effective_conductance(lattice(), 0.0, 1, [0], ("ge", 4), (-1, 8))
    assert got == pytest.approx(math.exp(-1.0) / 4.0, rel=1e-10)


def test_series_resistance_law():
    env = mix_env(2)
    lam = 0.2
    inv = sum(1.0 / conductance(env, lam, j, j + 1) for j in range(5))
    got = effective_conductance(env, lam, 1, [0], [5], (-1, 6))
    assert got == pytest.approx(1.0 / inv, rel=1e-10)


def test_nn_series_lattice_and_composite_identity():
    assert nn_series(lattice(), 0.0, 1, 4) == pytest.approx(3.0 * E, rel=1e-12)
    assert nn_series(lattice(), 0.0, 3, 4) == pytest.approx(E, rel=1e-12)

    env, lam, rho, k = mix_env(3), 0.15, 5, 2
    win = (-3, rho + 4)
    left_k = effective_conductance(env, lam, 1, ("le", 0), [k], win)
    right_0 = effective_conductance(env, lam, 1, ("ge", rho), [0], win)
    both_k = effective_conductance(env, lam, 1, [("le", 0), ("ge", rho)], [k], win)
    composite = left_k / (right_0 * both_k)
    assert nn_series(env, lam, k, rho) == pytest.approx(composite, rel=1e-10)


def test_conductance_monotone_in_range():
    env = mix_env(4)
    win = (-5, 11)
    values = [effective_conductance(env, 0.2, rho, [0], [6], win) for rho in (1, 2, 4)]
    assert values[0] <= values[1] * (1 + 1e-12)
    assert values[1] <= values[2] * (1 + 1e-12)


def test_window_sensitivity_report():
    env = mix_env(5)
    rep = conductance_report(env, 0.2, 2, [0], [3], (-9, 12))
    assert len(rep.variants) == 2
    assert rep.sensitivity >= 0.0
    assert rep.value == pytest.approx(math.exp(rep.log_value))
    # both ends pinned by rays: nothing free, nothing to vary
    ray_rep = conductance_report(env, 0.2, 2, ("le", 0), ("ge", 4), (-4, 8))
    assert ray_rep.variants == ()
    assert ray_rep.sensitivity == 0.0


def test_set_and_window_validation():
    env = mix_env(6)
    with pytest.raises(ConfigError, match="margin"):
        effective_conductance(env, 0.0, 2, [0], [1], (-1, 3))
    with pytest.raises(ConfigError, match="ray"):
        effective_conductance(env, 0.0, 2, ("le", 0), [3], (-1, 6))
    with pytest.raises(ConfigError, match="disjoint"):
        effective_conductance(env, 0.0, 1, [0, 1], [1, 2], (-2, 4))


# ------------------------------------------------------------ reduced chain


def test_reduce_chain_lattice_boundary_lumps():
    chain = reduce_chain(lattice(), 0.0, 2)
    c = lambda i, j: conductance(lattice(), 0.0, i, j)
    assert chain.cond[1, 0] == pytest.approx(c(1, 0) + c(1, -1), rel=1e-14)
    assert chain.cond[1, 2] == pytest.approx(c(1, 2) + c(1, 3), rel=1e-14)
    assert chain.cond[0, 2] == 0.0
    flow = chain.pi[:, None] * chain.P
    assert np.max(np.abs(flow - flow.T)) < 1e-12 * np.max(flow)
    np.testing.assert_allclose(chain.P.sum(axis=1), 1.0, atol=1e-14)


def test_reduce_chain_requires_range_two():
    with pytest.raises(ConfigError):
        reduce_chain(lattice(), 0.0, 1)


def test_reduced_hitting_matches_full_walk_mc():
    env, lam, rho, k = mix_env(7), 0.3, 3, 1
    exact = hitting_probability(reduce_chain(env, lam, rho), k, 0, rho)
    n = 3000
    hits = sample_two_sided(env, lam, rho, start=k, lower=0, upper=rho, n_samples=n, seed=5)
    p_hat = float(np.mean(hits))
    se = math.sqrt(max(exact * (1 - exact), 1e-4) / n)
    assert abs(p_hat - exact) < 4.0 * se


def test_hitting_probability_boundaries_and_midpoint():
    chain = path_chain(c=0.7, n=5)
    assert hitting_probability(chain, 0, 0, 4) == 1.0
    assert hitting_probability(chain, 4, 0, 4) == 0.0
    assert hitting_probability(chain, 2, 0, 4) == pytest.approx(0.5, rel=1e-12)


def test_expected_hitting_time_hand_values():
    chain = path_chain(n=3)
    assert expected_hitting_time(chain, 0, [2]) == pytest.approx(4.0, rel=1e-12)
    assert expected_hitting_time(chain, 2, [2]) == 0.0
    two = path_chain(n=2)
    assert expected_hitting_time(two, 0, [1]) == pytest.approx(1.0, rel=1e-12)


def test_hitting_time_identity_on_random_chains():
    # the conductance-route check runs inside expected_hitting_time and
    # raises past 1e-9 relative; 50 random reduced chains must all pass
    gen = np.random.default_rng(12)
    for trial in range(50):
        n = int(gen.integers(3, 8))
        cond = np.zeros((n, n))
        for i in range(n - 1):
            cond[i, i + 1] = cond[i + 1, i] = gen.uniform(0.2, 3.0)
        extra = gen.integers(0, 2, size=(n, n))
        for i in range(n):
            for j in range(i + 2, n):
                if extra[i, j]:
                    cond[i, j] = cond[j, i] = gen.uniform(0.05, 1.0)
        chain = FiniteChain(cond=cond)
        start = int(gen.integers(0, n))
        target = int(gen.integers(0, n))
        if target == start:
            target = (target + 1) % n
        expected_hitting_time(chain, start, [target])


def test_escape_probability_equals_conductance_over_weight():
    chain = reduce_chain(mix_env(8), 0.2, 4)
    k, target = 2, [0, 4]
    escape = chain.effective_conductance([k], target) / chain.pi[k]
    # independent route: one step out of k, then hit the target before k
    first_step = 0.0
    for j in range(chain.n_states):
        if j == k or chain.P[k, j] == 0.0:
            continue
        first_step += chain.P[k, j] * hitting_probability_general(chain, j, target, [k])
    assert escape == pytest.approx(first_step, rel=1e-10)


def test_finite_chain_validation_and_monotonicity():
    with pytest.raises(ConfigError):
        FiniteChain(cond=np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ConfigError):
        FiniteChain(cond=np.array([[1.0, 1.0], [1.0, 0.0]]))
    base = reduce_chain(mix_env(9), 0.1, 3)
    bumped = base.cond.copy()
    bumped[1, 2] *= 2.0
    bumped[2, 1] *= 2.0
    c0 = base.effective_conductance([0], [3])
    c1 = FiniteChain(cond=bumped).effective_conductance([0], [3])
    assert c1 >= c0 - 1e-15


def test_disconnected_chain_raises():
    cond = np.zeros((4, 4))
    cond[0, 1] = cond[1, 0] = 1.0
    cond[2, 3] = cond[3, 2] = 1.0
    chain = FiniteChain(cond=cond)
    with pytest.raises(NumericsError):
        expected_hitting_time(chain, 0, [2])


def test_chain_csv_export(tmp_path):
    chain = reduce_chain(lattice(), 0.0, 2)
    path = tmp_path / "chain.csv"
    chain.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["i", "j", "c"]
    upper = {(i, j): chain.cond[i, j] for i in range(3) for j in range(i + 1, 3) if chain.cond[i, j] > 0}
    assert len(rows) - 1 == len(upper)
    for i, j, c in rows[1:]:
        assert float(c) == upper[(int(i), int(j))]


# ------------------------------------------------------------ lemma check


def test_dromedario_lattice_ratios_positive():
    report = check_dromedario(lattice(), 0.3, 3, n_samples=1500, seed=11)
    assert [row[0] for row in report.rows] == [1, 2]
    for _, lhs, two_sided, corr, rhs, ratio in report.rows:
        assert 0.0 < lhs <= 1.0
        assert 0.0 < two_sided < 1.0
        assert 0.0 < corr <= 1.0
        assert rhs > 0.0
        assert ratio > 0.0
    assert report.min_ratio > 0.05
    d = report.to_dict()
    assert d["min_ratio"] == report.min_ratio
    assert len(d["rows"]) == 2


def test_dromedario_roughly_bias_independent():
    minima = [
        check_dromedario(mix_env(10), lam, 3, n_samples=800, seed=13).min_ratio
        for lam in (0.1, 0.3, 0.5)
    ]
    assert all(m > 0.0 for m in minima)
    assert max(minima) / min(minima) < 3.0


def test_dromedario_validation():
    with pytest.raises(ConfigError):
        check_dromedario(lattice(), 0.3, 1)
    with pytest.raises(ConfigError):
        check_dromedario(lattice(), 0.0, 3)
