"""Configurations, legal topplings, stabilization, mass balance, least action."""

import itertools

import numpy as np
import pytest

from arwsim.core import (
    POLICIES,
    Configuration,
    NonfixationSuspected,
    Odometer,
    legal_topple,
    is_stable_on,
    mass_balance_residual,
    sample_bernoulli_config,
    sample_uniform_k_particle_config,
    stabilize,
)
from arwsim.stacks import SLEEP, FixtureStacks, InstructionStacks, derive_seed, raw64


def test_bernoulli_sampling_oracle():
    # [DERIVED] each draw is raw64(derive_seed(seed, 101), site, 1) < rho 2^64
    rho, seed = 0.37, 99
    cfg = sample_bernoulli_config(rho, (-8, 8), seed)
    cseed = derive_seed(seed, 101)
    thr = int(rho * 2.0**64)
    for v in range(-8, 9):
        assert cfg.count_at(v) == (1 if raw64(cseed, v, 1) < thr else 0)
    assert not cfg.asleep.any()


def test_bernoulli_density_empirical():
    cfg = sample_bernoulli_config(0.3, (0, 99999), 3)
    assert abs(cfg.total() / 100000 - 0.3) < 0.01


def test_bernoulli_extremes_and_validation():
    assert sample_bernoulli_config(0.0, (0, 50), 1).total() == 0
    assert sample_bernoulli_config(1.0, (0, 50), 1).total() == 51
    with pytest.raises(ValueError):
        sample_bernoulli_config(1.5, (0, 1), 0)


def test_uniform_k_sampling():
    cfg = sample_uniform_k_particle_config(37, (-5, 5), 11)
    assert cfg.total() == 37
    assert sample_uniform_k_particle_config(0, (0, 3), 0).total() == 0
    with pytest.raises(ValueError):
        sample_uniform_k_particle_config(-1, (0, 3), 0)


def test_configuration_helpers():
    cfg = Configuration.from_counts(2, [1, 0, 3])
    assert (cfg.a, cfg.b) == (2, 4)
    assert cfg.count_at(4) == 3 and cfg.count_at(99) == 0
    ext = cfg.extended(0, 6)
    assert ext.count_at(2) == 1 and ext.total() == cfg.total()
    cfg.validate()
    cfg.asleep[2] = True  # 3 particles can't share one sleeper
    with pytest.raises(ValueError):
        cfg.validate()


def test_legal_topple_hand_example():
    fx = FixtureStacks({0: "R", 1: "SRS"})
    cfg = Configuration.from_counts(0, [1, 1, 0])
    odom = Odometer.zeros(0, 2)
    legal_topple(cfg, odom, fx, 0)  # R: move right and merge
    assert list(cfg.count) == [0, 2, 0]
    assert odom.value(0) == 1
    legal_topple(cfg, odom, fx, 1)  # S with two particles: consumed, no effect
    assert list(cfg.count) == [0, 2, 0] and not cfg.asleep.any()
    legal_topple(cfg, odom, fx, 1)  # R: one particle moves on
    assert list(cfg.count) == [0, 1, 1]
    legal_topple(cfg, odom, fx, 1)  # S alone: falls asleep
    assert cfg.is_asleep(1) and odom.value(1) == 3


def test_topple_illegal_raises():
    fx = FixtureStacks({0: "R"})
    cfg = Configuration.from_counts(0, [0, 1])
    odom = Odometer.zeros(0, 1)
    with pytest.raises(ValueError):
        legal_topple(cfg, odom, fx, 0)
    cfg2 = Configuration.from_counts(0, [1])
    cfg2.asleep[0] = True
    with pytest.raises(ValueError):
        legal_topple(cfg2, Odometer.zeros(0, 0), fx, 0)


def test_stabilize_worked_example():
    # two particles on {0, 1}; stacks hand-picked so the result is computable:
    # odometer (1, 3, 1), both particles asleep on {1, 2}
    fx = FixtureStacks({0: "RL", 1: "SRSL", 2: "SL"})
    cfg = Configuration.from_counts(0, [1, 1, 0])
    res = stabilize(cfg, (0, 2), fx, force_python=True)
    assert [res.odometer.value(v) for v in (0, 1, 2)] == [1, 3, 1]
    assert res.final.count_at(1) == 1 and res.final.is_asleep(1)
    assert res.final.count_at(2) == 1 and res.final.is_asleep(2)
    assert res.topple_count == 5
    assert res.exited_left == res.exited_right == 0


def test_stabilize_exit_counts_and_conservation():
    fx = FixtureStacks({0: "L", 1: "RR", 2: "R"})
    cfg = Configuration.from_counts(0, [1, 2, 1])
    res = stabilize(cfg, (0, 2), fx, force_python=True)
    assert res.exited_left + res.exited_right + sum(
        res.final.count_at(v) for v in range(0, 3)
    ) == 4
    assert res.exited_left == 1  # the site-0 particle left through L


@pytest.mark.parametrize("policy", POLICIES)
def test_abelian_small(policy):
    st = InstructionStacks(seed=21, lam=1.0)
    cfg = sample_bernoulli_config(0.5, (-12, 12), 21)
    ref = stabilize(cfg.copy(), (-11, 11), st, policy="rightmost", force_python=True)
    res = stabilize(cfg.copy(), (-11, 11), st, policy=policy, force_python=True)
    assert np.array_equal(res.odometer.values, ref.odometer.values)
    assert np.array_equal(res.final.count, ref.final.count)
    assert np.array_equal(res.final.asleep, ref.final.asleep)


@pytest.mark.parametrize("policy", POLICIES)
def test_kernel_matches_python(policy):
    st = InstructionStacks(seed=77, lam=0.5)
    cfg = sample_bernoulli_config(0.4, (-30, 30), 77)
    py = stabilize(cfg.copy(), (-29, 29), st, policy=policy, force_python=True)
    nb = stabilize(cfg.copy(), (-29, 29), st, policy=policy)
    assert np.array_equal(py.odometer.values, nb.odometer.values)
    assert np.array_equal(py.final.count, nb.final.count)
    assert np.array_equal(py.final.asleep, nb.final.asleep)
    assert py.topple_count == nb.topple_count


def test_mass_balance_zero_after_stabilization():
    st = InstructionStacks(seed=8, lam=2.0)
    sigma = sample_bernoulli_config(0.5, (-15, 15), 8)
    res = stabilize(sigma.copy(), (-14, 14), st)
    assert is_stable_on(res.odometer, sigma, st, (-14, 14))
    # perturbing the odometer breaks the balance somewhere
    bad = Odometer(res.odometer.a, res.odometer.b, res.odometer.values.copy())
    bad.values[15] += 1
    assert not is_stable_on(bad, sigma, st, (-14, 14))


def test_mass_balance_residual_counts_particles():
    # for the stabilizing odometer, residual 0 encodes "0 particles, or one
    # sleeper whose last instruction was Sleep"
    st = InstructionStacks(seed=13, lam=1.0)
    sigma = sample_bernoulli_config(0.4, (-10, 10), 13)
    res = stabilize(sigma.copy(), (-9, 9), st)
    for v in range(-9, 10):
        assert mass_balance_residual(res.odometer, sigma, st, v) == 0
        u = res.odometer.value(v)
        if res.final.is_asleep(v):
            assert u > 0 and st.code_at(v, u) == SLEEP


def _all_stable_odometers(sigma, st, va, vb, cap):
    """Brute-force oracle: all nonnegative odometers on [va, vb] (zero
    outside) with zero residual at every site of [va, vb]."""
    sites = list(range(va, vb + 1))
    out = []
    for values in itertools.product(range(cap + 1), repeat=len(sites)):
        odom = Odometer(va, vb, np.array(values, dtype=np.int64))
        if all(mass_balance_residual(odom, sigma, st, v) == 0 for v in sites):
            out.append(np.array(values, dtype=np.int64))
    return out


def test_least_action_brute_force():
    # the stabilizing odometer is pointwise minimal among all stable ones
    found_alternative = False
    for seed in range(12):
        st = InstructionStacks(seed=seed, lam=1.0)
        sigma = sample_bernoulli_config(0.5, (-2, 2), seed)
        res = stabilize(sigma.copy(), (-2, 2), st, force_python=True)
        m = res.odometer.values
        if m.max() > 6:
            continue
        stable = _all_stable_odometers(sigma, st, -2, 2, int(m.max()) + 3)
        assert any(np.array_equal(g, m) for g in stable)
        for g in stable:
            assert np.all(m <= g)
            if not np.array_equal(g, m):
                found_alternative = True
    assert found_alternative  # the check must not be vacuous


def test_cap_overflow_raises_with_partial_state():
    st = InstructionStacks(seed=4, lam=0.5)
    cfg = sample_bernoulli_config(0.9, (-40, 40), 4)
    with pytest.raises(NonfixationSuspected) as ei:
        stabilize(cfg.copy(), (-39, 39), st, cap=10)
    odom, partial_cfg, topples = ei.value.partial
    assert topples >= 10
    assert partial_cfg.total() == cfg.total()
    with pytest.raises(NonfixationSuspected):
        stabilize(cfg.copy(), (-39, 39), st, cap=10, force_python=True)


def test_stable_set_must_fit_window():
    st = InstructionStacks(seed=0, lam=1.0)
    cfg = Configuration.from_counts(0, [1])
    with pytest.raises(ValueError):
        stabilize(cfg, (-2, 0), st)
    with pytest.raises(ValueError):
        stabilize(cfg, (0, 0), st, policy="bogus")
    with pytest.raises(ValueError):
        stabilize(cfg, (0, 0), st, cap=0)


def test_stabilize_empty_configuration():
    st = InstructionStacks(seed=0, lam=1.0)
    cfg = Configuration.empty(-3, 3)
    res = stabilize(cfg, (-2, 2), st)
    assert res.topple_count == 0
    assert res.odometer.total() == 0


def test_sleepers_wake_on_arrival():
    # a sleeping particle hit by a mover becomes active again
    fx = FixtureStacks({0: "S", 1: "LS"})
    cfg = Configuration.from_counts(0, [1, 1])
    res = stabilize(cfg, (0, 1), fx, force_python=True)
    # site 0 sleeps first; site 1 sends its particle left, waking it; the
    # pair then resolves under the hash continuation -- just check invariants
    assert res.final.total() == 2
    for v in (0, 1):
        assert res.final.active_count(v) == 0
