"""Instruction stack generation: purity, marginal law, counting helpers."""

import numpy as np
import pytest
from scipy import stats

from arwsim import _fast
from arwsim.stacks import (
    LEFT,
    RIGHT,
    SLEEP,
    FixtureStacks,
    Instruction,
    InstructionStacks,
    StackSearchError,
    derive_seed,
    instruction_at,
    law_thresholds,
    raw64,
)


def test_instruction_is_pure():
    a = [instruction_at(42, 7, i, 1.0) for i in range(-20, 21)]
    b = [instruction_at(42, 7, i, 1.0) for i in range(-20, 21)]
    assert a == b


def test_different_sites_and_seeds_decorrelate():
    # identical index sequences at different sites/seeds should not coincide
    n = 64
    base = [raw64(1, 0, i) for i in range(n)]
    assert base != [raw64(1, 1, i) for i in range(n)]
    assert base != [raw64(2, 0, i) for i in range(n)]


def test_raw64_range():
    for site in (-5, 0, 9):
        for idx in (-3, 0, 1, 1000):
            w = raw64(0, site, idx)
            assert 0 <= w < 2**64


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_marginal_law_chi_square(lam):
    # [DERIVED] P(S) = lam/(1+lam), P(L) = P(R) = 1/(2(1+lam)); chi-square GOF
    st = InstructionStacks(seed=2024, lam=lam)
    n = 10**6
    codes = st._codes_range(0, 1, n)
    counts = np.bincount(codes, minlength=3)
    p_sleep = lam / (1.0 + lam)
    p_jump = 1.0 / (2.0 * (1.0 + lam))
    expected = np.array([p_sleep, p_jump, p_jump]) * n
    chi2, pval = stats.chisquare(counts, expected)
    assert pval > 1e-4, (counts, expected, pval)


def test_left_right_symmetry():
    st = InstructionStacks(seed=5, lam=1.0)
    nl, nr = st.jump_counts(3, 10**6)
    # [DERIVED] binomial fluctuation bound: |NL - NR| < 5 sqrt(n/2)
    assert abs(nl - nr) < 5 * (10**6 / 2) ** 0.5


def test_jump_counts_matches_scalar_oracle():
    st = InstructionStacks(seed=9, lam=0.7)
    site = -4
    for u in (-37, -1, 0, 1, 2, 53):
        nl = nr = 0
        if u > 0:
            rng = range(1, u + 1)
        else:
            rng = range(u + 1, 1)
        sign = 1 if u > 0 else -1
        for j in rng:
            c = st.code_at(site, j)
            if c == LEFT:
                nl += sign
            elif c == RIGHT:
                nr += sign
        assert st.jump_counts(site, u) == (nl, nr)


def test_jump_counts_zero_and_monotone():
    st = InstructionStacks(seed=1, lam=1.5)
    assert st.jump_counts(0, 0) == (0, 0)
    prev = st.jump_counts(0, -30)
    for u in range(-29, 31):
        cur = st.jump_counts(0, u)
        assert cur[0] >= prev[0] and cur[1] >= prev[1]
        # exactly one count moves per index, by at most one
        assert (cur[0] - prev[0]) + (cur[1] - prev[1]) <= 1
        prev = cur


def test_jump_count_increment_identifies_instruction():
    st = InstructionStacks(seed=3, lam=1.0)
    for u in range(1, 40):
        dl = st.jump_counts(2, u)[0] - st.jump_counts(2, u - 1)[0]
        dr = st.jump_counts(2, u)[1] - st.jump_counts(2, u - 1)[1]
        c = st.code_at(2, u)
        assert dl == (1 if c == LEFT else 0)
        assert dr == (1 if c == RIGHT else 0)


def test_sleep_run_bounds():
    st = InstructionStacks(seed=6, lam=2.0)
    # find some sleep instruction and check its maximal run by rescanning
    idx = next(i for i in range(1, 500) if st.code_at(0, i) == SLEEP)
    lo, hi = st.sleep_run_bounds(0, idx)
    assert lo <= idx <= hi
    assert all(st.code_at(0, j) == SLEEP for j in range(lo, hi + 1))
    assert st.code_at(0, lo - 1) != SLEEP and st.code_at(0, hi + 1) != SLEEP
    with pytest.raises(ValueError):
        st.sleep_run_bounds(0, lo - 1)


def test_first_non_sleep_at_or_before():
    st = InstructionStacks(seed=6, lam=2.0)
    j = st.first_non_sleep_at_or_before(1, 100)
    assert j <= 100
    assert st.code_at(1, j) != SLEEP
    assert all(st.code_at(1, i) == SLEEP for i in range(j + 1, 101))
    sleep_idx = next(i for i in range(1, 500) if st.code_at(1, i) == SLEEP)
    with pytest.raises(StackSearchError):
        st.first_non_sleep_at_or_before(1, sleep_idx, cap=0)


def test_law_thresholds_encode_probabilities():
    for lam in (0.3, 1.0, 4.0):
        t_sleep, t_left = law_thresholds(lam)
        assert abs(t_sleep / 2.0**64 - lam / (1 + lam)) < 1e-12
        assert abs((t_left - t_sleep) / 2.0**64 - 1 / (2 * (1 + lam))) < 1e-12
    with pytest.raises(ValueError):
        law_thresholds(0.0)


def test_derive_seed_streams_differ():
    assert derive_seed(0, 1) != derive_seed(0, 2)
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)
    assert derive_seed(7, 1) == derive_seed(7, 1)


def test_hash_matches_kernel():
    for seed in (0, 123456789):
        for site in (-1000, -1, 0, 1, 999):
            for idx in (-7, -1, 0, 1, 2, 10**6):
                assert raw64(seed, site, idx) == int(
                    _fast.hash_word(np.uint64(seed), np.int64(site), np.int64(idx))
                )


def test_instruction_enum_roundtrip():
    assert Instruction.SLEEP == SLEEP
    assert Instruction.LEFT == LEFT
    assert Instruction.RIGHT == RIGHT


def test_fixture_prefix_and_fallback():
    fx = FixtureStacks({0: "SRL", 2: ["L", "L"]}, seed=4, lam=1.0)
    assert [fx.code_at(0, i) for i in (1, 2, 3)] == [SLEEP, RIGHT, LEFT]
    assert fx.code_at(2, 1) == LEFT and fx.code_at(2, 2) == LEFT
    # beyond the prefix and at other sites the hash stacks take over
    plain = InstructionStacks(seed=4, lam=1.0)
    assert fx.code_at(0, 4) == plain.code_at(0, 4)
    assert fx.code_at(1, 1) == plain.code_at(1, 1)
    assert fx.code_at(0, 0) == plain.code_at(0, 0)  # reverse side not covered


def test_fixture_jump_counts():
    fx = FixtureStacks({0: "LRLS"}, seed=0, lam=1.0)
    assert fx.jump_counts(0, 4) == (2, 1)
    assert fx.jump_counts(0, 0) == (0, 0)
    plain = InstructionStacks(seed=0, lam=1.0)
    assert fx.jump_counts(1, 17) == plain.jump_counts(1, 17)


def test_fixture_rejects_bad_letter():
    with pytest.raises(KeyError):
        FixtureStacks({0: "SX"})
