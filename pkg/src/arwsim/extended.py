"""Extended (signed) odometers on a window [0, n].

An extended odometer prescribes a value u0 at site 0 and a net particle flow
f0 from site 0 to site 1, and is stable (zero mass-balance residual) at the
interior sites 1..n-1.  Negative values mean instructions executed in
reverse, under the signed jump-count convention of stacks.jump_counts.

The class of all such odometers has a pointwise minimal element, built by a
forward recursion: each step picks the least value whose signed Left-count
matches the flow required by stability at the previous site.  Exhaustive
enumeration and a sleep-seeking greedy construction branch over the same
per-site admissible index intervals (the preimage of a fixed Left-count,
which is the integer interval between two consecutive Left instructions).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Configuration
from .stacks import (
    LEFT,
    SLEEP,
    InstructionStacks,
    StackSearchError,
    derive_seed,
    law_thresholds,
)

_CHAT_STREAM = 701
DEFAULT_SCAN_CAP = 1_000_000
DEFAULT_LOOKAHEAD = 64


@dataclass
class ExtendedOdometer:
    """Signed odometer on [0, n] with prescribed value at 0 and 0->1 flow."""

    n: int
    u0: int
    f0: int
    values: np.ndarray  # int64, sites 0..n
    n_left: np.ndarray  # signed Left-counts per site
    n_right: np.ndarray  # signed Right-counts per site
    sleeper: np.ndarray  # uint8; 1 where the final executed instruction is Sleep

    def value(self, site: int) -> int:
        if 0 <= site <= self.n:
            return int(self.values[site])
        return 0

    def right_count(self, site: int) -> int:
        return int(self.n_right[site])

    def left_count(self, site: int) -> int:
        return int(self.n_left[site])

    def sleep_total(self) -> int:
        return int(self.sleeper[1:].sum())

    def key(self) -> tuple:
        return tuple(int(v) for v in self.values)


@dataclass
class InfectionPath:
    """Image of a stable extended odometer: per site, the excess Right-count
    over the minimal odometer and the running count of sleepers placed."""

    steps: list

    def __post_init__(self):
        if self.steps and self.steps[0] != (0, 0):
            raise ValueError("infection path must start at (0, 0)")

    def key(self) -> tuple:
        return tuple(self.steps)


@dataclass
class EnumerationResult:
    odometers: list
    truncated: bool

    def __iter__(self):
        return iter(self.odometers)

    def __len__(self):
        return len(self.odometers)


def _sigma_at(sigma, site: int) -> int:
    if sigma is None:
        return 0
    return sigma.count_at(site)


def _scan_min_left(stacks, site, t, cap):
    """Smallest index u with signed Left-count t; returns (u, Right-count)."""
    lefts = 0
    rights = 0
    if t > 0:
        j = 0
        while lefts < t:
            j += 1
            if j > cap:
                raise StackSearchError(f"no index with Left-count {t} within {cap} at site {site}")
            c = stacks.code_at(site, j)
            if c == LEFT:
                lefts += 1
            elif c != SLEEP:
                rights += 1
        return j, rights
    j = 1
    while lefts < 1 - t:
        j -= 1
        if j < -cap:
            raise StackSearchError(f"no index with Left-count {t} within {cap} at site {site}")
        c = stacks.code_at(site, j)
        if c == LEFT:
            lefts += 1
        elif c != SLEEP:
            rights += 1
    return j, -rights


def _admissible(stacks, site, t, scan_cap):
    """Yield (index, Right-count, sleep indicator) over the interval of
    indices whose signed Left-count equals t, in increasing order."""
    u, r = _scan_min_left(stacks, site, t, scan_cap)
    code = stacks.code_at(site, u)
    yield u, r, 1 if (u != 0 and code == SLEEP) else 0
    steps = 0
    while True:
        u += 1
        steps += 1
        if steps > scan_cap:
            raise StackSearchError(f"unterminated Left gap at site {site}")
        c = stacks.code_at(site, u)
        if c == LEFT:
            return
        if c != SLEEP:
            r += 1
            yield u, r, 0
        else:
            yield u, r, 1 if u != 0 else 0


class _Builder:
    """Shared forward-propagation state for the odometer constructions."""

    def __init__(self, sigma, u0, f0, n, stacks, scan_cap):
        if n < 1:
            raise ValueError("window length must be at least 1")
        self.sigma = sigma
        self.n = n
        self.u0 = u0
        self.f0 = f0
        self.stacks = stacks
        self.scan_cap = scan_cap
        self.values = np.zeros(n + 1, dtype=np.int64)
        self.n_left = np.zeros(n + 1, dtype=np.int64)
        self.n_right = np.zeros(n + 1, dtype=np.int64)
        self.sleeper = np.zeros(n + 1, dtype=np.uint8)
        self.values[0] = u0
        nl0, nr0 = stacks.jump_counts(0, u0)
        self.n_left[0] = nl0
        self.n_right[0] = nr0
        self.sleeper[0] = 1 if (u0 != 0 and stacks.code_at(0, u0) == SLEEP) else 0

    def target(self, k: int) -> int:
        """Required signed Left-count at site k given sites < k."""
        if k == 1:
            return int(self.n_right[0]) - self.f0
        # stability at k-1: sigma + NR(k-2) + NL(k) - NL(k-1) - NR(k-1) = sleeper(k-1)
        return (
            int(self.sleeper[k - 1])
            - _sigma_at(self.sigma, k - 1)
            - int(self.n_right[k - 2])
            + int(self.n_left[k - 1])
            + int(self.n_right[k - 1])
        )

    def set_site(self, k, u, r, ind, t):
        self.values[k] = u
        self.n_left[k] = t
        self.n_right[k] = r
        self.sleeper[k] = ind

    def finish(self) -> ExtendedOdometer:
        return ExtendedOdometer(
            n=self.n,
            u0=self.u0,
            f0=self.f0,
            values=self.values.copy(),
            n_left=self.n_left.copy(),
            n_right=self.n_right.copy(),
            sleeper=self.sleeper.copy(),
        )


def minimal_odometer(
    sigma, u0: int, f0: int, n: int, stacks: InstructionStacks, scan_cap: int = DEFAULT_SCAN_CAP
) -> ExtendedOdometer:
    """Pointwise least extended odometer with the given boundary data."""
    b = _Builder(sigma, u0, f0, n, stacks, scan_cap)
    for k in range(1, n + 1):
        t = b.target(k)
        u, r = _scan_min_left(stacks, k, t, scan_cap)
        ind = 1 if (u != 0 and stacks.code_at(k, u) == SLEEP) else 0
        b.set_site(k, u, r, ind, t)
    return b.finish()


def greedy_stable_odometer(
    sigma,
    u0: int,
    f0: int,
    n: int,
    stacks: InstructionStacks,
    lookahead: int = DEFAULT_LOOKAHEAD,
    scan_cap: int = DEFAULT_SCAN_CAP,
) -> ExtendedOdometer:
    """Stable extended odometer that leaves a sleeper wherever an admissible
    choice within the lookahead budget allows it (smallest-value tie-break)."""
    b = _Builder(sigma, u0, f0, n, stacks, scan_cap)
    for k in range(1, n + 1):
        t = b.target(k)
        choice = None
        for i, (u, r, ind) in enumerate(_admissible(stacks, k, t, scan_cap)):
            if choice is None:
                choice = (u, r, ind)
            if ind:
                choice = (u, r, ind)
                break
            if i >= lookahead:
                break
        b.set_site(k, *choice, t)
    return b.finish()


def enumerate_stable_extended(
    sigma,
    u0: int,
    f0: int,
    n: int,
    value_cap: int,
    stacks: InstructionStacks,
    scan_cap: int = DEFAULT_SCAN_CAP,
    max_members: int = 200_000,
) -> EnumerationResult:
    """All stable extended odometers whose values stay within value_cap of the
    minimal odometer, by forward constraint propagation.

    The result carries a truncation flag when the cap (or the member budget)
    cut any branch, in which case the enumeration is incomplete."""
    minimal = minimal_odometer(sigma, u0, f0, n, stacks, scan_cap)
    b = _Builder(sigma, u0, f0, n, stacks, scan_cap)
    members: list[ExtendedOdometer] = []
    truncated = [False]

    def recurse(k: int):
        if k > n:
            members.append(b.finish())
            if len(members) > max_members:
                raise _Exhausted
            return
        t = b.target(k)
        bound = int(minimal.values[k]) + value_cap
        for u, r, ind in _admissible(stacks, k, t, scan_cap):
            if u > bound:
                truncated[0] = True
                return
            b.set_site(k, u, r, ind, t)
            recurse(k + 1)

    class _Exhausted(Exception):
        pass

    try:
        recurse(1)
    except _Exhausted:
        truncated[0] = True
    return EnumerationResult(odometers=members, truncated=truncated[0])


def to_infection_path(u: ExtendedOdometer, m: ExtendedOdometer, stacks) -> InfectionPath:
    """Map a stable extended odometer to its (excess-Right, sleepers) path
    relative to the minimal odometer of the same boundary data."""
    if u.n != m.n or u.u0 != m.u0 or u.f0 != m.f0:
        raise ValueError("odometer windows or boundary data do not match")
    steps = []
    s = 0
    for j in range(u.n + 1):
        if j >= 1:
            s += int(u.sleeper[j])
        steps.append((int(u.n_right[j] - m.n_right[j]), s))
    return InfectionPath(steps=steps)


@dataclass
class ChatEstimate:
    """Growth-rate estimate for the maximal sleeper density (per-site rate at
    which the greedy construction places sleepers)."""

    lam: float
    n: int
    replicas: int
    u0: int
    f0: int
    estimate: float
    stderr: float
    ci_low: float
    ci_high: float
    per_replica: np.ndarray = field(repr=False)


def estimate_chat(
    lam: float,
    n: int,
    replicas: int,
    seed: int,
    u0: int = 0,
    f0: int = 0,
    lookahead: int = DEFAULT_LOOKAHEAD,
) -> ChatEstimate:
    """Monte Carlo estimate of the limiting sleeper density via the greedy
    construction on independent instruction stacks (empty initial state)."""
    if n < 100:
        raise ValueError("length must be at least 100 for a stable estimate")
    from . import _fast

    t_sleep, t_left = law_thresholds(lam)
    rates = np.empty(replicas, dtype=np.float64)
    for rep in range(replicas):
        rseed = derive_seed(seed, _CHAT_STREAM, rep)
        values, sleeper, ok = _fast.greedy_trace(
            np.uint64(rseed),
            np.uint64(t_sleep),
            np.uint64(t_left),
            n,
            u0,
            f0,
            lookahead,
            DEFAULT_SCAN_CAP,
        )
        if not ok:
            raise StackSearchError(f"greedy scan cap exceeded in replica {rep}")
        rates[rep] = sleeper[1:].sum() / n
    est = float(rates.mean())
    se = float(rates.std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else float("nan")
    return ChatEstimate(
        lam=lam,
        n=n,
        replicas=replicas,
        u0=u0,
        f0=f0,
        estimate=est,
        stderr=se,
        ci_low=est - 1.96 * se,
        ci_high=est + 1.96 * se,
        per_replica=rates,
    )
