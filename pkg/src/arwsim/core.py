"""Configurations, legal topplings, and stabilization of finite windows.

A configuration holds per-site particle counts and sleep flags on an integer
window.  Stabilization repeatedly performs legal topplings at sites of a
stable set V under a pluggable scheduling policy; by the abelian property the
resulting odometer and final configuration do not depend on the policy.
Particles landing outside V are frozen in place and never topple again.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

import numpy as np

from .stacks import (
    LEFT,
    RIGHT,
    SLEEP,
    InstructionStacks,
    derive_seed,
    law_thresholds,
    raw64,
)

_CFG_STREAM = 101
_KCFG_STREAM = 102
_POLICY_STREAM = 103

POLICIES = ("rightmost", "sweep", "random", "queue")


class NonfixationSuspected(RuntimeError):
    """Raised when a stabilization exceeds its toppling cap.

    Carries the partial state in the ``partial`` attribute."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class Configuration:
    """Particle counts and sleep flags on the window [a, b]."""

    a: int
    b: int
    count: np.ndarray
    asleep: np.ndarray

    @classmethod
    def empty(cls, a: int, b: int) -> "Configuration":
        width = b - a + 1
        return cls(a, b, np.zeros(width, dtype=np.int64), np.zeros(width, dtype=bool))

    @classmethod
    def from_counts(cls, a: int, counts) -> "Configuration":
        arr = np.asarray(counts, dtype=np.int64)
        return cls(a, a + len(arr) - 1, arr, np.zeros(len(arr), dtype=bool))

    def count_at(self, site: int) -> int:
        if self.a <= site <= self.b:
            return int(self.count[site - self.a])
        return 0

    def is_asleep(self, site: int) -> bool:
        return self.a <= site <= self.b and bool(self.asleep[site - self.a])

    def active_count(self, site: int) -> int:
        if self.is_asleep(site):
            return 0
        return self.count_at(site)

    def total(self) -> int:
        return int(self.count.sum())

    def copy(self) -> "Configuration":
        return Configuration(self.a, self.b, self.count.copy(), self.asleep.copy())

    def extended(self, a: int, b: int) -> "Configuration":
        """Copy with the window enlarged to contain [a, b]."""
        na, nb = min(a, self.a), max(b, self.b)
        out = Configuration.empty(na, nb)
        out.count[self.a - na : self.b - na + 1] = self.count
        out.asleep[self.a - na : self.b - na + 1] = self.asleep
        return out

    def validate(self):
        if np.any(self.count < 0):
            raise ValueError("negative particle count")
        if np.any(self.asleep & (self.count != 1)):
            raise ValueError("a sleeping particle must be alone at its site")


@dataclass
class Odometer:
    """Per-site count of executed instructions on a window; zero elsewhere."""

    a: int
    b: int
    values: np.ndarray

    @classmethod
    def zeros(cls, a: int, b: int) -> "Odometer":
        return cls(a, b, np.zeros(b - a + 1, dtype=np.int64))

    def value(self, site: int) -> int:
        if self.a <= site <= self.b:
            return int(self.values[site - self.a])
        return 0

    def total(self) -> int:
        return int(self.values.sum())


@dataclass
class StabilizationResult:
    odometer: Odometer
    final: Configuration
    topple_count: int
    exited_left: int
    exited_right: int


def _bern_threshold(rho: float) -> int:
    return min(int(rho * 2.0**64), (1 << 64) - 1)


def sample_bernoulli_config(rho: float, window: tuple[int, int], seed: int) -> Configuration:
    """Each site of the window independently holds one active particle with
    probability rho."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {rho}")
    a, b = window
    cfg = Configuration.empty(a, b)
    cseed = derive_seed(seed, _CFG_STREAM)
    thr = _bern_threshold(rho)
    for v in range(a, b + 1):
        if raw64(cseed, v, 1) < thr:
            cfg.count[v - a] = 1
    return cfg


def sample_uniform_k_particle_config(k: int, window: tuple[int, int], seed: int) -> Configuration:
    """Exactly k active particles assigned to window sites uniformly and
    independently (multinomial occupation; sites may hold several)."""
    if k < 0:
        raise ValueError("particle count must be nonnegative")
    a, b = window
    width = b - a + 1
    cfg = Configuration.empty(a, b)
    cseed = derive_seed(seed, _KCFG_STREAM)
    for i in range(k):
        cfg.count[raw64(cseed, i, 1) % width] += 1
    return cfg


def legal_topple(config: Configuration, odometer: Odometer, stacks: InstructionStacks, site: int):
    """Execute the next instruction at a site holding an active particle.

    Mutates config and odometer in place and returns them."""
    if config.active_count(site) < 1:
        raise ValueError(f"site {site} has no active particle; toppling is illegal")
    index = odometer.value(site) + 1
    if not odometer.a <= site <= odometer.b:
        raise ValueError(f"site {site} outside odometer window")
    code = stacks.code_at(site, index)
    odometer.values[site - odometer.a] += 1
    i = site - config.a
    if code == SLEEP:
        # carried out only when the particle is alone; otherwise the
        # instruction is consumed with no configuration change
        if config.count[i] == 1:
            config.asleep[i] = True
        return config, odometer
    dest = site - 1 if code == LEFT else site + 1
    config.count[i] -= 1
    if config.a <= dest <= config.b:
        j = dest - config.a
        if config.asleep[j]:
            config.asleep[j] = False  # woken up
        config.count[j] += 1
    else:
        raise ValueError(f"destination {dest} outside configuration window")
    return config, odometer


def _stabilize_python(config, va, vb, stacks, policy, cap, policy_seed):
    odom = Odometer.zeros(va, vb)
    topples = 0

    def active(v):
        return config.active_count(v) > 0

    def topple(v):
        nonlocal topples
        legal_topple(config, odom, stacks, v)
        topples += 1
        if topples > cap:
            raise NonfixationSuspected(
                f"toppling cap {cap} exceeded", partial=(odom, config, topples)
            )

    if policy == "rightmost":
        p = vb
        while p >= va:
            if not active(p):
                p -= 1
                continue
            topple(p)
            if p < vb and active(p + 1):
                p += 1
    elif policy == "sweep":
        moved = True
        while moved:
            moved = False
            for v in range(va, vb + 1):
                while active(v):
                    topple(v)
                    moved = True
    elif policy == "random":
        rng = random.Random(policy_seed)
        sites = [v for v in range(va, vb + 1) if active(v)]
        while sites:
            idx = rng.randrange(len(sites))
            v = sites[idx]
            if not active(v):
                sites[idx] = sites[-1]
                sites.pop()
                continue
            topple(v)
            for w in (v - 1, v + 1):
                if va <= w <= vb and active(w) and w not in sites:
                    sites.append(w)
    elif policy == "queue":
        queued = set()
        fifo = deque()
        for v in range(va, vb + 1):
            if active(v):
                fifo.append(v)
                queued.add(v)
        while fifo:
            v = fifo.popleft()
            queued.discard(v)
            if not active(v):
                continue
            topple(v)
            for w in (v - 1, v, v + 1):
                if va <= w <= vb and active(w) and w not in queued:
                    fifo.append(w)
                    queued.add(w)
    else:
        raise ValueError(f"unknown policy {policy!r}; choose from {POLICIES}")
    return odom, topples


def stabilize(
    config: Configuration,
    stable_set: tuple[int, int],
    stacks: InstructionStacks,
    policy: str = "rightmost",
    cap: int = 10**9,
    force_python: bool = False,
) -> StabilizationResult:
    """Topple sites of the stable set until no active particle remains there.

    The stable set may extend one site beyond the configuration window on each
    side (landing room).  Raises NonfixationSuspected when the toppling cap is
    exceeded.
    """
    va, vb = stable_set
    if va < config.a - 1 or vb > config.b + 1:
        raise ValueError("stable set may exceed the configuration window by at most one site")
    if cap <= 0:
        raise ValueError("toppling cap must be positive")
    orig_a, orig_b = config.a, config.b
    initial_total = config.total()
    work = config.extended(va - 1, vb + 1)

    if not force_python and type(stacks) is InstructionStacks:
        from . import _fast

        t_sleep, t_left = law_thresholds(stacks.lam)
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}; choose from {POLICIES}")
        asleep_u8 = work.asleep.astype(np.uint8)
        odom_vals, topples, overflow = _fast.stabilize_arrays(
            work.count,
            asleep_u8,
            work.a,
            va,
            vb,
            np.uint64(stacks.seed),
            np.uint64(t_sleep),
            np.uint64(t_left),
            POLICIES.index(policy),
            np.uint64(derive_seed(stacks.seed, _POLICY_STREAM)),
            cap,
            False,
        )
        work.asleep = asleep_u8.astype(bool)
        odom = Odometer(va, vb, odom_vals)
        if overflow:
            raise NonfixationSuspected(
                f"toppling cap {cap} exceeded", partial=(odom, work, int(topples))
            )
        topples = int(topples)
    else:
        odom, topples = _stabilize_python(
            work, va, vb, stacks, policy, cap, derive_seed(stacks.seed, _POLICY_STREAM)
        )

    exited_left = sum(work.count_at(v) for v in range(work.a, orig_a))
    exited_right = sum(work.count_at(v) for v in range(orig_b + 1, work.b + 1))
    assert initial_total == work.total()
    return StabilizationResult(
        odometer=odom,
        final=work,
        topple_count=topples,
        exited_left=int(exited_left),
        exited_right=int(exited_right),
    )


def mass_balance_residual(odometer, sigma: Configuration, stacks, site: int) -> int:
    """Particle bookkeeping residual at a site; zero means stable there.

    Works for plain and extended (signed) odometers: jump counts follow the
    signed convention, and the sleep indicator reads the instruction at the
    odometer value, counting 0 at value 0.
    """
    u_here = odometer.value(site)
    _, nr_prev = stacks.jump_counts(site - 1, odometer.value(site - 1))
    nl_next, _ = stacks.jump_counts(site + 1, odometer.value(site + 1))
    nl_here, nr_here = stacks.jump_counts(site, u_here)
    indicator = 1 if (u_here != 0 and stacks.code_at(site, u_here) == SLEEP) else 0
    return sigma.count_at(site) + nr_prev + nl_next - nl_here - nr_here - indicator


def is_stable_on(odometer, sigma: Configuration, stacks, V: tuple[int, int]) -> bool:
    va, vb = V
    return all(mass_balance_residual(odometer, sigma, stacks, v) == 0 for v in range(va, vb + 1))
