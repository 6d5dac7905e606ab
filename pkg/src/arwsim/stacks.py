"""Deterministic bi-infinite instruction stacks.

Every site of the integer line carries a two-sided sequence of Sleep / Left /
Right instructions.  Instructions are generated counter-style: the instruction
at (seed, site, index) is a pure function of its arguments, obtained by
finalizing a 64-bit mixing hash, so any index is addressable in O(1) without
storing prefixes.  Index 1, 2, 3, ... is the forward stack; indices <= 0 are
the reverse extension used by signed (extended) odometers.

Marginal law at sleep rate lambda:

    P(Sleep) = lambda / (1 + lambda)
    P(Left)  = P(Right) = 1 / (2 (1 + lambda))
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xFF51AFD7ED558CCD
_MIX2 = 0xC4CEB9FE1A85EC53
_SITE_SALT = 0xD1B54A32D192ED03
_DERIVE_SALT = 0x632BE59BD9B4E019

# internal instruction codes; kernels share these values
SLEEP, LEFT, RIGHT = 0, 1, 2

_CHUNK = 1024


class Instruction(enum.IntEnum):
    SLEEP = SLEEP
    LEFT = LEFT
    RIGHT = RIGHT


class StackSearchError(RuntimeError):
    """A lazy stack search exceeded its index cap (probability exponentially
    small in the cap for hash-generated stacks)."""


def fmix64(z: int) -> int:
    """64-bit finalizer (murmur3-style avalanche)."""
    z &= MASK64
    z ^= z >> 33
    z = (z * _MIX1) & MASK64
    z ^= z >> 29
    z = (z * _MIX2) & MASK64
    z ^= z >> 32
    return z


def site_key(seed: int, site: int) -> int:
    return fmix64(fmix64(((site & MASK64) * _GAMMA + _SITE_SALT) & MASK64) ^ (seed & MASK64))


def raw64(seed: int, site: int, index: int) -> int:
    """Uniform 64-bit word for counter (site, index) under seed."""
    return fmix64((site_key(seed, site) + (index & MASK64) * _GAMMA) & MASK64)


def derive_seed(seed: int, *indices: int) -> int:
    """Fold stream indices into a master seed to get an independent substream."""
    z = seed & MASK64
    for ix in indices:
        z = fmix64(z ^ fmix64(((ix & MASK64) * _GAMMA + _DERIVE_SALT) & MASK64))
    return z


def law_thresholds(lam: float) -> tuple[int, int]:
    """uint64 thresholds (t_sleep, t_left) encoding the instruction law.

    A word u maps to Sleep if u < t_sleep, to Left if u < t_left, else Right.
    """
    if lam <= 0:
        raise ValueError(f"sleep rate must be positive, got {lam}")
    t_sleep = min(int(lam / (1.0 + lam) * 2.0**64), MASK64)
    t_left = min(t_sleep + int(2.0**64 / (2.0 * (1.0 + lam))), MASK64)
    return t_sleep, t_left


def _decode(word: int, t_sleep: int, t_left: int) -> int:
    if word < t_sleep:
        return SLEEP
    if word < t_left:
        return LEFT
    return RIGHT


def instruction_at(seed: int, site: int, index: int, lam: float) -> Instruction:
    """Instruction at (site, index); pure in all arguments."""
    t_sleep, t_left = law_thresholds(lam)
    return Instruction(_decode(raw64(seed, site, index), t_sleep, t_left))


def _codes_vector(key: int, start: int, count: int, t_sleep: int, t_left: int) -> np.ndarray:
    """Vectorized codes for indices start .. start+count-1 at a fixed site key."""
    idx = (np.arange(start, start + count, dtype=np.int64)).astype(np.uint64)
    z = np.uint64(key) + idx * np.uint64(_GAMMA)
    z ^= z >> np.uint64(33)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(29)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(32)
    codes = np.full(count, RIGHT, dtype=np.int8)
    codes[z < np.uint64(t_left)] = LEFT
    codes[z < np.uint64(t_sleep)] = SLEEP
    return codes


@dataclass
class InstructionStacks:
    """Hash-generated instruction stacks for every site at a fixed seed and
    sleep rate.  Stateless apart from a chunk cache; safe to share."""

    seed: int
    lam: float
    _thresholds: tuple[int, int] = field(init=False, repr=False)
    _chunks: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self._thresholds = law_thresholds(self.lam)

    def code_at(self, site: int, index: int) -> int:
        base = (index // _CHUNK) * _CHUNK
        chunk = self._chunks.get((site, base))
        if chunk is None:
            t_sleep, t_left = self._thresholds
            chunk = _codes_vector(site_key(self.seed, site), base, _CHUNK, t_sleep, t_left)
            if len(self._chunks) > 4096:
                self._chunks.clear()
            self._chunks[(site, base)] = chunk
        return int(chunk[index - base])

    def instruction_at(self, site: int, index: int) -> Instruction:
        return Instruction(self.code_at(site, index))

    def _codes_range(self, site: int, start: int, stop: int) -> np.ndarray:
        """Codes for indices start..stop inclusive (vectorized, no cache)."""
        t_sleep, t_left = self._thresholds
        return _codes_vector(site_key(self.seed, site), start, stop - start + 1, t_sleep, t_left)

    def jump_counts(self, site: int, u: int) -> tuple[int, int]:
        """Signed (n_left, n_right) executed within the first u instructions.

        For u >= 0 these count Left/Right among indices 1..u; for u < 0 they
        are minus the counts among indices u+1..0.  Both vanish at u = 0 and
        are nondecreasing in u.
        """
        if u == 0:
            return 0, 0
        if u > 0:
            codes = self._codes_range(site, 1, u)
            return int(np.count_nonzero(codes == LEFT)), int(np.count_nonzero(codes == RIGHT))
        codes = self._codes_range(site, u + 1, 0)
        return -int(np.count_nonzero(codes == LEFT)), -int(np.count_nonzero(codes == RIGHT))

    def sleep_run_bounds(self, site: int, index: int) -> tuple[int, int]:
        """Maximal contiguous interval of Sleep instructions containing index."""
        if self.code_at(site, index) != SLEEP:
            raise ValueError(f"instruction at site {site}, index {index} is not Sleep")
        lo = index
        while self.code_at(site, lo - 1) == SLEEP:
            lo -= 1
        hi = index
        while self.code_at(site, hi + 1) == SLEEP:
            hi += 1
        return lo, hi

    def first_non_sleep_at_or_before(self, site: int, index: int, cap: int = 100_000) -> int:
        """Largest j <= index whose instruction is not Sleep."""
        for j in range(index, index - cap - 1, -1):
            if self.code_at(site, j) != SLEEP:
                return j
        raise StackSearchError(
            f"no non-Sleep instruction in ({index - cap}, {index}] at site {site}"
        )


def _parse_prefix(letters_or_codes) -> list[int]:
    letters = {"S": SLEEP, "L": LEFT, "R": RIGHT}
    out = []
    for item in letters_or_codes:
        if isinstance(item, str):
            out.append(letters[item.upper()])
        else:
            out.append(int(item))
    return out


class FixtureStacks(InstructionStacks):
    """Stacks with explicit forward prefixes at chosen sites, falling back to
    hash generation elsewhere.  Used to make worked examples executable."""

    def __init__(self, prefixes: dict, seed: int = 0, lam: float = 1.0):
        super().__init__(seed=seed, lam=lam)
        # prefix entry for site s covers indices 1..len(prefix)
        self.prefixes = {int(s): _parse_prefix(p) for s, p in prefixes.items()}

    def code_at(self, site: int, index: int) -> int:
        prefix = self.prefixes.get(site)
        if prefix is not None and 1 <= index <= len(prefix):
            return prefix[index - 1]
        return super().code_at(site, index)

    def jump_counts(self, site: int, u: int) -> tuple[int, int]:
        if site not in self.prefixes:
            return super().jump_counts(site, u)
        nl = nr = 0
        if u > 0:
            for j in range(1, u + 1):
                c = self.code_at(site, j)
                if c == LEFT:
                    nl += 1
                elif c == RIGHT:
                    nr += 1
            return nl, nr
        for j in range(u + 1, 1):
            c = self.code_at(site, j)
            if c == LEFT:
                nl -= 1
            elif c == RIGHT:
                nr -= 1
        return nl, nr
