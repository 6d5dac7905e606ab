"""Numba kernels for the hot paths (hash-generated stacks only).

Pure-Python reference implementations live in stacks.py / core.py /
extended.py; these kernels must agree with them bit-for-bit, which the test
suite checks via the abelian property and direct comparison.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U = np.uint64
_GAMMA = U(0x9E3779B97F4A7C15)
_MIX1 = U(0xFF51AFD7ED558CCD)
_MIX2 = U(0xC4CEB9FE1A85EC53)
_SITE_SALT = U(0xD1B54A32D192ED03)

SLEEP, LEFT, RIGHT = 0, 1, 2


@njit(inline="always")
def _fmix64(z):
    z ^= z >> U(33)
    z *= _MIX1
    z ^= z >> U(29)
    z *= _MIX2
    z ^= z >> U(32)
    return z


@njit(inline="always")
def _site_key(seed, site):
    # site: int64, reinterpreted as two's-complement uint64
    return _fmix64(_fmix64(U(site) * _GAMMA + _SITE_SALT) ^ seed)


@njit(inline="always")
def _word(key, index):
    return _fmix64(key + U(index) * _GAMMA)


@njit(inline="always")
def _code(key, index, t_sleep, t_left):
    w = _word(key, index)
    if w < t_sleep:
        return SLEEP
    if w < t_left:
        return LEFT
    return RIGHT


@njit(cache=True, nogil=True)
def hash_word(seed, site, index):
    return _word(_site_key(seed, site), index)


@njit(cache=True, nogil=True)
def sample_bernoulli_counts(count, a, cseed, thr):
    for i in range(count.shape[0]):
        key = _site_key(cseed, np.int64(a + i))
        count[i] = 1 if _word(key, np.int64(1)) < thr else 0


@njit(cache=True, nogil=True)
def sample_k_counts(count, k, cseed):
    width = count.shape[0]
    for i in range(k):
        key = _site_key(cseed, np.int64(i))
        count[_word(key, np.int64(1)) % U(width)] += 1


@njit(inline="always")
def _topple_once(count, asleep, odom, keys, wa, va, vb, v, t_sleep, t_left, annihilate):
    """Execute one instruction at site v (must hold an active particle)."""
    iv = v - wa
    odom[v - va] += 1
    c = _code(keys[v - va], odom[v - va], t_sleep, t_left)
    if c == SLEEP:
        if count[iv] == 1:
            asleep[iv] = 1
        return v  # no movement
    dest = v - 1 if c == LEFT else v + 1
    count[iv] -= 1
    if dest < va or dest > vb:
        if not annihilate:
            jd = dest - wa
            if asleep[jd]:
                asleep[jd] = 0
            count[jd] += 1
        return dest
    jd = dest - wa
    if asleep[jd]:
        asleep[jd] = 0
    count[jd] += 1
    return dest


@njit(inline="always")
def _active(count, asleep, wa, v):
    i = v - wa
    return count[i] > 0 and asleep[i] == 0


@njit(cache=True, nogil=True)
def stabilize_arrays(
    count, asleep, wa, va, vb, seed, t_sleep, t_left, policy, policy_seed, cap, annihilate
):
    """Stabilize sites va..vb in place; returns (odometer, topples, overflow).

    policy: 0 rightmost-active-first, 1 left-to-right sweep, 2 random active
    site, 3 FIFO queue.  All give the same result (abelian property).
    """
    nv = vb - va + 1
    odom = np.zeros(nv, dtype=np.int64)
    keys = np.empty(nv, dtype=np.uint64)
    for v in range(va, vb + 1):
        keys[v - va] = _site_key(seed, np.int64(v))
    topples = 0
    overflow = False

    if policy == 0:
        p = vb
        while p >= va:
            if not _active(count, asleep, wa, p):
                p -= 1
                continue
            topples += 1
            if topples > cap:
                overflow = True
                break
            _topple_once(count, asleep, odom, keys, wa, va, vb, p, t_sleep, t_left, annihilate)
            if p < vb and _active(count, asleep, wa, p + 1):
                p += 1
    elif policy == 1:
        moved = True
        while moved and not overflow:
            moved = False
            for v in range(va, vb + 1):
                while _active(count, asleep, wa, v):
                    topples += 1
                    if topples > cap:
                        overflow = True
                        break
                    _topple_once(
                        count, asleep, odom, keys, wa, va, vb, v, t_sleep, t_left, annihilate
                    )
                    moved = True
                if overflow:
                    break
    elif policy == 2:
        sites = np.empty(nv, dtype=np.int64)
        pos = np.full(nv, -1, dtype=np.int64)
        nact = 0
        for v in range(va, vb + 1):
            if _active(count, asleep, wa, v):
                sites[nact] = v
                pos[v - va] = nact
                nact += 1
        state = policy_seed
        while nact > 0:
            state += _GAMMA
            v = sites[_fmix64(state) % U(nact)]
            topples += 1
            if topples > cap:
                overflow = True
                break
            _topple_once(count, asleep, odom, keys, wa, va, vb, v, t_sleep, t_left, annihilate)
            for w in range(v - 1, v + 2):
                if w < va or w > vb:
                    continue
                iw = w - va
                act = _active(count, asleep, wa, w)
                if act and pos[iw] < 0:
                    sites[nact] = w
                    pos[iw] = nact
                    nact += 1
                elif not act and pos[iw] >= 0:
                    last = sites[nact - 1]
                    sites[pos[iw]] = last
                    pos[last - va] = pos[iw]
                    pos[iw] = -1
                    nact -= 1
    else:
        ring = np.empty(nv + 1, dtype=np.int64)
        queued = np.zeros(nv, dtype=np.uint8)
        head = 0
        tail = 0
        for v in range(va, vb + 1):
            if _active(count, asleep, wa, v):
                ring[tail] = v
                tail = (tail + 1) % (nv + 1)
                queued[v - va] = 1
        while head != tail:
            v = ring[head]
            head = (head + 1) % (nv + 1)
            queued[v - va] = 0
            if not _active(count, asleep, wa, v):
                continue
            topples += 1
            if topples > cap:
                overflow = True
                break
            _topple_once(count, asleep, odom, keys, wa, va, vb, v, t_sleep, t_left, annihilate)
            for w in range(v - 1, v + 2):
                if va <= w <= vb and queued[w - va] == 0 and _active(count, asleep, wa, w):
                    ring[tail] = w
                    tail = (tail + 1) % (nv + 1)
                    queued[w - va] = 1
    return odom, topples, overflow


@njit(cache=True, nogil=True)
def window_replica(seed, cseed, t_sleep, t_left, mode, bern_thr, k, wa, wb, va, vb, cap):
    """Sample a configuration on [wa, wb] and stabilize it on [va, vb].

    mode 0: i.i.d. Bernoulli occupation (threshold bern_thr); mode 1: exactly
    k particles placed uniformly.  Returns (odometer, count, asleep, topples,
    overflow)."""
    ea, eb = min(wa, va - 1), max(wb, vb + 1)
    width = eb - ea + 1
    count = np.zeros(width, dtype=np.int64)
    asleep = np.zeros(width, dtype=np.uint8)
    if mode == 0:
        sub = count[wa - ea : wb - ea + 1]
        sample_bernoulli_counts(sub, wa, cseed, bern_thr)
    else:
        sub = count[wa - ea : wb - ea + 1]
        sample_k_counts(sub, k, cseed)
    odom, topples, overflow = stabilize_arrays(
        count, asleep, ea, va, vb, seed, t_sleep, t_left, 0, U(0), cap, False
    )
    return odom, count, asleep, topples, overflow


@njit(cache=True, nogil=True)
def dd_chain(seed, iseed, t_sleep, t_left, n, injections, cap):
    """Driven-dissipative chain on sites 1..n with boundary annihilation.

    Returns (density per injection, total topples, overflow flag)."""
    count = np.zeros(n + 2, dtype=np.int64)
    asleep = np.zeros(n + 2, dtype=np.uint8)
    odom_total = np.zeros(n, dtype=np.int64)
    densities = np.empty(injections, dtype=np.float64)
    keys = np.empty(n, dtype=np.uint64)
    for v in range(1, n + 1):
        keys[v - 1] = _site_key(seed, np.int64(v))
    topples_total = 0
    for t in range(injections):
        site = 1 + np.int64(_word(_site_key(iseed, np.int64(t)), np.int64(1)) % U(n))
        i = site  # offset: array index equals site since wa = 0
        if asleep[i]:
            asleep[i] = 0
        count[i] += 1
        # stabilize with persistent stacks: continue from accumulated odometer
        p = n
        topples = 0
        while p >= 1:
            if count[p] == 0 or asleep[p] == 1:
                p -= 1
                continue
            topples += 1
            if topples > cap:
                return densities[:t], topples_total, True
            odom_total[p - 1] += 1
            c = _code(keys[p - 1], odom_total[p - 1], t_sleep, t_left)
            if c == SLEEP:
                if count[p] == 1:
                    asleep[p] = 1
            else:
                dest = p - 1 if c == LEFT else p + 1
                count[p] -= 1
                if 1 <= dest <= n:
                    if asleep[dest]:
                        asleep[dest] = 0
                    count[dest] += 1
                    if dest == p + 1:
                        p += 1
                # else annihilated at the boundary
        topples_total += topples
        total = 0
        for v in range(1, n + 1):
            total += count[v]
        densities[t] = total / n
    return densities, topples_total, False


@njit(inline="always")
def _signed_counts(key, t_sleep, t_left, u):
    """Signed (n_left, n_right) among the first u instructions."""
    nl = 0
    nr = 0
    if u > 0:
        for j in range(1, u + 1):
            c = _code(key, np.int64(j), t_sleep, t_left)
            if c == LEFT:
                nl += 1
            elif c == RIGHT:
                nr += 1
    elif u < 0:
        for j in range(u + 1, 1):
            c = _code(key, np.int64(j), t_sleep, t_left)
            if c == LEFT:
                nl -= 1
            elif c == RIGHT:
                nr -= 1
    return nl, nr


@njit(inline="always")
def _min_left_idx(key, t_sleep, t_left, t, cap):
    """Smallest index u whose signed Left-count equals t.

    Returns (u, signed Right-count at u, ok).

    Scans in branchless 64-wide blocks (the loop body is pure arithmetic, so
    the hash evaluations pipeline), then replays the overshooting block one
    index at a time."""
    if t > 0:
        lefts = 0
        rights = 0
        j = 0
        acc = key  # key + U(j) * _GAMMA, maintained incrementally
        while lefts < t:
            if j + 64 <= cap and lefts + 64 <= t:
                bl = 0
                br = 0
                a = acc
                for _ in range(64):
                    a += _GAMMA
                    w = _fmix64(a)
                    bl += (w >= t_sleep) & (w < t_left)
                    br += w >= t_left
                lefts += int(bl)
                rights += int(br)
                j += 64
                acc = a
                continue
            j += 1
            if j > cap:
                return 0, 0, False
            acc += _GAMMA
            w = _fmix64(acc)
            if w >= t_sleep:
                if w < t_left:
                    lefts += 1
                else:
                    rights += 1
        return j, rights, True
    lefts = 0
    rights = 0
    j = 1
    need = 1 - t
    acc = key + _GAMMA  # key + U(j) * _GAMMA at j = 1
    while lefts < need:
        if j - 64 >= -cap and lefts + 64 <= need:
            bl = 0
            br = 0
            a = acc
            for _ in range(64):
                a -= _GAMMA
                w = _fmix64(a)
                bl += (w >= t_sleep) & (w < t_left)
                br += w >= t_left
            lefts += int(bl)
            rights += int(br)
            j -= 64
            acc = a
            continue
        j -= 1
        if j < -cap:
            return 0, 0, False
        acc -= _GAMMA
        w = _fmix64(acc)
        if w >= t_sleep:
            if w < t_left:
                lefts += 1
            else:
                rights += 1
    # j is the (|t|+1)-th Left at or below 0; Rights in (j, 0] were all counted
    return j, -rights, True


@njit(cache=True, nogil=True)
def minimal_trace(seed, cseed, t_sleep, t_left, bern_thr, u0, f0, jmax, scan_cap):
    """Minimal-odometer recursion against Bernoulli initial particles.

    Returns (values[0..jmax], right counts, prefix particle sums Z, ok)."""
    values = np.zeros(jmax + 1, dtype=np.int64)
    nr = np.zeros(jmax + 1, dtype=np.int64)
    nl = np.zeros(jmax + 1, dtype=np.int64)
    z = np.zeros(jmax + 1, dtype=np.int64)
    sigma = np.zeros(jmax + 1, dtype=np.int64)
    for v in range(1, jmax + 1):
        key = _site_key(cseed, np.int64(v))
        sigma[v] = 1 if _word(key, np.int64(1)) < bern_thr else 0
        z[v] = z[v - 1] + sigma[v]
    values[0] = u0
    key0 = _site_key(seed, np.int64(0))
    nl0, nr0 = _signed_counts(key0, t_sleep, t_left, u0)
    nl[0] = nl0
    nr[0] = nr0
    t = nr0 - f0
    for k in range(1, jmax + 1):
        key = _site_key(seed, np.int64(k))
        u, r, ok = _min_left_idx(key, t_sleep, t_left, t, scan_cap)
        if not ok:
            return values, nr, z, False
        values[k] = u
        nl[k] = t
        nr[k] = r
        if k < jmax:
            # minimal choice always lands on a Left (or 0): sleep indicator 0
            t = -sigma[k] - nr[k - 1] + nl[k] + nr[k]
    return values, nr, z, True


@njit(cache=True, nogil=True)
def greedy_trace(seed, t_sleep, t_left, n, u0, f0, lookahead, scan_cap):
    """Sleep-seeking stable extended odometer for an empty initial
    configuration; returns (values, sleeper flags, ok)."""
    values = np.zeros(n + 1, dtype=np.int64)
    sleeper = np.zeros(n + 1, dtype=np.uint8)
    values[0] = u0
    key0 = _site_key(seed, np.int64(0))
    if u0 != 0 and _code(key0, np.int64(u0), t_sleep, t_left) == SLEEP:
        sleeper[0] = 1
    _, nr0 = _signed_counts(key0, t_sleep, t_left, u0)
    t = nr0 - f0  # required signed Left-count at the next site
    nr_prev = nr0  # N^R one site back
    for k in range(1, n + 1):
        key = _site_key(seed, np.int64(k))
        lo, r_lo, ok = _min_left_idx(key, t_sleep, t_left, t, scan_cap)
        if not ok:
            return values, sleeper, False
        # candidates lo..hi share the Left-count t; hi sits just before the
        # next Left.  Prefer the earliest candidate ending on a usable Sleep.
        u = lo
        r = r_lo
        found = 0
        uc = lo
        rc = r_lo
        for _step in range(lookahead):
            uc += 1
            c = _code(key, np.int64(uc), t_sleep, t_left)
            if c == LEFT:
                break
            if c == RIGHT:
                rc += 1
            elif uc != 0:  # a Sleep at index 0 cannot declare a sleeper
                u = uc
                r = rc
                found = 1
                break
        values[k] = u
        sleeper[k] = found
        if k < n:
            t = found - nr_prev + t + r
            nr_prev = r
    return values, sleeper, True
