"""Monte Carlo experiment suites at desk scale.

Covers the empirical odometer tail and its stretched-exponential fit, the
finite-mean check, quadratic odometer growth above the critical density, the
concentration of the minimal odometer's Right-counts, and two independent
critical-density estimators (driven-dissipative chain and fixed-energy phase
scan).  Replicas are independent jobs with seeds derived from the master
seed; aggregation is performed in replica order, so thread count never
affects results.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _fast
from .stacks import derive_seed, law_thresholds

_CFG_STREAM = 101  # must match core._CFG_STREAM
_KCFG_STREAM = 102
_TAIL_STREAM = 201
_MEAN_STREAM = 202
_SUPER_STREAM = 203
_DD_STREAM = 204
_SCAN_STREAM = 205
_MINODOM_STREAM = 206
_INJECT_STREAM = 207

DEFAULT_CAP = 10**9


def _map_replicas(fn, replicas: int, threads: int) -> list:
    """Order-preserving replica map; results identical for any thread count."""
    if threads <= 1:
        return [fn(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replicas)))


def _window_replica(rseed, lam, mode, rho, k, window, V, cap):
    t_sleep, t_left = law_thresholds(lam)
    stream = _CFG_STREAM if mode == 0 else _KCFG_STREAM
    cseed = derive_seed(rseed, stream)
    thr = min(int(rho * 2.0**64), (1 << 64) - 1)
    wa, wb = window
    va, vb = V
    odom, count, asleep, topples, overflow = _fast.window_replica(
        np.uint64(rseed),
        np.uint64(cseed),
        np.uint64(t_sleep),
        np.uint64(t_left),
        mode,
        np.uint64(thr),
        k,
        wa,
        wb,
        va,
        vb,
        cap,
    )
    return odom, topples, overflow


@dataclass
class TailEstimate:
    """Empirical survival function of the stabilizing odometer at site 0."""

    lam: float
    rho: float
    N: int
    n_grid: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    replicas: int
    overflowed: int
    seed: int
    m0: np.ndarray = field(repr=False)
    topples: np.ndarray = field(repr=False)
    overflow: np.ndarray = field(repr=False)


@dataclass
class FitResult:
    slope: float
    c_hat: float
    r2: float
    n_used: int
    intercept: float


@dataclass
class RhoCEstimate:
    method: str
    lam: float
    estimate: float
    uncertainty: float


def tail_experiment(
    lam: float,
    rho: float,
    N: int,
    n_grid,
    replicas: int,
    seed: int,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
    rho_c_hint: float | None = None,
) -> TailEstimate:
    """Sample Bernoulli(rho) on [-N, N], stabilize on [-N+1, N-1], and record
    the odometer at 0 for each replica."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {rho}")
    if rho_c_hint is not None and rho >= rho_c_hint:
        warnings.warn(
            f"rho={rho} is at or above the estimated critical density {rho_c_hint}; "
            "stabilizations may overflow the cap",
            stacklevel=2,
        )
    n_grid = np.asarray(sorted(n_grid), dtype=np.int64)

    def one(rep):
        rseed = derive_seed(seed, _TAIL_STREAM, rep)
        odom, topples, overflow = _window_replica(
            rseed, lam, 0, rho, 0, (-N, N), (-N + 1, N - 1), cap
        )
        return int(odom[N - 1]), int(topples), bool(overflow)

    rows = _map_replicas(one, replicas, threads)
    m0 = np.array([r[0] for r in rows], dtype=np.int64)
    topples = np.array([r[1] for r in rows], dtype=np.int64)
    overflow = np.array([r[2] for r in rows], dtype=bool)
    ok = ~overflow
    nok = int(ok.sum())
    survival = np.empty(len(n_grid))
    stderr = np.empty(len(n_grid))
    for i, n in enumerate(n_grid):
        p = float(np.count_nonzero(m0[ok] >= n)) / nok if nok else float("nan")
        survival[i] = p
        stderr[i] = math.sqrt(p * (1.0 - p) / nok) if nok else float("nan")
    return TailEstimate(
        lam=lam,
        rho=rho,
        N=N,
        n_grid=n_grid,
        survival=survival,
        stderr=stderr,
        replicas=replicas,
        overflowed=int(overflow.sum()),
        seed=seed,
        m0=m0,
        topples=topples,
        overflow=overflow,
    )


def fit_stretched_exponential(
    tail: TailEstimate,
    n_range: tuple[int, int] | None = None,
    survival_window: tuple[float, float] = (1e-4, 0.5),
) -> FitResult:
    """Least-squares regression of log(-log survival) on log n.

    The slope estimates the stretch exponent (1/2 for a square-root
    stretched exponential, 1 for a pure exponential)."""
    lo, hi = survival_window
    mask = (tail.survival > lo) & (tail.survival < hi) & (tail.n_grid >= 1)
    if n_range is not None:
        mask &= (tail.n_grid >= n_range[0]) & (tail.n_grid <= n_range[1])
    if int(mask.sum()) < 5:
        raise ValueError(
            f"need at least 5 grid points with survival in {survival_window}, "
            f"got {int(mask.sum())}"
        )
    x = np.log(tail.n_grid[mask].astype(float))
    y = np.log(-np.log(tail.survival[mask]))
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return FitResult(
        slope=float(slope),
        c_hat=float(np.exp(intercept)),
        r2=r2,
        n_used=int(mask.sum()),
        intercept=float(intercept),
    )


@dataclass
class MeanEstimate:
    lam: float
    rho: float
    N: int
    replicas: int
    overflowed: int
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    tail_sum: float
    m0: np.ndarray = field(repr=False)


def mean_odometer(
    lam: float,
    rho: float,
    N: int,
    replicas: int,
    seed: int,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
) -> MeanEstimate:
    """Sample mean of the stabilizing odometer at 0, with a tail-sum
    cross-estimate (sum over n >= 1 of the empirical survival)."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {rho}")

    def one(rep):
        rseed = derive_seed(seed, _MEAN_STREAM, rep)
        odom, topples, overflow = _window_replica(
            rseed, lam, 0, rho, 0, (-N, N), (-N + 1, N - 1), cap
        )
        return int(odom[N - 1]), bool(overflow)

    rows = _map_replicas(one, replicas, threads)
    m0 = np.array([r[0] for r in rows], dtype=np.int64)
    overflow = np.array([r[1] for r in rows], dtype=bool)
    vals = m0[~overflow].astype(float)
    mean = float(vals.mean()) if len(vals) else float("nan")
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("nan")
    # sum_{n>=1} P(m0 >= n) recovers the mean; computed from the survival curve
    tail_sum = 0.0
    if len(vals):
        top = int(vals.max())
        counts = np.bincount(m0[~overflow], minlength=top + 1)
        above = len(vals) - np.cumsum(counts)[:-1]  # replicas with m0 >= n for n = 1..top
        tail_sum = float(above.sum()) / len(vals)
    return MeanEstimate(
        lam=lam,
        rho=rho,
        N=N,
        replicas=replicas,
        overflowed=int(overflow.sum()),
        mean=mean,
        stderr=se,
        ci_low=mean - 1.96 * se,
        ci_high=mean + 1.96 * se,
        tail_sum=tail_sum,
        m0=m0,
    )


@dataclass
class SupercriticalResult:
    lam: float
    epsilon: float
    n: int
    density: float
    particles: int
    replicas: int
    overflowed: int
    threshold: float
    frac_exceeding: float
    median_g0: float
    g0: np.ndarray = field(repr=False)


def supercritical_experiment(
    lam: float,
    epsilon: float,
    n: int,
    replicas: int,
    seed: int,
    chat: float,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
) -> SupercriticalResult:
    """Stabilize floor((chat+epsilon) n) uniformly placed particles on an
    n-site interval around 0 and record the odometer at 0."""
    if n < 2:
        raise ValueError("interval length must be at least 2")
    density = chat + epsilon
    if density > 1.0:
        warnings.warn(f"density {density} exceeds 1; growth bound may be loose", stacklevel=2)
    k = int(density * n)
    a = -math.ceil(n / 2) + 1
    b = math.floor(n / 2)

    def one(rep):
        rseed = derive_seed(seed, _SUPER_STREAM, rep)
        odom, topples, overflow = _window_replica(rseed, lam, 1, 0.0, k, (a, b), (a, b), cap)
        return int(odom[-a]), bool(overflow)

    rows = _map_replicas(one, replicas, threads)
    g0 = np.array([r[0] for r in rows], dtype=np.int64)
    overflow = np.array([r[1] for r in rows], dtype=bool)
    ok = ~overflow
    threshold = (1.0 + lam) * epsilon * n * n / 32.0
    frac = float(np.count_nonzero(g0[ok] > threshold)) / int(ok.sum()) if ok.any() else float("nan")
    return SupercriticalResult(
        lam=lam,
        epsilon=epsilon,
        n=n,
        density=density,
        particles=k,
        replicas=replicas,
        overflowed=int(overflow.sum()),
        threshold=threshold,
        frac_exceeding=frac,
        median_g0=float(np.median(g0[ok])) if ok.any() else float("nan"),
        g0=g0,
    )


@dataclass
class DrivenDissipativeResult:
    estimate: RhoCEstimate
    n: int
    injections: int
    burn_in: int
    overflowed: bool
    densities: np.ndarray = field(repr=False)


def driven_dissipative_rho_c(
    lam: float,
    n: int,
    injections: int,
    burn_in: int,
    seed: int,
    cap: int = DEFAULT_CAP,
) -> DrivenDissipativeResult:
    """Critical density from driven-dissipative dynamics: inject one active
    particle at a uniform site of [1, n], stabilize with boundary
    annihilation, and average the stationary particle density."""
    if injections <= burn_in:
        raise ValueError("injections must exceed burn_in")
    t_sleep, t_left = law_thresholds(lam)
    rseed = derive_seed(seed, _DD_STREAM)
    iseed = derive_seed(rseed, _INJECT_STREAM)
    densities, topples, overflow = _fast.dd_chain(
        np.uint64(rseed),
        np.uint64(iseed),
        np.uint64(t_sleep),
        np.uint64(t_left),
        n,
        injections,
        cap,
    )
    if overflow:
        raise RuntimeError(
            f"driven-dissipative stabilization exceeded cap {cap} after "
            f"{len(densities)} injections"
        )
    post = densities[burn_in:]
    est = float(post.mean())
    # block standard error guards against autocorrelation between injections
    nblocks = 10
    blocks = np.array_split(post, nblocks)
    bmeans = np.array([b.mean() for b in blocks])
    unc = float(bmeans.std(ddof=1) / math.sqrt(nblocks))
    return DrivenDissipativeResult(
        estimate=RhoCEstimate(
            method="driven_dissipative", lam=lam, estimate=est, uncertainty=unc
        ),
        n=n,
        injections=injections,
        burn_in=burn_in,
        overflowed=bool(overflow),
        densities=densities,
    )


@dataclass
class PhaseScanResult:
    estimate: RhoCEstimate
    lam: float
    N: int
    replicas: int
    alpha: float
    cap: int
    rho_grid: np.ndarray
    fixation_fraction: np.ndarray
    overflow_counts: np.ndarray
    m0: np.ndarray = field(repr=False)


def fixation_phase_scan(
    lam: float,
    rho_grid,
    N: int,
    replicas: int,
    cap: int,
    seed: int,
    alpha: float = 1.0,
    threads: int = 1,
) -> PhaseScanResult:
    """Fixation fraction along a density grid, with the critical density read
    off as the midpoint of the steepest transition.

    A replica counts as fixating when its stabilization completes within the
    toppling cap with odometer at 0 at most alpha * N^2."""
    rho_grid = np.asarray(sorted(rho_grid), dtype=float)
    if np.any((rho_grid < -1e-9) | (rho_grid > 1 + 1e-9)):
        raise ValueError("density grid must lie in [0, 1]")
    rho_grid = np.clip(rho_grid, 0.0, 1.0)
    divergence = alpha * N * N
    m0 = np.zeros((len(rho_grid), replicas), dtype=np.int64)
    overflow = np.zeros((len(rho_grid), replicas), dtype=bool)

    def one(job):
        i, rep = divmod(job, replicas)
        rseed = derive_seed(seed, _SCAN_STREAM, i, rep)
        odom, topples, ovf = _window_replica(
            rseed, lam, 0, float(rho_grid[i]), 0, (-N, N), (-N + 1, N - 1), cap
        )
        return int(odom[N - 1]), bool(ovf)

    rows = _map_replicas(one, len(rho_grid) * replicas, threads)
    for job, (v, ovf) in enumerate(rows):
        i, rep = divmod(job, replicas)
        m0[i, rep] = v
        overflow[i, rep] = ovf
    fixed = (~overflow) & (m0 <= divergence)
    fractions = fixed.mean(axis=1)
    if len(rho_grid) < 2:
        est, unc = float(rho_grid[0]), float("nan")
    else:
        drops = fractions[:-1] - fractions[1:]
        i = int(np.argmax(drops))
        est = float((rho_grid[i] + rho_grid[i + 1]) / 2.0)
        unc = float(np.max(np.diff(rho_grid)))
    return PhaseScanResult(
        estimate=RhoCEstimate(method="fixed_energy_scan", lam=lam, estimate=est, uncertainty=unc),
        lam=lam,
        N=N,
        replicas=replicas,
        alpha=alpha,
        cap=cap,
        rho_grid=rho_grid,
        fixation_fraction=fractions,
        overflow_counts=overflow.sum(axis=1),
        m0=m0,
    )


@dataclass
class MinimalGrowthResult:
    """Right-count traces of the minimal odometer against the quadratic
    concentration envelopes."""

    lam: float
    rho: float
    n: int
    u0: int
    f0: int
    replicas: int
    frac_inner: float  # N^R(j) >= n^2 - rho j^2/2 for all j <= n
    frac_outer: float  # N^R(j) >= -(rho+eps) j^2/2 for n <= j <= 4n
    frac_center: float  # N^R(n) within n^2/10 of the predicted center
    epsilon: float
    inner_ok: np.ndarray = field(repr=False)
    outer_ok: np.ndarray = field(repr=False)
    center_dev: np.ndarray = field(repr=False)


def minimal_odometer_concentration(
    lam: float,
    rho: float,
    n: int,
    replicas: int,
    seed: int,
    u0: int | None = None,
    f0: int = 0,
    epsilon: float = 0.1,
    threads: int = 1,
    scan_cap: int = 10**7,
) -> MinimalGrowthResult:
    """Monte Carlo check that the minimal odometer's Right-counts concentrate
    around u0/(2(1+lam)) - sum_i (f0 + Z_i) with quadratic envelopes."""
    if u0 is None:
        u0 = math.ceil(3.0 * (1.0 + lam) * n * n)
    t_sleep, t_left = law_thresholds(lam)
    thr = min(int(rho * 2.0**64), (1 << 64) - 1)
    jmax = 4 * n
    js = np.arange(jmax + 1, dtype=float)
    inner_env = n * n - rho * js[: n + 1] ** 2 / 2.0
    outer_env = -(rho + epsilon) * js**2 / 2.0

    def one(rep):
        rseed = derive_seed(seed, _MINODOM_STREAM, rep)
        cseed = derive_seed(rseed, _CFG_STREAM)
        values, nr, z, ok = _fast.minimal_trace(
            np.uint64(rseed),
            np.uint64(cseed),
            np.uint64(t_sleep),
            np.uint64(t_left),
            np.uint64(thr),
            u0,
            f0,
            jmax,
            scan_cap,
        )
        if not ok:
            raise RuntimeError(f"minimal-odometer scan cap exceeded in replica {rep}")
        inner = bool(np.all(nr[1 : n + 1] >= inner_env[1:]))
        outer = bool(np.all(nr[n : jmax + 1] >= outer_env[n:]))
        center = u0 / (2.0 * (1.0 + lam)) - float(np.sum(f0 + z[1 : n + 1]))
        return inner, outer, float(nr[n] - center)

    rows = _map_replicas(one, replicas, threads)
    inner_ok = np.array([r[0] for r in rows], dtype=bool)
    outer_ok = np.array([r[1] for r in rows], dtype=bool)
    center_dev = np.array([r[2] for r in rows], dtype=float)
    return MinimalGrowthResult(
        lam=lam,
        rho=rho,
        n=n,
        u0=u0,
        f0=f0,
        replicas=replicas,
        frac_inner=float(inner_ok.mean()),
        frac_outer=float(outer_ok.mean()),
        frac_center=float(np.mean(np.abs(center_dev) <= n * n / 10.0)),
        epsilon=epsilon,
        inner_ok=inner_ok,
        outer_ok=outer_ok,
        center_dev=center_dev,
    )
