"""Matplotlib figure rendering for the CLI report path."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def survival_figure(tail, fit, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mask = tail.survival > 0
    ax.loglog(tail.n_grid[mask], tail.survival[mask], "o", ms=4, label="empirical")
    if fit is not None:
        ns = np.geomspace(max(tail.n_grid.min(), 1), tail.n_grid.max(), 200)
        ax.loglog(
            ns,
            np.exp(-fit.c_hat * ns**fit.slope),
            "-",
            lw=1,
            label=f"fit: exp(-{fit.c_hat:.3g} n^{fit.slope:.3f})",
        )
    ax.set_xlabel("n")
    ax.set_ylabel("P(m(0) >= n)")
    ax.set_title(f"odometer tail, lambda={tail.lam}, rho={tail.rho}, N={tail.N}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fit_figure(n_grid, survival, fit, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mask = (survival > 0) & (survival < 1)
    x = np.log(n_grid[mask].astype(float))
    y = np.log(-np.log(survival[mask]))
    ax.plot(x, y, "o", ms=4, label="log(-log S)")
    xs = np.linspace(x.min(), x.max(), 50)
    ax.plot(xs, fit.slope * xs + fit.intercept, "-", lw=1, label=f"slope {fit.slope:.3f}")
    ax.set_xlabel("log n")
    ax.set_ylabel("log(-log survival)")
    ax.set_title(f"stretch-exponent fit (r2={fit.r2:.4f})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def scan_figure(scan, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(scan.rho_grid, scan.fixation_fraction, "o-", ms=4)
    ax.axvline(scan.estimate.estimate, color="r", ls="--", lw=1, label="estimated crossing")
    ax.set_xlabel("rho")
    ax.set_ylabel("fixation fraction")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"fixation phase scan, lambda={scan.lam}, N={scan.N}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def dd_figure(result, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(result.densities, lw=0.5)
    ax.axhline(result.estimate.estimate, color="r", ls="--", lw=1)
    ax.axvline(result.burn_in, color="k", ls=":", lw=1, label="burn-in")
    ax.set_xlabel("injection")
    ax.set_ylabel("particle density after stabilization")
    ax.set_title(
        f"driven-dissipative density, n={result.n}, estimate {result.estimate.estimate:.4f}"
    )
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def histogram_figure(values, xlabel, title, path, vline=None):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.hist(values, bins=min(60, max(10, len(np.unique(values)))), color="steelblue")
    if vline is not None:
        ax.axvline(vline, color="r", ls="--", lw=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("replicas")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def profile_figure(sites, values, ylabel, title, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.step(sites, values, where="mid")
    ax.set_xlabel("site")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
