"""Command-line front end.

Every subcommand writes machine-readable output (JSON-lines per-replica
records and a CSV summary) plus rendered figures into an output directory,
together with a run manifest that allows bit-exact replay.  Seeding is fully
deterministic: the same command line produces byte-identical data files.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, extended, reporting
from .core import (
    Configuration,
    sample_bernoulli_config,
    stabilize,
)
from .stacks import FixtureStacks, InstructionStacks

try:
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("arwsim")
except Exception:  # pragma: no cover
    VERSION = "0.1.0"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_OVERFLOW = 3  # more than half of the replicas hit the toppling cap


def _utcnow():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def write_jsonl(path: Path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _print_csv(path: Path):
    sys.stdout.write(Path(path).read_text(encoding="utf-8"))


def _default_threads():
    try:
        return max(1, int(os.environ.get("ARWSIM_THREADS", "1")))
    except ValueError:
        return 1


def _int_grid(gmin, gmax, points):
    grid = np.unique(np.geomspace(gmin, gmax, points).round().astype(np.int64))
    return grid


def _load_fixture(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    stacks = FixtureStacks(
        data.get("stacks", {}), seed=int(data.get("seed", 0)), lam=float(data.get("lambda", 1.0))
    )
    cfg = None
    if "config" in data:
        sites = {int(s): int(c) for s, c in data["config"].items()}
        if "window" in data:
            a, b = data["window"]
        else:
            a, b = min(sites), max(sites)
        cfg = Configuration.empty(int(a), int(b))
        for s, c in sites.items():
            cfg.count[s - cfg.a] = c
    V = tuple(data["V"]) if "V" in data else None
    return stacks, cfg, V


class _Run:
    """Collects outputs and writes the manifest at the end."""

    def __init__(self, args, out_dir):
        self.args = args
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.started = _utcnow()

    def path(self, name):
        self.outputs.append(name)
        return self.out / name

    def finish(self):
        params = {
            k: v for k, v in vars(self.args).items() if k not in ("func", "out", "subcommand")
        }
        manifest = {
            "subcommand": self.args.subcommand,
            "params": params,
            "seed": getattr(self.args, "seed", None),
            "version": VERSION,
            "started": self.started,
            "finished": _utcnow(),
            "outputs": sorted(self.outputs),
        }
        with open(self.out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")


def build_argv(manifest: dict) -> list[str]:
    """Reconstruct the command line of a recorded run (for replay)."""
    argv = [manifest["subcommand"]]
    for key, value in sorted(manifest["params"].items()):
        if value is None or isinstance(value, bool) and not value:
            continue
        if key == "lam":
            key = "lambda"
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            argv.append(flag)
        elif isinstance(value, (list, tuple)):
            argv.append(flag)
            argv.extend(str(v) for v in value)
        else:
            argv.extend([flag, str(value)])
    return argv


def replay_manifest(manifest_path, out_dir) -> int:
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    return main(build_argv(manifest) + ["--out", str(out_dir)])


def _overflow_exit(overflowed, replicas):
    return EXIT_OVERFLOW if replicas and overflowed * 2 > replicas else EXIT_OK


# ---------------------------------------------------------------- subcommands


def cmd_stabilize(args):
    run = _Run(args, args.out)
    if args.fixture:
        stacks, cfg, V = _load_fixture(args.fixture)
        if cfg is None:
            raise SystemExit("fixture file must provide a config")
        if args.V:
            V = tuple(args.V)
        if V is None:
            V = (cfg.a, cfg.b)
    else:
        if args.window is None:
            raise SystemExit("either --fixture or --window is required")
        a, b = args.window
        stacks = InstructionStacks(seed=args.seed, lam=args.lam)
        cfg = sample_bernoulli_config(args.rho, (a, b), args.seed)
        V = tuple(args.V) if args.V else (a + 1, b - 1)
    result = stabilize(cfg, V, stacks, policy=args.policy, cap=args.cap)
    rows = [
        (
            v,
            result.odometer.value(v),
            result.final.count_at(v),
            int(result.final.is_asleep(v)),
        )
        for v in range(result.final.a, result.final.b + 1)
    ]
    summary = run.path("summary.csv")
    write_csv(summary, ["site", "odometer", "count", "asleep"], rows)
    meta = run.path("result.json")
    with open(meta, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "topple_count": result.topple_count,
                "exited_left": result.exited_left,
                "exited_right": result.exited_right,
            },
            fh,
            sort_keys=True,
        )
        fh.write("\n")
    if not args.no_figures:
        sites = list(range(result.odometer.a, result.odometer.b + 1))
        reporting.profile_figure(
            sites, [result.odometer.value(v) for v in sites], "odometer",
            "stabilizing odometer", run.path("odometer.png"),
        )
    run.finish()
    _print_csv(summary)
    return EXIT_OK


def cmd_tail(args):
    run = _Run(args, args.out)
    grid = _int_grid(args.grid_min, args.grid_max, args.grid_points)
    tail = experiments.tail_experiment(
        args.lam, args.rho, args.N, grid, args.replicas, args.seed,
        cap=args.cap, threads=args.threads,
    )
    records = run.path("records.jsonl")
    write_jsonl(
        records,
        (
            {
                "replica": i,
                "m0": int(tail.m0[i]),
                "topples": int(tail.topples[i]),
                "overflow": bool(tail.overflow[i]),
            }
            for i in range(args.replicas)
        ),
    )
    summary = run.path("summary.csv")
    write_csv(
        summary,
        ["n", "survival", "stderr"],
        [(int(n), repr(float(s)), repr(float(e))) for n, s, e in zip(tail.n_grid, tail.survival, tail.stderr)],
    )
    fit = None
    try:
        fit = experiments.fit_stretched_exponential(tail)
    except ValueError:
        pass
    if not args.no_figures:
        reporting.survival_figure(tail, fit, run.path("survival.png"))
    run.finish()
    _print_csv(summary)
    return _overflow_exit(tail.overflowed, args.replicas)


def cmd_fit(args):
    run = _Run(args, args.out)
    with open(args.input, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    grid = np.array([int(r["n"]) for r in rows], dtype=np.int64)
    survival = np.array([float(r["survival"]) for r in rows])
    tail = experiments.TailEstimate(
        lam=float("nan"), rho=float("nan"), N=0, n_grid=grid, survival=survival,
        stderr=np.zeros_like(survival), replicas=0, overflowed=0, seed=0,
        m0=np.zeros(0, dtype=np.int64), topples=np.zeros(0, dtype=np.int64),
        overflow=np.zeros(0, dtype=bool),
    )
    n_range = (args.n_min, args.n_max) if args.n_min or args.n_max else None
    if n_range:
        n_range = (args.n_min or 1, args.n_max or int(grid.max()))
    fit = experiments.fit_stretched_exponential(tail, n_range=n_range)
    summary = run.path("fit.csv")
    write_csv(
        summary,
        ["slope", "c_hat", "r2", "n_used"],
        [(repr(fit.slope), repr(fit.c_hat), repr(fit.r2), fit.n_used)],
    )
    if not args.no_figures:
        reporting.fit_figure(grid, survival, fit, run.path("fit.png"))
    run.finish()
    _print_csv(summary)
    return EXIT_OK


def cmd_mean(args):
    run = _Run(args, args.out)
    res = experiments.mean_odometer(
        args.lam, args.rho, args.N, args.replicas, args.seed, cap=args.cap, threads=args.threads
    )
    records = run.path("records.jsonl")
    write_jsonl(
        records,
        ({"replica": i, "m0": int(res.m0[i])} for i in range(args.replicas)),
    )
    summary = run.path("summary.csv")
    write_csv(
        summary,
        ["mean", "stderr", "ci_low", "ci_high", "tail_sum", "overflowed"],
        [
            (
                repr(res.mean),
                repr(res.stderr),
                repr(res.ci_low),
                repr(res.ci_high),
                repr(res.tail_sum),
                res.overflowed,
            )
        ],
    )
    if not args.no_figures:
        reporting.histogram_figure(
            res.m0, "m(0)", f"odometer at 0, lambda={args.lam}, rho={args.rho}",
            run.path("m0_hist.png"), vline=res.mean,
        )
    run.finish()
    _print_csv(summary)
    return _overflow_exit(res.overflowed, args.replicas)


def cmd_supercritical(args):
    run = _Run(args, args.out)
    res = experiments.supercritical_experiment(
        args.lam, args.epsilon, args.n, args.replicas, args.seed, args.chat,
        cap=args.cap, threads=args.threads,
    )
    records = run.path("records.jsonl")
    write_jsonl(records, ({"replica": i, "g0": int(res.g0[i])} for i in range(args.replicas)))
    summary = run.path("summary.csv")
    write_csv(
        summary,
        ["n", "particles", "median_g0", "threshold", "frac_exceeding", "overflowed"],
        [
            (
                res.n,
                res.particles,
                repr(res.median_g0),
                repr(res.threshold),
                repr(res.frac_exceeding),
                res.overflowed,
            )
        ],
    )
    if not args.no_figures:
        reporting.histogram_figure(
            res.g0, "g(0)", f"supercritical odometer at 0, n={args.n}",
            run.path("g0_hist.png"), vline=res.threshold,
        )
    run.finish()
    _print_csv(summary)
    return _overflow_exit(res.overflowed, args.replicas)


def cmd_rho_c_dd(args):
    run = _Run(args, args.out)
    res = experiments.driven_dissipative_rho_c(
        args.lam, args.n, args.injections, args.burn_in, args.seed, cap=args.cap
    )
    records = run.path("records.jsonl")
    write_jsonl(
        records,
        (
            {"injection": i, "density": repr(float(res.densities[i]))}
            for i in range(0, len(res.densities), max(1, len(res.densities) // 2000))
        ),
    )
    summary = run.path("summary.csv")
    write_csv(
        summary,
        ["method", "lambda", "estimate", "uncertainty", "n", "injections", "burn_in"],
        [
            (
                res.estimate.method,
                args.lam,
                repr(res.estimate.estimate),
                repr(res.estimate.uncertainty),
                args.n,
                args.injections,
                args.burn_in,
            )
        ],
    )
    if not args.no_figures:
        reporting.dd_figure(res, run.path("density_trace.png"))
    run.finish()
    _print_csv(summary)
    return EXIT_OK


def cmd_rho_c_scan(args):
    run = _Run(args, args.out)
    grid = np.arange(args.rho_min, args.rho_max + args.rho_step / 2, args.rho_step)
    res = experiments.fixation_phase_scan(
        args.lam, grid, args.N, args.replicas, args.cap, args.seed,
        alpha=args.alpha, threads=args.threads,
    )
    records = run.path("records.jsonl")
    write_jsonl(
        records,
        (
            {
                "rho": repr(float(res.rho_grid[i])),
                "replica": rep,
                "m0": int(res.m0[i, rep]),
            }
            for i in range(len(res.rho_grid))
            for rep in range(args.replicas)
        ),
    )
    summary = run.path("summary.csv")
    write_csv(
        summary,
        ["rho", "fixation_fraction", "overflow_count"],
        [
            (repr(float(r)), repr(float(f)), int(o))
            for r, f, o in zip(res.rho_grid, res.fixation_fraction, res.overflow_counts)
        ],
    )
    est = run.path("estimate.csv")
    write_csv(
        est,
        ["method", "lambda", "estimate", "uncertainty"],
        [(res.estimate.method, args.lam, repr(res.estimate.estimate), repr(res.estimate.uncertainty))],
    )
    if not args.no_figures:
        reporting.scan_figure(res, run.path("phase_scan.png"))
    run.finish()
    _print_csv(summary)
    total = len(res.rho_grid) * args.replicas
    return _overflow_exit(int(res.overflow_counts.sum()), total) if args.strict_overflow else EXIT_OK


def _stacks_and_sigma(args):
    if args.fixture:
        stacks, cfg, _ = _load_fixture(args.fixture)
        return stacks, cfg
    stacks = InstructionStacks(seed=args.seed, lam=args.lam)
    sigma = None
    if args.rho > 0:
        sigma = sample_bernoulli_config(args.rho, (1, max(args.n - 1, 1)), args.seed)
    return stacks, sigma


def _write_extended(run, odo, name="summary.csv"):
    summary = run.path(name)
    write_csv(
        summary,
        ["site", "value", "n_left", "n_right", "sleeper"],
        [
            (k, int(odo.values[k]), int(odo.n_left[k]), int(odo.n_right[k]), int(odo.sleeper[k]))
            for k in range(odo.n + 1)
        ],
    )
    return summary


def cmd_minimal_odometer(args):
    run = _Run(args, args.out)
    stacks, sigma = _stacks_and_sigma(args)
    odo = extended.minimal_odometer(sigma, args.u0, args.f0, args.n, stacks)
    summary = _write_extended(run, odo)
    if not args.no_figures:
        reporting.profile_figure(
            list(range(args.n + 1)), list(map(int, odo.values)), "value",
            "minimal extended odometer", run.path("profile.png"),
        )
    run.finish()
    _print_csv(summary)
    return EXIT_OK


def cmd_greedy(args):
    run = _Run(args, args.out)
    stacks, sigma = _stacks_and_sigma(args)
    odo = extended.greedy_stable_odometer(
        sigma, args.u0, args.f0, args.n, stacks, lookahead=args.lookahead
    )
    summary = _write_extended(run, odo)
    if not args.no_figures:
        reporting.profile_figure(
            list(range(args.n + 1)), list(map(int, odo.values)), "value",
            f"greedy stable odometer (sleepers: {odo.sleep_total()})", run.path("profile.png"),
        )
    run.finish()
    _print_csv(summary)
    return EXIT_OK


def cmd_enumerate(args):
    run = _Run(args, args.out)
    stacks, sigma = _stacks_and_sigma(args)
    result = extended.enumerate_stable_extended(
        sigma, args.u0, args.f0, args.n, args.value_cap, stacks
    )
    minimal = extended.minimal_odometer(sigma, args.u0, args.f0, args.n, stacks)
    records = run.path("records.jsonl")
    write_jsonl(
        records,
        (
            {
                "values": [int(v) for v in odo.values],
                "path": extended.to_infection_path(odo, minimal, stacks).steps,
            }
            for odo in result
        ),
    )
    summary = run.path("summary.csv")
    write_csv(summary, ["members", "truncated"], [(len(result), int(result.truncated))])
    run.finish()
    _print_csv(summary)
    return EXIT_OK


def cmd_chat(args):
    run = _Run(args, args.out)
    res = extended.estimate_chat(
        args.lam, args.n, args.replicas, args.seed, u0=args.u0, f0=args.f0,
        lookahead=args.lookahead,
    )
    records = run.path("records.jsonl")
    write_jsonl(
        records,
        (
            {"replica": i, "sleep_rate": repr(float(res.per_replica[i]))}
            for i in range(args.replicas)
        ),
    )
    summary = run.path("summary.csv")
    write_csv(
        summary,
        ["lambda", "n", "replicas", "estimate", "stderr", "ci_low", "ci_high"],
        [
            (
                args.lam,
                args.n,
                args.replicas,
                repr(res.estimate),
                repr(res.stderr),
                repr(res.ci_low),
                repr(res.ci_high),
            )
        ],
    )
    if not args.no_figures:
        reporting.histogram_figure(
            res.per_replica, "sleepers per site", f"greedy sleeper density, n={args.n}",
            run.path("chat_hist.png"), vline=res.estimate,
        )
    run.finish()
    _print_csv(summary)
    return EXIT_OK


# ------------------------------------------------------------------- parsing


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _density(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"density must lie in [0, 1], got {text}")
    return value


def _add_common(sp, figures=True):
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--threads", type=int, default=_default_threads(),
                    help="worker threads (never affects outputs)")
    if figures:
        sp.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="arwsim",
        description="Simulation laboratory for one-dimensional activated random walk",
    )
    parser.add_argument("--version", action="version", version=f"arwsim {VERSION}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("stabilize", help="stabilize one sampled or fixture configuration")
    sp.add_argument("--lambda", dest="lam", type=_positive_float, default=1.0)
    sp.add_argument("--rho", type=_density, default=0.3)
    sp.add_argument("--window", type=int, nargs=2, default=None, metavar=("A", "B"))
    sp.add_argument("--V", type=int, nargs=2, default=None, metavar=("A", "B"),
                    help="stable set (default: window shrunk by one site)")
    sp.add_argument("--policy", choices=("rightmost", "sweep", "random", "queue"),
                    default="rightmost")
    sp.add_argument("--cap", type=int, default=experiments.DEFAULT_CAP)
    sp.add_argument("--fixture", default=None,
                    help="JSON file with explicit instruction prefixes and config")
    _add_common(sp)
    sp.set_defaults(func=cmd_stabilize)

    sp = sub.add_parser("tail", help="empirical odometer tail")
    sp.add_argument("--lambda", dest="lam", type=_positive_float, default=1.0)
    sp.add_argument("--rho", type=_density, required=True)
    sp.add_argument("--N", type=int, default=1000, help="half-window")
    sp.add_argument("--replicas", type=int, default=10000)
    sp.add_argument("--cap", type=int, default=experiments.DEFAULT_CAP)
    sp.add_argument("--grid-min", type=int, default=1)
    sp.add_argument("--grid-max", type=int, default=10000)
    sp.add_argument("--grid-points", type=int, default=40)
    _add_common(sp)
    sp.set_defaults(func=cmd_tail)

    sp = sub.add_parser("fit", help="stretched-exponential fit of a tail summary")
    sp.add_argument("--input", required=True, help="summary.csv from the tail subcommand")
    sp.add_argument("--n-min", type=int, default=None)
    sp.add_argument("--n-max", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("mean", help="mean odometer at site 0")
    sp.add_argument("--lambda", dest="lam", type=_positive_float, default=1.0)
    sp.add_argument("--rho", type=_density, required=True)
    sp.add_argument("--N", type=int, default=1000)
    sp.add_argument("--replicas", type=int, default=10000)
    sp.add_argument("--cap", type=int, default=experiments.DEFAULT_CAP)
    _add_common(sp)
    sp.set_defaults(func=cmd_mean)

    sp = sub.add_parser("supercritical", help="quadratic odometer growth above criticality")
    sp.add_argument("--lambda", dest="lam", type=_positive_float, default=1.0)
    sp.add_argument("--epsilon", type=_positive_float, default=0.1)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--replicas", type=int, default=200)
    sp.add_argument("--chat", type=_density, required=True,
                    help="baseline density (e.g. the chat estimate)")
    sp.add_argument("--cap", type=int, default=experiments.DEFAULT_CAP)
    _add_common(sp)
    sp.set_defaults(func=cmd_supercritical)

    sp = sub.add_parser("rho-c-dd", help="critical density via driven-dissipative dynamics")
    sp.add_argument("--lambda", dest="lam", type=_positive_float, default=1.0)
    sp.add_argument("--n", type=int, default=400)
    sp.add_argument("--injections", type=int, default=40000)
    sp.add_argument("--burn-in", type=int, default=10000)
    sp.add_argument("--cap", type=int, default=experiments.DEFAULT_CAP)
    _add_common(sp)
    sp.set_defaults(func=cmd_rho_c_dd)

    sp = sub.add_parser("rho-c-scan", help="critical density via fixation phase scan")
    sp.add_argument("--lambda", dest="lam", type=_positive_float, default=1.0)
    sp.add_argument("--rho-min", type=_density, default=0.1)
    sp.add_argument("--rho-max", type=_density, default=0.95)
    sp.add_argument("--rho-step", type=_positive_float, default=0.05)
    sp.add_argument("--N", type=int, default=500)
    sp.add_argument("--replicas", type=int, default=10)
    sp.add_argument("--cap", type=int, default=2 * 10**6,
                    help="per-replica toppling cap (doubles as divergence signal)")
    sp.add_argument("--alpha", type=_positive_float, default=1.0,
                    help="divergence heuristic: m(0) > alpha N^2")
    sp.add_argument("--strict-overflow", action="store_true",
                    help="exit 3 when most replicas overflow (off by default: "
                         "overflow is the expected supercritical signature)")
    _add_common(sp)
    sp.set_defaults(func=cmd_rho_c_scan)

    for name, fn, extra in (
        ("minimal-odometer", cmd_minimal_odometer, ()),
        ("greedy", cmd_greedy, ("lookahead",)),
        ("enumerate", cmd_enumerate, ("value_cap",)),
    ):
        sp = sub.add_parser(name, help=f"{name.replace('-', ' ')} construction")
        sp.add_argument("--lambda", dest="lam", type=_positive_float, default=1.0)
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--u0", type=int, default=0)
        sp.add_argument("--f0", type=int, default=0)
        sp.add_argument("--rho", type=_density, default=0.0,
                        help="Bernoulli density of the initial configuration")
        sp.add_argument("--fixture", default=None)
        if "lookahead" in extra:
            sp.add_argument("--lookahead", type=int, default=extended.DEFAULT_LOOKAHEAD)
        if "value_cap" in extra:
            sp.add_argument("--value-cap", type=int, default=3)
        _add_common(sp, figures=(name != "enumerate"))
        if name == "enumerate":
            sp.set_defaults(no_figures=True)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("chat", help="greedy sleeper-density (growth-rate) estimate")
    sp.add_argument("--lambda", dest="lam", type=_positive_float, default=1.0)
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--replicas", type=int, default=50)
    sp.add_argument("--u0", type=int, default=0)
    sp.add_argument("--f0", type=int, default=0)
    sp.add_argument("--lookahead", type=int, default=extended.DEFAULT_LOOKAHEAD)
    _add_common(sp)
    sp.set_defaults(func=cmd_chat)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out is None:
        args.out = os.path.join("arwsim_out", args.subcommand)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
