"""CLI surface: outputs, exit codes, determinism, manifest replay."""

import csv
import json
from pathlib import Path

import pytest

from arwsim import cli

FIXTURE = {
    "lambda": 1.0,
    "seed": 0,
    "config": {"0": 1, "1": 1},
    "stacks": {"0": "RL", "1": "SRSL", "2": "SL"},
    "window": [0, 2],
    "V": [0, 2],
}


def _run(argv):
    return cli.main([str(a) for a in argv])


def _read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_stabilize_fixture_end_to_end(tmp_path, capsys):
    fx = tmp_path / "fx.json"
    fx.write_text(json.dumps(FIXTURE))
    out = tmp_path / "out"
    rc = _run(["stabilize", "--fixture", fx, "--out", out])
    assert rc == 0
    rows = _read_csv(out / "summary.csv")
    table = {int(r[0]): (int(r[1]), int(r[2]), int(r[3])) for r in rows[1:]}
    assert table[0] == (1, 0, 0)
    assert table[1] == (3, 1, 1)
    assert table[2] == (1, 1, 1)
    meta = json.loads((out / "result.json").read_text())
    assert meta["topple_count"] == 5
    assert (out / "odometer.png").exists()
    assert (out / "manifest.json").exists()
    # the summary is echoed to stdout
    assert "site,odometer" in capsys.readouterr().out


def test_stabilize_sampled_window(tmp_path):
    out = tmp_path / "out"
    rc = _run(["stabilize", "--window", -20, 20, "--rho", 0.3, "--seed", 3,
               "--out", out, "--no-figures"])
    assert rc == 0
    assert not (out / "odometer.png").exists()


def test_stabilize_requires_window_or_fixture(tmp_path):
    with pytest.raises(SystemExit):
        _run(["stabilize", "--out", tmp_path / "x"])


def test_bad_arguments_exit_2(tmp_path):
    with pytest.raises(SystemExit) as ei:
        _run(["tail", "--rho", "1.7", "--out", tmp_path / "x"])
    assert ei.value.code == 2
    with pytest.raises(SystemExit):
        _run(["no-such-command"])
    # runtime errors surface as exit code 2 without a traceback
    rc = _run(["fit", "--input", tmp_path / "missing.csv", "--out", tmp_path / "y"])
    assert rc == 2


def test_tail_outputs_and_rerun_identical(tmp_path):
    args = ["tail", "--rho", 0.3, "--N", 100, "--replicas", 80,
            "--grid-min", 1, "--grid-max", 50, "--grid-points", 10, "--seed", 9]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert _run(args + ["--out", out1]) == 0
    assert _run(args + ["--out", out2]) == 0
    for name in ("records.jsonl", "summary.csv", "survival.png"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_threads_do_not_change_outputs(tmp_path):
    base = ["mean", "--rho", 0.3, "--N", 60, "--replicas", 60, "--seed", 4,
            "--no-figures"]
    out1, out2 = tmp_path / "t1", tmp_path / "t4"
    assert _run(base + ["--threads", 1, "--out", out1]) == 0
    assert _run(base + ["--threads", 4, "--out", out2]) == 0
    assert (out1 / "records.jsonl").read_bytes() == (out2 / "records.jsonl").read_bytes()
    assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()


def test_manifest_replay_byte_identical(tmp_path):
    out = tmp_path / "orig"
    assert _run(["tail", "--rho", 0.25, "--N", 80, "--replicas", 50,
                 "--grid-min", 1, "--grid-max", 30, "--grid-points", 8,
                 "--seed", 12, "--out", out]) == 0
    replay = tmp_path / "replay"
    assert cli.replay_manifest(out / "manifest.json", replay) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    for name in manifest["outputs"]:
        assert (out / name).read_bytes() == (replay / name).read_bytes()


def test_overflow_exit_code_3(tmp_path):
    # a tiny cap at high density makes most replicas overflow
    rc = _run(["mean", "--rho", 0.9, "--N", 60, "--replicas", 20, "--cap", 50,
               "--out", tmp_path / "x", "--no-figures"])
    assert rc == 3


def test_fit_roundtrip(tmp_path):
    out = tmp_path / "tail"
    assert _run(["tail", "--rho", 0.35, "--N", 150, "--replicas", 4000,
                 "--grid-min", 1, "--grid-max", 60, "--grid-points", 20,
                 "--seed", 0, "--out", out, "--no-figures"]) == 0
    fit_out = tmp_path / "fit"
    assert _run(["fit", "--input", out / "summary.csv", "--out", fit_out]) == 0
    rows = _read_csv(fit_out / "fit.csv")
    slope = float(rows[1][0])
    assert 0.0 < slope < 2.0


def test_minimal_and_greedy_subcommands(tmp_path):
    m_out = tmp_path / "m"
    g_out = tmp_path / "g"
    assert _run(["minimal-odometer", "--n", 15, "--u0", 80, "--seed", 2,
                 "--out", m_out, "--no-figures"]) == 0
    assert _run(["greedy", "--n", 15, "--u0", 80, "--seed", 2,
                 "--out", g_out, "--no-figures"]) == 0
    m_rows = _read_csv(m_out / "summary.csv")[1:]
    g_rows = _read_csv(g_out / "summary.csv")[1:]
    assert len(m_rows) == len(g_rows) == 16
    for mr, gr in zip(m_rows, g_rows):
        assert int(gr[1]) >= int(mr[1])  # greedy dominates minimal pointwise


def test_enumerate_subcommand(tmp_path):
    out = tmp_path / "e"
    assert _run(["enumerate", "--n", 5, "--u0", 40, "--value-cap", 2,
                 "--seed", 55, "--out", out]) == 0
    rows = _read_csv(out / "summary.csv")
    members = int(rows[1][0])
    records = [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]
    assert len(records) == members
    for rec in records:
        assert rec["path"][0] == [0, 0]


def test_rho_c_subcommands(tmp_path):
    dd = tmp_path / "dd"
    assert _run(["rho-c-dd", "--n", 50, "--injections", 600, "--burn-in", 150,
                 "--out", dd, "--no-figures"]) == 0
    est = float(_read_csv(dd / "summary.csv")[1][2])
    assert 0.0 < est < 1.0
    scan = tmp_path / "scan"
    assert _run(["rho-c-scan", "--rho-min", 0.3, "--rho-max", 0.9, "--rho-step", 0.3,
                 "--N", 80, "--replicas", 2, "--out", scan, "--no-figures"]) == 0
    assert (scan / "estimate.csv").exists()


def test_chat_subcommand(tmp_path):
    out = tmp_path / "chat"
    assert _run(["chat", "--n", 150, "--replicas", 4, "--out", out,
                 "--no-figures"]) == 0
    rows = _read_csv(out / "summary.csv")
    est = float(rows[1][3])
    assert 0.0 < est < 1.0


def test_supercritical_subcommand(tmp_path):
    out = tmp_path / "sc"
    assert _run(["supercritical", "--chat", 0.9, "--n", 40, "--replicas", 10,
                 "--out", out, "--no-figures"]) == 0
    rows = _read_csv(out / "summary.csv")
    assert int(rows[1][1]) == 40  # particles = (0.9 + 0.1) * n


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as ei:
        _run(["--version"])
    assert ei.value.code == 0
    assert "arwsim" in capsys.readouterr().out


def test_build_argv_skips_defaults():
    manifest = {"subcommand": "chat",
                "params": {"lam": 1.0, "n": 200, "no_figures": False, "out2": None}}
    argv = cli.build_argv(manifest)
    assert "--no-figures" not in argv
    assert "--lambda" in argv
