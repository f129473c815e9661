import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from chaoskit import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def small_check(tmp_path, name, extra=()):
    return run(tmp_path, "check", "--set", f"family.name={name}", "--set", "check.depth=3",
               "--set", "check.count=20", *extra)


def test_check_exit_codes(tmp_path, capsys):
    assert cli.main(["check", "--config", str(CONFIGS / "fd_check.ini"), "--out", str(tmp_path / "fd")]) == 0
    assert cli.main(["check", "--config", str(CONFIGS / "blk2_check.ini"), "--out", str(tmp_path / "b")]) == 1
    out = capsys.readouterr().out
    assert "block_nondeterminism" in out and "FAIL" in out


@pytest.mark.parametrize("argv", [
    ["check", "--set", "family.name=NOPE"],
    ["simulate", "--set", "run.m=100"],
    ["check", "--config", "/nonexistent/cfg.ini"],
    ["check", "--set", "family.bogus=1"],
    ["check", "--set", "broken"],
    ["check", "--seed", "-1"],
    ["verify", "--set", "verify.suites=nope"],
    ["frobnicate"],
])
def test_config_errors_exit_2(tmp_path, capsys, argv):
    assert run(tmp_path, *argv) == 2
    err = capsys.readouterr().err
    assert argv[0] == "frobnicate" or err.startswith("chaoskit: error:")


def test_malformed_config_file(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("no section header\n")
    assert cli.main(["check", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_check_json_layout(tmp_path):
    assert small_check(tmp_path, "FD", ["--seed", "3", "--threads", "2"]) == 0
    doc = json.loads((tmp_path / "check.json").read_text())
    assert list(doc) == ["command", "config", "report"]
    assert doc["config"]["run"] == {"seed": "3"}
    assert doc["config"]["check"] == {"count": "20", "depth": "3"}
    assert list(doc["report"]) == ["family", "checks", "alpha_by_depth", "thresholds", "passed", "note"]


def test_simulate_single_path_csv(tmp_path):
    assert run(tmp_path, "simulate", "--set", "run.n=1", "--set", "run.m=16", "--set", "family.L=3") == 0
    raw = (tmp_path / "paths.csv").read_bytes()
    assert raw.endswith(b"\r\n") and raw.count(b"\r\n") == 18
    rows = list(csv.reader(io.StringIO(raw.decode())))
    assert rows[0] == ["t", "X"] + [f"DX_{j}" for j in range(1, 17)]
    assert len(rows) == 18 and all(len(r) == 18 for r in rows)
    assert float(rows[1][0]) == 0.0 and float(rows[-1][0]) == 1.0
    assert float(rows[1][1]) == 0.0


def test_simulate_many_paths_and_svg(tmp_path):
    assert run(tmp_path, "simulate", "--set", "run.n=12", "--set", "run.m=8", "--svg") == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {f"paths_{i:02d}.csv" for i in range(12)} | {"paths.svg"}
    assert (tmp_path / "paths.svg").read_text().startswith("<svg")


def test_seed_changes_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d, s in ((a, "1"), (b, "2")):
        cli.main(["simulate", "--set", "run.n=1", "--set", "run.m=8", "--seed", s, "--out", str(d)])
    assert (a / "paths.csv").read_bytes() != (b / "paths.csv").read_bytes()


def test_sde_small(tmp_path):
    code = run(tmp_path, "sde", "--config", str(CONFIGS / "fd_sde.ini"), "--set", "run.n=40", "--set", "run.m=64")
    assert code in (0, 1)
    doc = json.loads((tmp_path / "sde.json").read_text())
    assert list(doc) == ["command", "config", "report"]
    head = (tmp_path / "sde_samples.csv").read_text().splitlines()[0]
    assert head == "Y_1,Y_2,lambda_min,lambda_max"
    assert run(tmp_path, "sde", "--set", "sde.y0=1, 2, 3") == 2


def test_python_backend_selected_in_subprocess(tmp_path):
    env = dict(os.environ, CHAOSKIT_BACKEND="python")
    code = "from chaoskit import backend; print(backend.NAME)"
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "python"
    res = subprocess.run(
        [sys.executable, "-m", "chaoskit.cli", "simulate", "--set", "run.n=1", "--set", "run.m=8",
         "--out", str(tmp_path / "py")], env=env, capture_output=True, text=True)
    assert res.returncode == 0
    cli.main(["simulate", "--set", "run.n=1", "--set", "run.m=8", "--out", str(tmp_path / "default")])
    py = (tmp_path / "py" / "paths.csv").read_text().splitlines()
    df = (tmp_path / "default" / "paths.csv").read_text().splitlines()
    assert py[0] == df[0] and len(py) == len(df)
    for a, b in zip(py[1:], df[1:]):
        assert [float(x) for x in a.split(",")] == pytest.approx([float(x) for x in b.split(",")], abs=1e-12)
