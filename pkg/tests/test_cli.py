import csv
import io
import json
import subprocess
import sys

import pytest

from plstm import cli
from plstm.verify import CaseResult, RunReport


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_verify_1d_passes(capsys, tmp_path):
    out = tmp_path / "cases.csv"
    assert cli.main(["verify", "--suite", "1d", "--sizes", "8,64", "--seed", "1", "--out", str(out)]) == 0
    line = capsys.readouterr().out
    assert "suite=1d" in line and line.strip().endswith("pass")
    cases = rows(out.read_text())
    assert cases and all(c["passed"] == "1" for c in cases)
    assert max(float(c["rel_err"]) for c in cases) <= 1e-12


def test_verify_dmode_multitree(capsys):
    assert cli.main(["verify", "--suite", "dmode", "--sizes", "3"]) == 0
    assert "cases=2" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["verify", "--suite", "nonsense"],
    ["verify"],
    ["verify", "--suite", "1d", "--sizes", "0"],
    ["bench", "--sizes", "48"],
    ["frobnicate"],
    ["gen-arrows", "--count", "3", "--out", "unused"],
])
def test_usage_errors_exit_with_two(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == 2
    assert capsys.readouterr().err


def test_help_exits_cleanly(capsys):
    assert cli.main(["--help"]) == 0
    assert "verify" in capsys.readouterr().out


def test_tolerance_failure_exits_with_one(monkeypatch, capsys):
    bad = RunReport("1d", [CaseResult("1d/n8/gating", 1e-3, 1e-3, 1e-12)])
    monkeypatch.setattr("plstm.verify.run_suite", lambda *a, **k: bad)
    assert cli.main(["verify", "--suite", "1d"]) == 1
    captured = capsys.readouterr()
    assert "FAIL 1d/n8/gating" in captured.err and captured.out.strip().endswith("fail")


def test_bench_reports_merge_levels(capsys):
    assert cli.main(["bench", "--form", "parallel", "--sizes", "1,64", "--reps", "1"]) == 0
    table = rows(capsys.readouterr().out)
    assert [(r["size"], r["form"], r["merge_levels"]) for r in table] == [("1", "parallel", "0"), ("64", "parallel", "6")]
    assert all(int(r["wall_ns"]) > 0 for r in table)


def test_bench_all_forms_agree_at_256(capsys):
    assert cli.main(["bench", "--sizes", "256", "--reps", "1"]) == 0
    assert [r["form"] for r in rows(capsys.readouterr().out)] == ["recurrent", "parallel", "chunkwise"]


def test_decay_last_ratio(capsys):
    assert cli.main(["decay", "--alpha", "0.5", "--delta-max", "200"]) == 0
    table = rows(capsys.readouterr().out)
    assert len(table) == 200
    assert abs(float(table[-1]["ratio"]) - 1) <= 0.01
    assert float(table[1]["t_full_exact"]) == 0.5


def test_gen_arrows_twice_gives_identical_trees(tmp_path):
    for name in ("a", "b"):
        assert cli.main(["gen-arrows", "--count", "4", "--seed", "7", "--out", str(tmp_path / name)]) == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["count"] == 4


def test_train_toy_without_steps_is_at_chance(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["train-toy", "--steps", "0", "--count", "64", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["steps"] == 0
    assert abs(report["accuracy"] - 0.5) <= 3 * (0.25 / 64) ** 0.5
    assert (out / "loss.csv").read_text().count("\n") == 2
    assert (out / "checkpoint" / "manifest.json").is_file()
    assert (out / "data" / "labels.csv").is_file()


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "plstm.cli", "decay", "--delta-max", "3"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[0] == "delta,t_full_exact,asymptote,ratio"
