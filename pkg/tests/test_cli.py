import json
import shutil
import subprocess
import sys

import pytest

from koper_slow.cli import main


def test_fig3_exit_zero(tmp_path, capsys):
    assert main(["fig3", "--out", str(tmp_path), "--no-plot"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["files"] == ["fig3.csv"]
    assert 1.8 <= summary["results"]["x_max_0_5"] <= 2.2


def test_config_error_exit_two(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("preset = custom\nalpha = 2.5\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_config_preset_mismatch(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("preset = fig3\n")
    assert main(["manifold", "--config", str(cfg)]) == 2


def test_negative_seed_exit_two(tmp_path):
    assert main(["fig3", "--seed", "-1", "--out", str(tmp_path)]) == 2


def test_usage_error_exit_two():
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2


def test_precondition_exit_three(tmp_path):
    bad = tmp_path / "manifest.json"
    bad.write_text("not json")
    assert main(["rerun", str(bad)]) == 3
    assert main(["analyze-equilibrium", "--eps", "1.5"]) == 3


def test_blow_up_exit_four(tmp_path, capsys):
    assert main(["simulate", "--seed", "0", "--dt", "1e-3", "--out", str(tmp_path)]) == 4
    assert "guard" in capsys.readouterr().err


def test_analyze_equilibrium(tmp_path, capsys):
    assert main(["analyze-equilibrium", "--eps", "0.05", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2
    assert (tmp_path / "equilibrium.csv").read_text().splitlines() == lines


def test_rerun_command(tmp_path, capsys):
    assert main(["fig3", "--out", str(tmp_path / "a"), "--no-plot", "--dt", "0.01"]) == 0
    capsys.readouterr()
    assert main(["rerun", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "fig3.csv").read_bytes() == (tmp_path / "b" / "fig3.csv").read_bytes()


def test_console_script(tmp_path):
    exe = shutil.which("koper-slow")
    cmd = [exe] if exe else [sys.executable, "-m", "koper_slow.cli"]
    proc = subprocess.run(cmd + ["analyze-equilibrium", "--eps", "0.01", "0.1"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert len(proc.stdout.splitlines()) == 3
