import subprocess
import sys

import pytest

from qttfem import cli


def test_verify(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out and all(line.startswith("PASS") for line in out)


def test_solve_ms_writes_solution(capsys, tmp_path):
    assert cli.main(["solve-ms", "--lam", "4", "--level", "10", "--out", str(tmp_path / "u.qtt")]) == 0
    out = capsys.readouterr().out
    assert "|u|_H1" in out and (tmp_path / "u.qtt").exists()


def test_solve_limit_reports_error(capsys, tmp_path):
    assert cli.main(["solve-limit", "--lam", "6", "--level", "8", "--out", str(tmp_path / "lim")]) == 0
    out = capsys.readouterr().out
    assert "triple-norm error" in out and (tmp_path / "lim" / "manifest.json").exists()


def test_bench_writes_csv(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("QTTFEM_OUT", str(tmp_path))
    assert cli.main(["bench", "conv", "--lam", "3", "--levels", "5-8", "--l-ref", "11"]) == 0
    out = capsys.readouterr().out
    assert "order_lam3" in out and (tmp_path / "ms1d" / "ms1d.csv").exists()


def test_bench_from_config(capsys, tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[experiment]\nexperiment = homog_err\nlambdas = 3-4\nlevels = 6\n")
    assert cli.main(["bench", "homog-err", "--config", str(cfg), "--out", str(tmp_path / "h")]) == 0
    assert "rate" in capsys.readouterr().out


def test_errors_exit_with_status_2(capsys):
    assert cli.main(["bench", "conv", "--levels", "8-4"]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        cli.main(["bench", "nonsense"])


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "qttfem.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("solve-ms", "solve-limit", "bench", "verify"):
        assert cmd in r.stdout
