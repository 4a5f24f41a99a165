"""CLI surface: exit codes and default output location."""

import pytest

pytest.importorskip("wkg2d_reporter")

from wkg2d_reporter.cli import main


def test_cli_renders_into_out(run_dir, tmp_path, capsys):
    out = tmp_path / "report-out"
    rc = main([str(run_dir), "--out", str(out)])
    assert rc == 0
    assert (out / "report.md").exists()
    assert "report.md" in capsys.readouterr().out


def test_cli_defaults_out_inside_run(run_dir, capsys):
    rc = main([str(run_dir)])
    assert rc == 0
    assert (run_dir / "report" / "report.md").exists()


def test_cli_missing_dir_exits_nonzero(tmp_path, capsys):
    rc = main([str(tmp_path / "nope")])
    assert rc == 2
    assert "MissingArtifactError" in capsys.readouterr().err


def test_cli_warns_on_partial(run_dir, capsys):
    (run_dir / "blowup.json").unlink()
    rc = main([str(run_dir)])
    assert rc == 0
    assert "warning:" in capsys.readouterr().err
