"""Config validation, CLI exit codes, artifact round-trips, determinism."""

import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from wkg2d import config as configmod
from wkg2d.cli import (
    EXIT_ABORTED,
    EXIT_ARTIFACTS,
    EXIT_CONFIG,
    EXIT_OK,
    main,
)
from wkg2d.config import (
    DEFAULTS,
    DomainTooSmall,
    MalformedConfig,
    OddGridRequired,
    UnknownKey,
    from_dict,
    parse_config,
)
from wkg2d.runner import read_snapshot

TINY = {
    "model": "model-i",
    "t_max": 4.0,
    "grid": {"n": 65, "L": 8.0},
    "record_stride": 2,
}


def write_cfg(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Config parsing.

def test_empty_config_takes_defaults():
    cfg = from_dict({})
    assert cfg.model == DEFAULTS["model"]
    assert cfg.eps == 0.01
    assert cfg.grid_n == 513
    assert cfg.grid_l == 62.0
    assert cfg.grid_order == 2
    assert cfg.coevolve is False  # model-i resolves the null default


def test_coevolve_default_follows_model():
    assert from_dict({"model": "model-ii"}).coevolve is True
    assert from_dict({"model": "model-ii", "coevolve": False}).coevolve is False


def test_unknown_key_rejected_with_name():
    with pytest.raises(UnknownKey, match="tmax"):
        from_dict({"tmax": 10.0})
    with pytest.raises(UnknownKey, match="grid.spacing"):
        from_dict({"grid": {"spacing": 0.1}})


def test_even_grid_rejected():
    with pytest.raises(OddGridRequired, match="512"):
        from_dict({"grid": {"n": 512}})


def test_bool_is_not_a_grid_size():
    with pytest.raises(configmod.ConfigError):
        from_dict({"grid": {"n": True}})


def test_domain_too_small_names_the_fix():
    with pytest.raises(DomainTooSmall, match=r"L >= t_max \+ 1"):
        from_dict({"t_max": 60.0, "grid": {"L": 30.0}})


def test_malformed_root():
    with pytest.raises(MalformedConfig):
        from_dict([1, 2, 3])


def test_malformed_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(MalformedConfig, match="broken.json"):
        parse_config(path)


def test_unknown_model_lists_kinds():
    with pytest.raises(configmod.ConfigError, match="model-i"):
        from_dict({"model": "model-iii"})


def test_order_restricted_to_2_and_4():
    with pytest.raises(configmod.ConfigError, match="order"):
        from_dict({"grid": {"order": 3}})
    assert from_dict({"grid": {"order": 4}}).grid_order == 4


def test_scalar_bounds():
    with pytest.raises(configmod.ConfigError):
        from_dict({"cfl": 0.0})
    with pytest.raises(configmod.ConfigError):
        from_dict({"cfl": 1.5})
    with pytest.raises(configmod.ConfigError):
        from_dict({"record_stride": 0})
    with pytest.raises(configmod.ConfigError):
        from_dict({"eps": -1.0})
    with pytest.raises(configmod.ConfigError):
        from_dict({"t_max": 1.0})
    with pytest.raises(configmod.ConfigError):
        from_dict({"s_step": 0.0})


def test_pab_and_pa_validation():
    with pytest.raises(configmod.ConfigError, match="preset"):
        from_dict({"pab": "no-such-preset"})
    mat = [[1.0, 0, 0], [0, 0, 0], [0, 0, 0]]
    cfg = from_dict({"pab": mat})
    assert np.allclose(cfg.model_spec().pab, np.array(mat))
    with pytest.raises(configmod.ConfigError):
        from_dict({"pab": [[1.0, 0.0], [0.0, 0.0]]})
    with pytest.raises(configmod.ConfigError):
        from_dict({"pa": [1.0, 0.0]})


def test_snapshot_times_must_lie_in_run():
    with pytest.raises(configmod.ConfigError, match="snapshot"):
        from_dict({"t_max": 10.0, "snapshot_times": [11.0]})
    with pytest.raises(configmod.ConfigError, match="snapshot"):
        from_dict({"snapshot_times": [1.0]})


def test_resolved_echo_reparses_identically():
    cfg = from_dict({"model": "model-ii", "eps": 0.02, "t_max": 6.0,
                     "grid": {"n": 65, "L": 8.0, "order": 4},
                     "snapshot_times": [3.0]})
    again = from_dict(cfg.resolved())
    assert again == cfg


# ---------------------------------------------------------------------------
# CLI: exit codes and artifacts.

def test_cli_version_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, {"tmax": 5})
    rc = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG
    assert "UnknownKey" in capsys.readouterr().err


def test_cli_even_grid_flag_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, TINY)
    rc = main(["run", "--config", str(path), "--grid-n", "64",
               "--out", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG
    assert "OddGridRequired" in capsys.readouterr().err


def test_cli_convergence_rejects_unforced_model(tmp_path, capsys):
    rc = main(["convergence", "--model", "model-i",
               "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_cli_scan_requires_amplitudes(tmp_path, capsys):
    rc = main(["blowup-scan", "--amps", ",", "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_cli_fit_missing_run_dir(tmp_path, capsys):
    rc = main(["fit", "--run", str(tmp_path / "nowhere")])
    assert rc == EXIT_ARTIFACTS


def test_cli_report_missing_run_dir(tmp_path, capsys):
    rc = main(["report", "--run", str(tmp_path / "nowhere")])
    assert rc == EXIT_ARTIFACTS


def test_cli_verify_identities(tmp_path, capsys):
    rc = main(["verify-identities", "--out", str(tmp_path),
               "--points", "50"])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    report = json.loads((tmp_path / "identity_report.json").read_text())
    assert all(entry["passed"] for entry in report["checks"])


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    """One small complete run through the CLI, shared by artifact tests."""
    root = tmp_path_factory.mktemp("tiny-run")
    cfg = dict(TINY)
    cfg["snapshot_times"] = [3.0]
    path = root / "cfg.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    out = root / "out"
    rc = main(["run", "--config", str(path), "--out", str(out)])
    assert rc == EXIT_OK
    return path, out


def test_cli_run_writes_expected_artifacts(tiny_run):
    _, out = tiny_run
    for name in ("manifest.json", "energies.csv", "pointwise.csv",
                 "sources_l2.csv", "flat_series.csv", "fits.json",
                 "criticality.json", "monitors.json"):
        assert (out / name).exists(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["ok"] is True
    assert manifest["t_end"] == 4.0
    listed = set(manifest["artifacts"])
    on_disk = {str(p.relative_to(out)) for p in out.rglob("*")
               if p.is_file() and p.name != "manifest.json"}
    assert listed == on_disk


def test_snapshot_round_trip(tiny_run):
    _, out = tiny_run
    snaps = sorted((out / "snapshots").glob("*.bin"))
    assert len(snaps) == 1
    t, L, n, state = read_snapshot(snaps[0])
    assert t >= 3.0 and L == 8.0 and n == 65
    assert state.u_w.shape == (65, 65)
    assert np.isfinite(state.u_w).all()


def test_snapshot_rejects_bad_magic(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        read_snapshot(bad)


def test_cli_fit_is_idempotent(tiny_run):
    _, out = tiny_run
    before = (out / "fits.json").read_bytes()
    rc = main(["fit", "--run", str(out)])
    assert rc == EXIT_OK
    assert (out / "fits.json").read_bytes() == before


def test_cli_report_summarizes(tiny_run, tmp_path, capsys):
    _, out = tiny_run
    rc = main(["report", "--run", str(out), "--out", str(tmp_path)])
    assert rc == EXIT_OK
    text = (tmp_path / "summary.csv").read_text()
    assert text.splitlines()[0] == "quantity,exponent,r_squared,status"
    assert "sup_tv" in text


def artifact_bytes(out_dir):
    """Every artifact's bytes, with the one nondeterministic field dropped."""
    got = {}
    for p in sorted(Path(out_dir).rglob("*")):
        if not p.is_file():
            continue
        rel = str(p.relative_to(out_dir))
        if p.name == "manifest.json":
            doc = json.loads(p.read_text())
            doc.pop("wall_time_s", None)
            got[rel] = json.dumps(doc, sort_keys=True).encode()
        else:
            got[rel] = p.read_bytes()
    return got


def test_cli_run_is_deterministic(tiny_run, tmp_path):
    path, out = tiny_run
    out2 = tmp_path / "again"
    rc = main(["run", "--config", str(path), "--out", str(out2)])
    assert rc == EXIT_OK
    a, b = artifact_bytes(out), artifact_bytes(out2)
    assert a.keys() == b.keys()
    for rel in a:
        assert a[rel] == b[rel], rel


def test_scan_bytes_stable_under_worker_count(tmp_path, monkeypatch, capsys):
    outs = []
    for tag, threads in (("one", "1"), ("two", "2")):
        monkeypatch.setenv("WKG_THREADS", threads)
        out = tmp_path / tag
        rc = main(["blowup-scan", "--model", "swapped-ii",
                   "--amps", "4.0,6.0", "--t-max", "10",
                   "--grid-n", "65", "--out", str(out)])
        assert rc == EXIT_OK
        outs.append((out / "blowup.json").read_bytes())
    assert outs[0] == outs[1]
    table = json.loads(outs[0])
    stars = [row["t_star"] for row in table["rows"]]
    assert all(s is not None for s in stars)
    assert stars == sorted(stars, reverse=True)
