import json

import jsonschema
import pytest

from rswave.cli import main, manifest_schema

SMALL = """
eps = 0.25
n_realizations = 64
t_macro_list = [0.5]
[grid]
n = 256
[kinetic]
n_mc = 500
n_particles = 5000
n_cells = 4
[field_stats]
n_paths = 50
lags = [0.0, 0.5]
shifts = [0, 2]
"""


@pytest.fixture()
def cfg_path(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(SMALL)
    return p


@pytest.mark.parametrize("cmd,files", [
    ("validate", ["validation.csv"]),
    ("dcoeff", ["dcoeff.csv"]),
    ("field-stats", ["field_stats.csv"]),
    ("wick-check", ["wick.csv"]),
    ("kinetic", ["kinetic_atom.csv", "kinetic_profile.csv", "kinetic_series.csv", "kinetic_cells.csv"]),
    ("homogenize", ["homogenization.csv"]),
])
def test_subcommands_write_outputs(tmp_path, cfg_path, cmd, files):
    out = tmp_path / "out"
    assert main([cmd, "--config", str(cfg_path), "--out", str(out)]) == 0
    for f in files:
        assert (out / f).read_text().count("\n") >= 2
    man = json.loads((out / "manifest.json").read_text())
    jsonschema.validate(man, manifest_schema())
    assert man["command"] == cmd and sorted(man["outputs"]) == sorted(files)


def test_dcoeff_json_stdout(tmp_path, capsys):
    assert main(["dcoeff", "--out", str(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["D0"]) == {"re", "im", "err"}
    assert doc["D0"]["re"] == pytest.approx(0.51031949825, abs=1e-8)


def test_force_required(tmp_path):
    assert main(["wick-check", "--out", str(tmp_path)]) == 0
    assert main(["wick-check", "--out", str(tmp_path)]) == 2
    assert main(["wick-check", "--out", str(tmp_path), "--force"]) == 0


def test_config_error_exit(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("eps = 3.0\n")
    assert main(["validate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["validate", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "o")]) == 2


def test_wigner_needs_valid_exponents(tmp_path):
    cfg = tmp_path / "w.toml"
    cfg.write_text("alpha = 1.2\n")
    assert main(["wigner", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit(tmp_path, monkeypatch, capsys):
    from rswave import cli
    from rswave.errors import QuadratureError

    def boom(cfg, args):
        raise QuadratureError(0.1, 1.0)

    monkeypatch.setitem(cli.COMMANDS, "validate", boom)
    assert main(["validate", "--out", str(tmp_path)]) == 3
    assert "numerical failure" in capsys.readouterr().err
    assert not (tmp_path / "manifest.json").exists()
