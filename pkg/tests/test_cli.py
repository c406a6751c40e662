import json
import subprocess
import sys

import pytest

import anisotv.cli as cli
from anisotv.config import SCHEMA, RunConfig, preset_names, preset_text
from anisotv.exceptions import ConfigError, SolverDivergedError

SMALL = """
[run]
command = {command}

[problem]
datum = disc
cells = 32
lam = 32

[solver]
gap_tol = 1e-4

[diagnostics]
n_points = 8
radii_cells = 8 4 2
normal_radius_cells = 4
trace_rho_cells = 8
trace_r_cells = 2
density_rho_cells = 4
perturbations = 4

[output]
formats = json csv bin pgm pbm
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _report(out):
    return json.loads((out / "report.json").read_text())


# -- configuration ----------------------------------------------------------------------

def test_defaults_filled():
    cfg = RunConfig("[run]\ncommand = solve\n")
    assert cfg.command == "solve"
    assert cfg["problem"]["cells"] == SCHEMA["problem"]["cells"][1]
    assert cfg["diagnostics"]["radii_cells"] == [32, 16, 8, 4]


@pytest.mark.parametrize("text, fragment", [
    ("[run]\ncommand = solve\ncolour = red\n", "unknown key"),
    ("[runs]\ncommand = solve\n", "unknown section"),
    ("[run]\ncommand = dance\n", "command"),
    ("[problem]\ncells = many\n", "cells"),
    ("[problem]\nlam = -1\n", "lam"),
    ("[problem]\ndim = 4\n", "dim"),
    ("[diagnostics]\nradii_cells = 4 8\n", "radii_cells"),
    ("[output]\nformats = json tiff\n", "formats"),
    ("[counterexample]\nblowup = maybe\n", "blowup"),
    ("no section header\n", "malformed"),
])
def test_invalid_configs(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        RunConfig(text)


def test_presets_parse():
    names = preset_names()
    assert {"disc", "disc-small", "stripe", "anisotropic-disc", "counterexample-2d",
            "counterexample-3d"} <= set(names)
    for name in names:
        RunConfig(preset_text(name), name)
    with pytest.raises(ConfigError):
        RunConfig.from_preset("nope")


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        RunConfig.from_path("/nonexistent/run.ini")


# -- exit codes ---------------------------------------------------------------------------

def test_presets_listing(capsys):
    assert cli.main(["presets"]) == 0
    assert "disc" in capsys.readouterr().out.split()


def test_usage_errors(tmp_path, capsys):
    assert cli.main([]) == 1
    assert cli.main(["run", str(tmp_path / "missing.ini")]) == 1
    assert "not found" in capsys.readouterr().err
    bad = _write(tmp_path, "[run]\ncommand = solve\ntypo = 1\n")
    assert cli.main(["run", str(bad)]) == 1
    assert "unknown key" in capsys.readouterr().err
    assert cli.main(["run", "--preset", "nope"]) == 1


def test_selftest_exit_zero(tmp_path):
    assert cli.main(["selftest", "--output", str(tmp_path)]) == 0
    rep = _report(tmp_path)
    assert rep["passed"] and rep["command"] == "selftest"



def test_failed_tolerance_exit_two(tmp_path):
    text = SMALL.format(command="verify").replace("perturbations = 4", "perturbations = 4\nplateau_tol = 1e-9")
    out = tmp_path / "o"
    assert cli.main(["run", str(_write(tmp_path, text)), "--output", str(out)]) == 2
    rep = _report(out)
    assert not rep["passed"] and not rep["checks"]["plateau"]["passed"]


def test_divergence_exit_three(tmp_path, monkeypatch, capsys):
    def boom(cfg, spec):
        raise SolverDivergedError("gap increased", {"iteration": 100})

    monkeypatch.setattr(cli, "_solve", boom)
    path = _write(tmp_path, SMALL.format(command="solve"))
    assert cli.main(["run", str(path), "--output", str(tmp_path / "o")]) == 3
    assert "diverged" in capsys.readouterr().err


# -- commands ------------------------------------------------------------------------------

@pytest.mark.parametrize("command", ["solve", "verify", "levelset", "blowup"])
def test_commands_write_reports(tmp_path, command):
    out = tmp_path / "o"
    code = cli.main(["run", str(_write(tmp_path, SMALL.format(command=command))), "--output", str(out)])
    rep = _report(out)
    assert code in (0, 2) and rep["command"] == command
    assert rep["schema_version"] == cli.SCHEMA_VERSION
    assert rep["config"]["text"] == SMALL.format(command=command)
    assert set(rep["tolerances"]) >= {"gap_tol", "pairing_tol", "zeqnu_tol"}
    for name in rep["artefacts"]:
        assert (out / name).is_file()
    if command in ("solve", "verify"):
        assert {"u.bin", "z.bin", "g.bin", "u.pgm"} <= set(rep["artefacts"])
        assert rep["results"]["solve"]["relative_gap"] <= 1e-4


def test_verify_small_disc_passes(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--preset", "disc-small", "--output", str(out)]) == 0
    rep = _report(out)
    assert all(c["passed"] for c in rep["checks"].values())
    assert {"feasible", "pairing_residual", "zeqnu_median", "subgradient_inequality"} <= set(rep["checks"])
    assert "boundary.csv" in rep["artefacts"]


def test_counterexample_report(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--preset", "counterexample-2d", "--output", str(out)]) == 0
    ce = _report(out)["results"]["counterexample"]
    assert max(ce["large_ball_averages"]) <= 1 - 1 / 36 + 1e-3
    assert min(ce["small_ball_averages"]) >= 0.99 - 1e-3
    header = (out / "counterexample.csv").read_text().splitlines()[0]
    assert header == "n,radius,large_ball_average,small_ball_average"


def test_report_is_deterministic(tmp_path):
    path = _write(tmp_path, SMALL.format(command="verify"))
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["run", str(path), "--output", str(a)])
    cli.main(["run", str(path), "--output", str(b)])
    ra, rb = _report(a), _report(b)
    ra.pop("metadata"), rb.pop("metadata")
    assert json.dumps(ra, sort_keys=True) == json.dumps(rb, sort_keys=True)
    for name in ra["artefacts"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "anisotv", "presets"], capture_output=True, text=True)
    assert proc.returncode == 0 and "disc" in proc.stdout
