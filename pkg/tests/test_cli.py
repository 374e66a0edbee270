"""End-to-end tests of the configuration-driven command-line runner."""

import numpy as np
import pytest

from quantum_action.cli import (ConfigError, main, parse_config,
                                serialize_config)
from quantum_action.spectral import PropagatorTable

HARMONIC_CFG = """\
system = harmonic
oracle = spectral
T = 1.0
interval = 1.2
n_boundary = 4
ansatz_degree = 2
"""

PIMC_CFG = """\
system = quartic
oracle = pimc
T = 0.5
interval = 1.0
n_boundary = 3
ansatz_degree = 2
n_slices = 32
n_sweeps = 512
n_therm = 128
seed = 11
"""


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_config_round_trip():
    cfg = parse_config(HARMONIC_CFG)
    assert parse_config(serialize_config(cfg)) == cfg


def test_unknown_key_fails_closed(tmp_path, capsys):
    code = main(["run", "--config",
                 _write(tmp_path, "sytem = harmonic\n"),
                 "--out", str(tmp_path / "out")])
    assert code == 1
    assert "unknown key" in capsys.readouterr().err


def test_config_validation():
    with pytest.raises(ConfigError):
        parse_config("T = 0.5,1.0\ninterval = 1.0,1.5\n")  # two scans at once
    with pytest.raises(ConfigError):
        parse_config("system = custom\n")  # custom needs coefficients
    with pytest.raises(ConfigError):
        parse_config("mass = -1\n")


def test_run_harmonic(tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--config", _write(tmp_path, HARMONIC_CFG),
                 "--out", str(out)])
    assert code == 0
    assert (out / "manifest.txt").exists()
    assert (out / "config_echo.cfg").exists()
    table = PropagatorTable.from_csv(out / "propagator_spectral_T1.csv")
    assert table.T == 1.0
    fit_text = (out / "fit_spectral_interval_scan.csv").read_text()
    assert "scan,T,m," in fit_text


def test_manifest_replay_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg_path = _write(tmp_path, HARMONIC_CFG)
    assert main(["run", "--config", cfg_path, "--out", str(out1)]) == 0
    # replay from the echoed config: artifacts must be byte-identical
    assert main(["run", "--config", str(out1 / "config_echo.cfg"),
                 "--out", str(out2)]) == 0
    for name in ("propagator_spectral_T1.csv", "fit_spectral_interval_scan.csv",
                 "config_echo.cfg"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_pimc_run_seeded_replay(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg_path = _write(tmp_path, PIMC_CFG)
    assert main(["run", "--config", cfg_path, "--out", str(out1)]) == 0
    assert main(["run", "--config", cfg_path, "--out", str(out2),
                 "--threads", "4"]) == 0
    a = PropagatorTable.from_csv(out1 / "propagator_pimc_T0.5.csv")
    b = PropagatorTable.from_csv(out2 / "propagator_pimc_T0.5.csv")
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.sigmas, b.sigmas)


def test_seed_override_changes_samples(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg_path = _write(tmp_path, PIMC_CFG)
    assert main(["run", "--config", cfg_path, "--out", str(out1)]) == 0
    assert main(["run", "--config", cfg_path, "--out", str(out2),
                 "--seed", "12"]) == 0
    a = PropagatorTable.from_csv(out1 / "propagator_pimc_T0.5.csv")
    b = PropagatorTable.from_csv(out2 / "propagator_pimc_T0.5.csv")
    assert not np.array_equal(a.values, b.values)
    assert "seed = 12" in (out2 / "manifest.txt").read_text()


def test_compare_oracles(tmp_path):
    out = tmp_path / "out"
    cfg = PIMC_CFG.replace("oracle = pimc", "oracle = both")
    code = main(["compare-oracles", "--config", _write(tmp_path, cfg),
                 "--out", str(out)])
    assert code == 0
    lines = (out / "oracle_comparison.csv").read_text().splitlines()
    assert lines[1].startswith("x_in,x_fi,G_spectral,G_pimc")
    assert len(lines) == 2 + 9  # header rows + 3x3 boundary pairs
    assert (out / "pimc_diagnostics.csv").exists()


def test_compare_oracles_needs_both(tmp_path, capsys):
    code = main(["compare-oracles", "--config", _write(tmp_path, PIMC_CFG),
                 "--out", str(tmp_path / "out")])
    assert code == 1


def test_instanton_command(tmp_path):
    out = tmp_path / "out"
    cfg = "system = double-well\nwell_depth = 0.5\nwell_location = 1.0\n"
    code = main(["instanton", "--config", _write(tmp_path, cfg),
                 "--out", str(out)])
    assert code == 0
    summary = (out / "instanton_summary.txt").read_text()
    action = float(summary.splitlines()[0].split("=")[1])
    assert abs(action - 4.0 / 3.0) < 1e-6


def test_instanton_wrong_system_exit_2(tmp_path, capsys):
    code = main(["instanton", "--config", _write(tmp_path, HARMONIC_CFG),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    assert "numerical" in capsys.readouterr().err


def test_one_loop_command(tmp_path):
    out = tmp_path / "out"
    cfg = ("system = weak-anharmonic\nv2 = 1.0\nv4 = 1.0\ncoupling = 0.05\n"
           "T = 1.0\ninterval = 1.0\n")
    code = main(["one-loop", "--config", _write(tmp_path, cfg),
                 "--out", str(out)])
    assert code == 0
    lines = (out / "one_loop.csv").read_text().splitlines()
    assert lines[1].startswith("lambda,")
    assert len(lines) == 3
