"""Configuration-driven experiment runner.

Wires the propagator oracles, the quantum-action fitter, and the instanton
extractor into reproducible runs: flat key=value config files in, CSV tables
and a replayable manifest out. Subcommands: run, compare-oracles, instanton,
one-loop.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .fitter import (FitError, FitSeries, fit_quantum_action, interval_scan,
                     one_loop_coefficients, temperature_scan)
from .instanton import (InstantonError, extract_instanton,
                        quantum_instanton_scan, scan_summary_to_csv)
from .model import (ActionParams, BoundarySet, Grid, ModelError,
                    PolynomialPotential, anharmonic_potential,
                    double_well_from_shape, harmonic_potential,
                    quartic_potential)
from .pimc import (LatticeConfig, PimcError, diagnostics_to_csv,
                   pimc_table_with_diagnostics)
from .spectral import SpectralError, spectral_table
from .trajectory import TrajectoryError


class ConfigError(ValueError):
    pass


def _floats(s):
    return tuple(float(v) for v in str(s).split(",") if v.strip() != "")


def _bool(s):
    if str(s).lower() in ("true", "yes", "1"):
        return True
    if str(s).lower() in ("false", "no", "0"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


# key -> (caster, default); unknown keys are rejected (fail-closed)
CONFIG_SCHEMA = {
    "system": (str, "quartic"),
    "mass": (float, 1.0),
    "omega": (float, 1.0),
    "coupling": (_floats, (0.0,)),          # lambda values (weak-anharmonic)
    "v2": (float, 1.0),                     # weak-anharmonic quadratic coefficient
    "v4": (float, 1.0),                     # quartic coefficient
    "well_depth": (float, 0.5),             # double-well A in A (x^2 - a^2)^2
    "well_location": (float, 1.0),          # double-well a
    "coefficients": (_floats, ()),          # custom potential v0, v1, ...
    "oracle": (str, "spectral"),
    "T": (_floats, (0.5,)),
    "interval": (_floats, (1.5,)),
    "n_boundary": (int, 6),
    "ansatz_degree": (int, 4),
    "grid_halfwidth": (float, 8.0),
    "grid_points": (int, 2001),
    "n_states": (int, 0),                   # 0 = automatic truncation depth
    "n_slices": (int, 0),                   # 0 = default_slices(T)
    "n_sweeps": (int, 4096),
    "n_therm": (int, 512),
    "n_decorrelate": (int, 4),
    "seed": (int, 20457),
    "continuation": (_bool, False),
    "max_iter": (int, 500),
}

_SYSTEMS = ("harmonic", "weak-anharmonic", "quartic", "double-well", "custom")


def parse_config(text: str) -> dict:
    """Parse flat key=value lines; '#' comments; unknown keys are errors."""
    cfg = {k: d for k, (_, d) in CONFIG_SCHEMA.items()}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value, got {raw!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        caster = CONFIG_SCHEMA[key][0]
        try:
            cfg[key] = caster(val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {ln}: bad value for {key!r}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    if cfg["system"] not in _SYSTEMS:
        raise ConfigError(f"system must be one of {_SYSTEMS}")
    if cfg["oracle"] not in ("spectral", "pimc", "both"):
        raise ConfigError("oracle must be spectral, pimc, or both")
    if cfg["mass"] <= 0:
        raise ConfigError("mass must be positive")
    if any(t <= 0 for t in cfg["T"]) or not cfg["T"]:
        raise ConfigError("T values must be positive")
    if any(a <= 0 for a in cfg["interval"]) or not cfg["interval"]:
        raise ConfigError("interval halfwidths must be positive")
    if len(cfg["T"]) > 1 and len(cfg["interval"]) > 1:
        raise ConfigError("scan either T or interval, not both")
    if cfg["system"] == "custom" and not cfg["coefficients"]:
        raise ConfigError("custom system needs coefficients")
    if cfg["n_boundary"] < 2:
        raise ConfigError("n_boundary must be >= 2")


def serialize_config(cfg: dict) -> str:
    lines = []
    for key in CONFIG_SCHEMA:
        val = cfg[key]
        if isinstance(val, tuple):
            val = ",".join(repr(v) for v in val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def build_potential(cfg: dict, coupling: float | None = None) -> PolynomialPotential:
    system = cfg["system"]
    if system == "harmonic":
        return harmonic_potential(cfg["mass"], cfg["omega"])
    if system == "weak-anharmonic":
        lam = cfg["coupling"][0] if coupling is None else coupling
        return anharmonic_potential(cfg["v2"], lam, cfg["v4"])
    if system == "quartic":
        return quartic_potential(cfg["v4"])
    if system == "double-well":
        return double_well_from_shape(cfg["well_depth"], cfg["well_location"])
    return PolynomialPotential(cfg["coefficients"])


def _grid(cfg):
    hw = cfg["grid_halfwidth"]
    return Grid(-hw, hw, cfg["grid_points"])


def make_oracles(cfg: dict, threads: int) -> dict:
    """Callable oracles with the uniform (potential, mass, boundary, T) signature."""
    oracles = {}
    if cfg["oracle"] in ("spectral", "both"):
        n_states = cfg["n_states"] or None

        def spectral(pot, mass, boundary, T):
            return spectral_table(pot, mass, boundary, T, grid=_grid(cfg),
                                  n_states=n_states)
        oracles["spectral"] = spectral
    if cfg["oracle"] in ("pimc", "both"):
        lattice = LatticeConfig(n_slices=cfg["n_slices"] or None,
                                rng_seed=cfg["seed"], n_sweeps=cfg["n_sweeps"],
                                n_therm=cfg["n_therm"],
                                n_decorrelate=cfg["n_decorrelate"])

        def pimc(pot, mass, boundary, T, _diags=None):
            table, diags = pimc_table_with_diagnostics(pot, mass, boundary, T,
                                                       lattice, n_threads=threads)
            if _diags is not None:
                _diags.extend(diags)
            return table
        oracles["pimc"] = pimc
    return oracles


def write_manifest(out: Path, cfg: dict, command: str):
    echo = out / "config_echo.cfg"
    echo.write_text(serialize_config(cfg))
    lines = [
        f"command = {command}",
        f"package_version = {__version__}",
        f"numpy_version = {np.__version__}",
        f"scipy_version = {scipy.__version__}",
        f"seed = {cfg['seed']}",
        "config = config_echo.cfg",
    ]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _fit_outputs(cfg, out, threads):
    """Shared run logic: tables, fit series, downstream artifacts per oracle."""
    pot = build_potential(cfg)
    mass = cfg["mass"]
    Ts = cfg["T"]
    intervals = cfg["interval"]
    oracles = make_oracles(cfg, threads)
    for name, oracle in oracles.items():
        for T in Ts:
            boundary = BoundarySet.uniform(intervals[0], cfg["n_boundary"])
            table = oracle(pot, mass, boundary, T)
            table.to_csv(out / f"propagator_{name}_T{T:g}.csv",
                         comment=f"{cfg['system']} amplitudes, {name} oracle, T={T:g}")
        if len(Ts) > 1:
            series = temperature_scan(oracle, pot, mass, Ts, intervals[0],
                                      cfg["n_boundary"], cfg["ansatz_degree"],
                                      max_iter=cfg["max_iter"],
                                      continuation=cfg["continuation"])
        elif len(intervals) > 1:
            series = interval_scan(oracle, pot, mass, Ts[0], intervals,
                                   cfg["n_boundary"], cfg["ansatz_degree"])
        else:
            init = ActionParams(mass, pot, 0.0, Ts[0])
            res = fit_quantum_action(oracle(pot, mass,
                                            BoundarySet.uniform(intervals[0], cfg["n_boundary"]),
                                            Ts[0]),
                                     cfg["ansatz_degree"], init,
                                     max_iter=cfg["max_iter"])
            series = FitSeries(scan_values=np.array([intervals[0]]),
                               results=(res,), kind="interval")
        kind = "T" if len(Ts) > 1 else "interval"
        series.to_csv(out / f"fit_{name}_{kind}_scan.csv",
                      comment=f"quantum-action fit, {cfg['system']} system, "
                              f"{name} oracle, scan over {kind}")
        if cfg["system"] == "double-well":
            entries = quantum_instanton_scan(series)
            scan_summary_to_csv(entries, out / f"instanton_scan_{name}.csv",
                                comment="quantum instantons of the fitted actions")
            for e in entries:
                if e.profile is not None:
                    e.profile.to_csv(out / f"instanton_{name}_T{e.source_T:g}.csv",
                                     comment=f"kink profile, fitted at T={e.source_T:g}")
        if cfg["system"] == "weak-anharmonic":
            _one_loop_csv(cfg, series, out / f"one_loop_{name}.csv")
        # ground-state reference for temperature scans: emitted for visual
        # comparison with the fitted normalization, nothing is asserted
        if len(Ts) > 1 and name == "spectral":
            from .spectral import ground_state_energy, solve_eigen
            es = solve_eigen(pot, mass, _grid(cfg), max(cfg["n_states"], 8))
            (out / "ground_state.txt").write_text(
                f"E0 = {ground_state_energy(es)!r}\n")


def _one_loop_csv(cfg, series, path):
    omega = np.sqrt(2.0 * cfg["v2"] / cfg["mass"])
    lam = cfg["coupling"][0]
    dv2, dv4 = one_loop_coefficients(cfg["mass"], omega, lam)
    with open(path, "w", newline="") as fh:
        fh.write("# fitted quantum-action shifts vs one-loop effective potential\n")
        w = csv.writer(fh)
        w.writerow(["scan", "fit_dv2", "pred_dv2", "fit_dv4", "pred_dv4"])
        for sv, r in zip(series.scan_values, series.results):
            v = r.param_vector
            w.writerow([sv, repr(float(v[3] - cfg["v2"])), repr(dv2),
                        repr(float(v[5] - lam * cfg["v4"])), repr(dv4)])


def cmd_run(cfg, out, threads):
    _fit_outputs(cfg, out, threads)
    write_manifest(out, cfg, "run")


def cmd_compare_oracles(cfg, out, threads):
    if cfg["oracle"] != "both":
        raise ConfigError("compare-oracles requires oracle = both")
    pot = build_potential(cfg)
    mass = cfg["mass"]
    T = cfg["T"][0]
    boundary = BoundarySet.uniform(cfg["interval"][0], cfg["n_boundary"])
    oracles = make_oracles(cfg, threads)
    ref = oracles["spectral"](pot, mass, boundary, T)
    diags = []
    mc = oracles["pimc"](pot, mass, boundary, T, _diags=diags)
    # epsilon-scaling diagnostic: redo at half the slices; if the drift
    # exceeds the statistical error the discretization dominates
    n_fine = cfg["n_slices"] or LatticeConfig().slices(T)
    coarse_cfg = LatticeConfig(n_slices=max(2, n_fine // 2), rng_seed=cfg["seed"] + 1,
                               n_sweeps=cfg["n_sweeps"], n_therm=cfg["n_therm"],
                               n_decorrelate=cfg["n_decorrelate"])
    coarse, _ = pimc_table_with_diagnostics(pot, mass, boundary, T, coarse_cfg,
                                            n_threads=threads)
    xs = boundary.points
    with open(out / "oracle_comparison.csv", "w", newline="") as fh:
        fh.write(f"# spectral vs Monte Carlo amplitudes, {cfg['system']}, T={T:g}\n")
        w = csv.writer(fh)
        w.writerow(["x_in", "x_fi", "G_spectral", "G_pimc", "sigma", "pull",
                    "eps_drift", "eps_flag"])
        for i, xi in enumerate(xs):
            for j, xj in enumerate(xs):
                sig = mc.sigmas[i, j]
                pull = (mc.values[i, j] - ref.values[i, j]) / sig if sig > 0 else np.inf
                drift = mc.values[i, j] - coarse.values[i, j]
                flag = int(abs(drift) > 3.0 * np.hypot(sig, coarse.sigmas[i, j]))
                w.writerow([xi, xj, repr(float(ref.values[i, j])),
                            repr(float(mc.values[i, j])), repr(float(sig)),
                            repr(float(pull)), repr(float(drift)), flag])
    diagnostics_to_csv(diags, out / "pimc_diagnostics.csv",
                       comment="per-entry sampling diagnostics")
    write_manifest(out, cfg, "compare-oracles")


def cmd_instanton(cfg, out, threads):
    pot = build_potential(cfg)
    prof = extract_instanton(pot, cfg["mass"])
    prof.to_csv(out / "instanton_classical.csv",
                comment=f"classical kink profile, {cfg['system']}")
    (out / "instanton_summary.txt").write_text(
        f"action = {prof.action!r}\nwell_edge = {prof.well_edges[1]!r}\n")
    write_manifest(out, cfg, "instanton")


def cmd_one_loop(cfg, out, threads):
    if cfg["system"] != "weak-anharmonic":
        raise ConfigError("one-loop requires system = weak-anharmonic")
    mass = cfg["mass"]
    omega = np.sqrt(2.0 * cfg["v2"] / mass)
    T = cfg["T"][0]
    boundary = BoundarySet.uniform(cfg["interval"][0], cfg["n_boundary"])
    rows = []
    for lam in cfg["coupling"]:
        pot = build_potential(cfg, coupling=lam)
        table = spectral_table(pot, mass, boundary, T, grid=_grid(cfg),
                               n_states=cfg["n_states"] or None)
        res = fit_quantum_action(table, cfg["ansatz_degree"],
                                 ActionParams(mass, pot, 0.0, T),
                                 max_iter=cfg["max_iter"])
        dv2, dv4 = one_loop_coefficients(mass, omega, lam)
        v = res.param_vector
        rows.append([lam, repr(float(v[0])), repr(float(v[3] - cfg["v2"])),
                     repr(dv2), repr(float(v[5] - lam * cfg["v4"])), repr(dv4)])
    with open(out / "one_loop.csv", "w", newline="") as fh:
        fh.write("# fitted quantum-action shifts vs one-loop effective potential\n")
        w = csv.writer(fh)
        w.writerow(["lambda", "m_fit", "fit_dv2", "pred_dv2", "fit_dv4", "pred_dv4"])
        w.writerows(rows)
    write_manifest(out, cfg, "one-loop")


_COMMANDS = {
    "run": cmd_run,
    "compare-oracles": cmd_compare_oracles,
    "instanton": cmd_instanton,
    "one-loop": cmd_one_loop,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quantum-action",
        description="Fit quantum actions to Euclidean transition amplitudes.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="flat key=value config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(Path(args.config).read_text())
        if args.seed is not None:
            cfg["seed"] = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, ModelError, OSError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 1
    try:
        _COMMANDS[args.command](cfg, out, max(args.threads, 1))
    except (ConfigError, ModelError) as exc:
        print(f"validation: {exc}", file=sys.stderr)
        return 1
    except (FitError, SpectralError, TrajectoryError, PimcError,
            InstantonError) as exc:
        print(f"numerical: {type(exc).__module__.rsplit('.', 1)[-1]}: {exc}",
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
