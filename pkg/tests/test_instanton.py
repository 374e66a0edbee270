"""Instanton tests against the analytic kink of the symmetric double well."""

import numpy as np
import pytest
from scipy.integrate import simpson

from quantum_action.fitter import FitResult, FitSeries
from quantum_action.instanton import (AsymmetricWellError, InstantonError,
                                      NotADoubleWellError, extract_instanton,
                                      instanton_from_params,
                                      quantum_instanton_scan)
from quantum_action.model import (ActionParams, PolynomialPotential,
                                  double_well_from_shape, harmonic_potential)
from quantum_action.trajectory import _derivative

CLASSICAL_DW = double_well_from_shape(0.5, 1.0)  # V = (x^2-1)^2 / 2


def test_classical_action_is_four_thirds():
    prof = extract_instanton(CLASSICAL_DW, 1.0)
    assert abs(prof.action - 4.0 / 3.0) < 1e-6


def test_profile_matches_tanh():
    prof = extract_instanton(CLASSICAL_DW, 1.0, n_profile=2401)
    assert np.max(np.abs(prof.positions - np.tanh(prof.times))) < 1e-5


def test_action_scales_with_sqrt_of_potential():
    base = extract_instanton(CLASSICAL_DW, 1.0)
    scaled = extract_instanton(double_well_from_shape(2.0, 1.0), 1.0)
    assert np.isclose(scaled.action, 2.0 * base.action, rtol=1e-9)


def test_antisymmetry_and_monotonicity():
    prof = extract_instanton(CLASSICAL_DW, 1.0)
    assert np.max(np.abs(prof.positions + prof.positions[::-1])) < 1e-12
    assert np.all(np.diff(prof.positions) >= 0)
    assert prof.positions[len(prof.positions) // 2] == 0.0


def test_profile_satisfies_equation_of_motion():
    prof = extract_instanton(CLASSICAL_DW, 1.0, n_profile=2401)
    h = prof.times[1] - prof.times[0]
    vel = _derivative(prof.positions, h)
    acc = _derivative(vel, h)
    core = np.abs(prof.positions) < 0.95
    residual = acc - CLASSICAL_DW.derivative(prof.positions)
    assert np.max(np.abs(residual[core])) < 1e-5


def test_action_consistent_with_lagrangian_integral():
    prof = extract_instanton(CLASSICAL_DW, 1.0, n_profile=2401)
    h = prof.times[1] - prof.times[0]
    vel = _derivative(prof.positions, h)
    s_time = simpson(0.5 * vel**2 + CLASSICAL_DW(prof.positions), dx=h)
    assert abs(s_time / prof.action - 1.0) < 1e-6


def test_fitted_parameters_example():
    pot = PolynomialPotential((0.283, 0.0, -0.745, 0.0, 0.493))
    prof = extract_instanton(pot, 0.9961, source_T=0.5)
    a = np.sqrt(0.745 / (2.0 * 0.493))
    assert np.isclose(prof.well_edges[1], a, rtol=1e-9)
    assert 0.0 < prof.action < np.inf
    assert np.isclose(prof.temperature, 2.0)


def test_not_a_double_well():
    with pytest.raises(NotADoubleWellError):
        extract_instanton(harmonic_potential(), 1.0)
    with pytest.raises(NotADoubleWellError):
        extract_instanton(PolynomialPotential((0.0, 0.0, 0.3, 0.0, 0.5)), 1.0)


def test_asymmetric_wells_rejected():
    tilted = PolynomialPotential((0.5, 0.05, -1.0, 0.0, 0.5))
    with pytest.raises(AsymmetricWellError):
        extract_instanton(tilted, 1.0)
    # a tilt within 5x the propagated fit error is symmetrized away
    prof = extract_instanton(tilted, 1.0,
                             coeff_errors=(0.0, 0.05, 0.0, 0.0, 0.0))
    assert prof.action > 0


def _fake_result(T, v2, v4, mass=1.0):
    pot = PolynomialPotential((0.0, 0.0, v2, 0.0, v4))
    params = ActionParams(mass, pot, 0.0, T)
    return FitResult(params=params, param_errors=np.full(7, 1e-3), chi2=0.0,
                     dof=1, interval=(-1.0, 1.0), gauge_logz=0.0, n_iterations=1)


def test_scan_maps_T_to_temperature():
    series = FitSeries(scan_values=np.array([0.5, 9.0]),
                       results=(_fake_result(0.5, -1.0, 0.5),
                                _fake_result(9.0, -0.8, 0.6)),
                       kind="temperature")
    entries = quantum_instanton_scan(series)
    assert entries[0].temperature == pytest.approx(2.0)
    assert entries[1].temperature * 9.0 == pytest.approx(1.0)  # tau = hbar/(kB T)
    assert all(e.profile is not None for e in entries)


def test_scan_records_structure_failures():
    series = FitSeries(scan_values=np.array([1.0, 2.0]),
                       results=(_fake_result(1.0, -1.0, 0.5),
                                _fake_result(2.0, +0.2, 0.5)),
                       kind="temperature")
    entries = quantum_instanton_scan(series)
    assert entries[0].error is None
    assert entries[1].profile is None and "v2" in entries[1].error


def test_profile_csv(tmp_path):
    prof = extract_instanton(CLASSICAL_DW, 1.0)
    path = tmp_path / "kink.csv"
    prof.to_csv(path, comment="classical kink")
    lines = path.read_text().splitlines()
    assert lines[0] == "# classical kink"
    assert lines[1] == "t,x"
    assert len(lines) == 2 + len(prof.times)


def test_instanton_from_params():
    params = ActionParams(1.0, CLASSICAL_DW, 0.0, 3.0)
    prof = instanton_from_params(params)
    assert prof.source_T == 3.0
    assert abs(prof.action - 4.0 / 3.0) < 1e-6
