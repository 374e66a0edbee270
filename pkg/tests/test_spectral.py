"""Spectral-oracle tests: eigensolver, propagator assembly, failure modes."""

import numpy as np
import pytest

from quantum_action.model import (BoundarySet, Grid, double_well_from_shape,
                                  harmonic_potential, quartic_potential)
from quantum_action.spectral import (GridTooNarrowError, PropagatorTable,
                                     SpectralError, TruncationError,
                                     ground_state_energy, solve_eigen,
                                     spectral_propagator, spectral_table)

QUARTIC_E0 = 0.667986259  # frozen from an independent eigensolve


def test_harmonic_spectrum():
    es = solve_eigen(harmonic_potential(), 1.0, Grid(-9.0, 9.0, 8001), n_states=12)
    assert np.allclose(es.energies, np.arange(12) + 0.5, atol=1e-4)


def test_quartic_ground_state_energy():
    es = solve_eigen(quartic_potential(), 1.0, Grid(-6.0, 6.0, 4001), n_states=4)
    assert abs(ground_state_energy(es) - QUARTIC_E0) < 1e-6


def test_double_well_low_spectrum():
    # shallow well: E0 sits above the barrier height 0.5
    es = solve_eigen(double_well_from_shape(0.5, 1.0), 1.0, n_states=4)
    assert abs(es.energies[0] - 0.56889) < 1e-4
    assert abs(es.energies[1] - es.energies[0] - 0.78761) < 1e-4


def test_wavefunction_normalization_and_nodes():
    es = solve_eigen(quartic_potential(), 1.0, n_states=6)
    h = es.grid.spacing
    for n, psi in enumerate(es.wavefunctions):
        assert np.isclose(h * np.sum(psi**2), 1.0, atol=1e-12)
        signs = np.sign(psi[np.abs(psi) > 1e-6 * np.max(np.abs(psi))])
        assert np.sum(np.diff(signs) != 0) == n  # n sign changes for state n


def test_propagator_symmetry_and_positivity():
    for pot in (harmonic_potential(), quartic_potential(),
                double_well_from_shape(0.5, 1.0)):
        table = spectral_table(pot, 1.0, BoundarySet.uniform(1.5, 6), 0.5)
        assert np.allclose(table.values, table.values.T, rtol=1e-12)
        assert np.all(table.values > 0)


def test_harmonic_closed_form():
    from quantum_action.trajectory import harmonic_action, harmonic_log_z
    table = spectral_table(harmonic_potential(), 1.0, BoundarySet.uniform(1.0, 5), 1.0,
                           grid=Grid(-8.0, 8.0, 4001))
    xs = table.boundary.array
    for i, xi in enumerate(xs):
        for j, xj in enumerate(xs):
            exact = np.exp(harmonic_log_z(1.0, 1.0, 1.0)
                           - harmonic_action(1.0, 1.0, 1.0, xi, xj))
            assert np.isclose(table.values[i, j], exact, rtol=1e-5)


def test_semigroup_identity():
    # G(x, z; T1+T2) = int dy G(x, y; T1) G(y, z; T2), composed numerically
    from scipy.integrate import simpson
    for pot in (quartic_potential(), double_well_from_shape(0.5, 1.0)):
        ys = np.linspace(-5.0, 5.0, 1201)
        mid = BoundarySet(tuple(ys))
        ends = BoundarySet.uniform(1.0, 3)
        es = solve_eigen(pot, 1.0, n_states=40)
        g1 = spectral_propagator(es, mid, 0.3, check_truncation=False)
        xs = ends.array
        idx = [np.argmin(np.abs(ys - x)) for x in xs]
        g_sum = spectral_propagator(es, ends, 0.6)
        for a, ia in enumerate(idx):
            for b, ib in enumerate(idx):
                composed = simpson(g1.values[ia] * g1.values[:, ib], x=ys)
                assert np.isclose(composed, g_sum.values[a, b], rtol=1e-6)


def test_grid_too_narrow_raises():
    with pytest.raises(GridTooNarrowError):
        solve_eigen(harmonic_potential(), 1.0, Grid(-4.0, 4.0, 801), n_states=30)


def test_truncation_error_raises():
    es = solve_eigen(quartic_potential(), 1.0, n_states=4)
    with pytest.raises(TruncationError):
        spectral_propagator(es, BoundarySet.uniform(1.0, 4), 0.05)


def test_auto_truncation_widens():
    # automatic mode must survive both shallow truncation and a narrow box
    table = spectral_table(harmonic_potential(), 1.0, BoundarySet.uniform(1.0, 4),
                           0.1, grid=Grid(-6.0, 6.0, 1501))
    assert np.all(table.values > 0)


def test_nonconfining_rejected():
    from quantum_action.model import PolynomialPotential
    with pytest.raises(SpectralError):
        solve_eigen(PolynomialPotential((0.0, 0.0, -1.0)), 1.0)


def test_table_csv_roundtrip(tmp_path):
    table = spectral_table(quartic_potential(), 1.0, BoundarySet.uniform(1.5, 4), 0.5)
    path = tmp_path / "table.csv"
    table.to_csv(path, comment="roundtrip test")
    back = PropagatorTable.from_csv(path)
    assert back.T == table.T
    assert back.boundary.points == table.boundary.points
    assert np.array_equal(back.values, table.values)
