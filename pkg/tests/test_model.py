"""Model-layer tests: potentials, parameter containers, grids, boundaries."""

import numpy as np
import pytest

from quantum_action.model import (ActionParams, BoundarySet, Grid, ModelError,
                                  PolynomialPotential, anharmonic_potential,
                                  double_well_from_shape, harmonic_potential,
                                  quartic_potential)


def test_polynomial_evaluation_and_derivatives():
    pot = PolynomialPotential((1.0, 0.0, -2.0, 0.0, 0.5))
    x = np.array([-1.5, 0.0, 0.7, 2.0])
    assert np.allclose(pot(x), 1.0 - 2.0 * x**2 + 0.5 * x**4)
    assert np.allclose(pot.derivative(x), -4.0 * x + 2.0 * x**3)
    assert np.allclose(pot.second_derivative(x), -4.0 + 6.0 * x**2)


def test_degree_bounds():
    with pytest.raises(ModelError):
        PolynomialPotential((0.0, 1.0))  # degree 1
    with pytest.raises(ModelError):
        PolynomialPotential(tuple(range(11)))  # degree 10


def test_confining_predicate():
    assert harmonic_potential().is_confining
    assert quartic_potential().is_confining
    assert not PolynomialPotential((0.0, 0.0, -1.0)).is_confining
    assert not PolynomialPotential((0.0, 0.0, 1.0, 1.0)).is_confining  # odd degree


def test_double_well_expansion():
    # A (x^2 - a^2)^2 = A a^4 - 2 A a^2 x^2 + A x^4
    dw = double_well_from_shape(0.5, 1.0)
    assert dw.coeffs == (0.5, 0.0, -1.0, 0.0, 0.5)
    x = np.linspace(-2, 2, 41)
    assert np.allclose(dw(x), 0.5 * (x**2 - 1.0)**2)


def test_double_well_minima():
    dw = double_well_from_shape(2.0, 1.5)
    xs, vals = dw.minima()
    assert np.allclose(xs, [-1.5, 1.5])
    assert np.allclose(vals, 0.0, atol=1e-12)


def test_harmonic_factory():
    pot = harmonic_potential(mass=2.0, omega=3.0)
    assert np.isclose(pot(1.0), 0.5 * 2.0 * 9.0)


def test_anharmonic_factory():
    pot = anharmonic_potential(1.0, 0.05, 1.0)
    assert np.isclose(pot(2.0), 4.0 + 0.05 * 16.0)
    assert anharmonic_potential(1.0, 0.0).degree == 2
    with pytest.raises(ModelError):
        anharmonic_potential(1.0, -0.1)


def test_shifted_offsets_only_v0():
    pot = quartic_potential()
    shifted = pot.shifted(2.5)
    assert shifted.coeffs[0] == 2.5
    assert shifted.coeffs[1:] == pot.coeffs[1:]


def test_action_params_validation_and_thermal_map():
    pot = harmonic_potential()
    params = ActionParams(1.0, pot, 0.0, 4.0)
    assert params.beta == 4.0
    assert np.isclose(params.temperature, 0.25)
    with pytest.raises(ModelError):
        ActionParams(-1.0, pot, 0.0, 1.0)
    with pytest.raises(ModelError):
        ActionParams(1.0, pot, 0.0, 0.0)


def test_grid_properties():
    g = Grid(-2.0, 2.0, 5)
    assert g.spacing == 1.0
    assert np.allclose(g.points, [-2, -1, 0, 1, 2])
    with pytest.raises(ModelError):
        Grid(1.0, -1.0, 5)


def test_boundary_set():
    b = BoundarySet.uniform(3.0, 6)
    assert len(b) == 6
    assert b.points[0] == -3.0 and b.points[-1] == 3.0
    assert np.all(np.diff(b.array) > 0)
    with pytest.raises(ModelError):
        BoundarySet((1.0, 1.0))
    with pytest.raises(ModelError):
        BoundarySet.uniform(-1.0)
