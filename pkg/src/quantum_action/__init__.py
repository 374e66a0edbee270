"""Quantum-action toolkit for 1-D Euclidean quantum mechanics.

Computes exact imaginary-time transition amplitudes for polynomial
potentials (spectral and path-integral Monte Carlo oracles), fits an action
of classical form whose least-action path reproduces them, and extracts
finite-temperature physics and quantum instantons from the fitted
parameters.
"""

__version__ = "0.1.0"

from .fitter import (FitError, FitResult, FitSeries, fit_quantum_action,
                     interval_scan, one_loop_coefficients, temperature_scan)
from .instanton import (InstantonError, InstantonProfile, extract_instanton,
                        instanton_from_params, quantum_instanton_scan)
from .model import (HBAR, KBOLTZ, ActionParams, BoundarySet, Grid, ModelError,
                    PolynomialPotential, anharmonic_potential,
                    double_well_from_shape, harmonic_potential,
                    quartic_potential)
from .pimc import (LatticeConfig, PimcError, euclidean_lattice_action,
                   pimc_propagator, pimc_table_with_diagnostics)
from .spectral import (EigenSystem, PropagatorTable, SpectralError,
                       ground_state_energy, solve_eigen, spectral_propagator,
                       spectral_table)
from .trajectory import (ClassicalPath, TrajectoryError, amplitude_from_action,
                         harmonic_action, harmonic_log_z, harmonic_path,
                         solve_euclidean_bvp)

__all__ = [name for name in dir() if not name.startswith("_")]
