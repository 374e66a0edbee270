"""Deterministic propagator oracle via 1-D Schroedinger spectral decomposition.

The Hamiltonian H = -(hbar^2/2m) d^2/dx^2 + V(x) is discretized with
second-order central finite differences on a uniform grid with Dirichlet
edges; the Euclidean propagator is assembled as the truncated spectral sum
G(x', T; x, 0) = sum_n psi_n(x') psi_n(x) exp(-E_n T / hbar).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .model import HBAR, BoundarySet, Grid, PolynomialPotential, DEFAULT_GRID

EDGE_DECAY_TOL = 1e-8


class SpectralError(RuntimeError):
    """Spectral oracle failure (grid or truncation inadequate)."""


class GridTooNarrowError(SpectralError):
    pass


class TruncationError(SpectralError):
    pass


@dataclass(frozen=True)
class EigenSystem:
    """Lowest-K eigenpairs of the 1-D Hamiltonian on a grid.

    wavefunctions[n] is psi_n sampled on grid.points, normalized so that
    spacing * sum(psi_n**2) == 1.
    """

    energies: np.ndarray
    wavefunctions: np.ndarray
    grid: Grid
    mass: float

    @property
    def n_states(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class PropagatorTable:
    """Euclidean amplitudes G(x_j, T; x_i, 0) on a boundary-point grid."""

    boundary: BoundarySet
    T: float
    values: np.ndarray
    sigmas: np.ndarray

    @property
    def size(self) -> int:
        return len(self.boundary)

    def to_csv(self, path, comment: str | None = None):
        xs = self.boundary.points
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["x_in", "x_fi", "T", "G", "sigma"])
            for i, xi in enumerate(xs):
                for j, xj in enumerate(xs):
                    writer.writerow([xi, xj, self.T,
                                     repr(float(self.values[i, j])),
                                     repr(float(self.sigmas[i, j]))])

    @classmethod
    def from_csv(cls, path) -> "PropagatorTable":
        rows = []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#") or line.startswith("x_in"):
                    continue
                rows.append([float(v) for v in line.strip().split(",")])
        xs = sorted({r[0] for r in rows})
        T = rows[0][2]
        n = len(xs)
        idx = {x: i for i, x in enumerate(xs)}
        values = np.zeros((n, n))
        sigmas = np.zeros((n, n))
        for x_in, x_fi, _, g, s in rows:
            values[idx[x_in], idx[x_fi]] = g
            sigmas[idx[x_in], idx[x_fi]] = s
        return cls(BoundarySet(tuple(xs)), T, values, sigmas)


def solve_eigen(potential: PolynomialPotential, mass: float, grid: Grid = DEFAULT_GRID,
                n_states: int = 30, hbar: float = HBAR) -> EigenSystem:
    """Lowest eigenpairs of H with Dirichlet edges.

    Raises GridTooNarrowError if the highest requested state has not decayed
    below EDGE_DECAY_TOL at the box edges (its energy would be box-distorted).
    """
    if not potential.is_confining:
        raise SpectralError("potential must be confining (even degree, positive leading coefficient)")
    x = grid.points
    h = grid.spacing
    kin = hbar**2 / (2.0 * mass * h**2)
    diag = 2.0 * kin + potential(x)
    off = np.full(len(x) - 1, -kin)
    if n_states >= len(x) // 4:
        raise SpectralError(f"n_states={n_states} not resolvable on {len(x)}-point grid")
    energies, vecs = eigh_tridiagonal(diag, off, select="i",
                                      select_range=(0, n_states - 1))
    psi = (vecs / np.sqrt(h)).T  # shape (K, n_points), unit L2 norm
    edge_amp = np.abs(psi[-1][[0, -1]]).max()
    if edge_amp > EDGE_DECAY_TOL:
        raise GridTooNarrowError(
            f"state {n_states - 1} has edge amplitude {edge_amp:.2e} > {EDGE_DECAY_TOL:.0e}; widen the grid")
    return EigenSystem(energies=energies, wavefunctions=psi, grid=grid, mass=mass)


def ground_state_energy(es: EigenSystem) -> float:
    return float(es.energies[0])


def truncation_bound(es: EigenSystem, T: float, hbar: float = HBAR) -> float:
    """Geometric estimate of the dropped spectral tail beyond the last state."""
    e = es.energies
    gap = max(e[-1] - e[-2], 1e-12) if len(e) > 1 else 1.0
    amp = float(np.max(np.abs(es.wavefunctions[-1])) ** 2)
    ratio = np.exp(-gap * T / hbar)
    return amp * np.exp(-e[-1] * T / hbar) / max(1.0 - ratio, 1e-300)


def spectral_propagator(es: EigenSystem, boundary: BoundarySet, T: float,
                        hbar: float = HBAR, rel_tol: float = 1e-10,
                        check_truncation: bool = True) -> PropagatorTable:
    """Assemble the propagator table from a truncated spectral sum.

    The truncation check compares the tail bound against rel_tol times the
    largest table entry; per-entry relative control is impossible for the
    exponentially small far-off-diagonal entries at small T.
    """
    xs = boundary.array
    if xs.min() < es.grid.xmin or xs.max() > es.grid.xmax:
        raise SpectralError("boundary points outside the eigensolver grid")
    # cubic interpolation of each grid eigenvector at the boundary points
    gx = es.grid.points
    psi_b = np.array([CubicSpline(gx, psi)(xs) for psi in es.wavefunctions])
    weights = np.exp(-es.energies * T / hbar)
    values = (psi_b * weights[:, None]).T @ psi_b
    values = 0.5 * (values + values.T)
    if check_truncation:
        bound = truncation_bound(es, T, hbar)
        if bound > rel_tol * float(np.max(values)):
            raise TruncationError(
                f"spectral tail bound {bound:.2e} exceeds {rel_tol:.0e} x max entry; "
                "increase n_states or T")
    return PropagatorTable(boundary=boundary, T=T, values=values,
                           sigmas=np.zeros_like(values))


def spectral_table(potential: PolynomialPotential, mass: float, boundary: BoundarySet,
                   T: float, grid: Grid = DEFAULT_GRID, n_states: int | None = None,
                   hbar: float = HBAR, rel_tol: float = 1e-10) -> PropagatorTable:
    """Convenience oracle: eigensolve with automatic truncation depth.

    With n_states=None, starts at 30 states and doubles until the spectral
    tail bound passes rel_tol; the box is widened (at fixed spacing) when the
    highest state has not decayed at the edges.
    """
    if n_states is not None:
        es = solve_eigen(potential, mass, grid, n_states, hbar)
        return spectral_propagator(es, boundary, T, hbar, rel_tol)
    k = 30
    while True:
        try:
            es = solve_eigen(potential, mass, grid, k, hbar)
        except GridTooNarrowError:
            if grid.xmax - grid.xmin > 100.0:
                raise
            half = 1.3 * max(abs(grid.xmin), grid.xmax)
            n_pts = int(round(2.0 * half / grid.spacing)) + 1
            grid = Grid(-half, half, n_pts)
            continue
        try:
            return spectral_propagator(es, boundary, T, hbar, rel_tol)
        except TruncationError:
            if k > len(grid.points) // 8:
                raise
            k *= 2
