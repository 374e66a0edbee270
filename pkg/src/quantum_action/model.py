"""Physical model: polynomial potentials, action parameters, grids.

Units are fixed to hbar = k_B = 1 (mass is a free parameter); functions
that depend on hbar accept it as a keyword for the rare override.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HBAR = 1.0
KBOLTZ = 1.0

MAX_DEGREE = 8


class ModelError(ValueError):
    """Invalid physical-model input."""


@dataclass(frozen=True)
class PolynomialPotential:
    """1-D polynomial potential V(x) = sum_k coeffs[k] * x**k."""

    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if self.degree < 2:
            raise ModelError("potential degree must be >= 2")
        if self.degree > MAX_DEGREE:
            raise ModelError(f"potential degree {self.degree} exceeds {MAX_DEGREE}")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_confining(self) -> bool:
        return self.degree % 2 == 0 and self.coeffs[-1] > 0

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def derivative(self, x):
        d = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(x, d)

    def second_derivative(self, x):
        d2 = np.polynomial.polynomial.polyder(self.coeffs, 2)
        return np.polynomial.polynomial.polyval(x, d2)

    def shifted(self, delta: float) -> "PolynomialPotential":
        """Potential with a constant offset added to v0."""
        c = list(self.coeffs)
        c[0] += delta
        return PolynomialPotential(tuple(c))

    def minima(self):
        """Real local minima (positions, values), sorted by position."""
        d = np.polynomial.polynomial.polyder(self.coeffs)
        roots = np.polynomial.polynomial.polyroots(d)
        real = roots[np.abs(roots.imag) < 1e-9].real
        xs = sorted(x for x in real if self.second_derivative(x) > 0)
        return np.array(xs), self(np.array(xs))


def harmonic_potential(mass: float = 1.0, omega: float = 1.0) -> PolynomialPotential:
    """V(x) = (1/2) m omega^2 x^2."""
    return PolynomialPotential((0.0, 0.0, 0.5 * mass * omega**2))


def quartic_potential(v4: float = 1.0) -> PolynomialPotential:
    """V(x) = v4 x^4."""
    if v4 <= 0:
        raise ModelError("v4 must be positive")
    return PolynomialPotential((0.0, 0.0, 0.0, 0.0, v4))


def anharmonic_potential(v2: float = 1.0, lam: float = 0.0, v4: float = 1.0) -> PolynomialPotential:
    """V(x) = v2 x^2 + lam * v4 x^4 (weak-anharmonic family)."""
    if lam < 0:
        raise ModelError("coupling lam must be non-negative")
    if lam == 0:
        return PolynomialPotential((0.0, 0.0, v2))
    return PolynomialPotential((0.0, 0.0, v2, 0.0, lam * v4))


def double_well_from_shape(A: float, a: float) -> PolynomialPotential:
    """Expand V(x) = A (x^2 - a^2)^2 into monomial coefficients.

    Returns (v0, v1, v2, v3, v4) = (A a^4, 0, -2 A a^2, 0, A).
    """
    if A <= 0 or a <= 0:
        raise ModelError("double well requires A > 0 and a > 0")
    return PolynomialPotential((A * a**4, 0.0, -2.0 * A * a**2, 0.0, A))


@dataclass(frozen=True)
class ActionParams:
    """Parameters of a classical-form action: mass, potential, normalization.

    log_z is ln of the normalization factor; it is a fit output, never a
    physical input. transition_time is the Euclidean time extent T.
    """

    mass: float
    potential: PolynomialPotential
    log_z: float
    transition_time: float

    def __post_init__(self):
        if self.mass <= 0:
            raise ModelError("mass must be positive")
        if self.transition_time <= 0:
            raise ModelError("transition_time must be positive")

    @property
    def beta(self) -> float:
        """Inverse temperature beta = T / hbar."""
        return self.transition_time / HBAR

    @property
    def temperature(self) -> float:
        return 1.0 / (KBOLTZ * self.beta)


@dataclass(frozen=True)
class Grid:
    """Uniform position grid for the spectral solver."""

    xmin: float
    xmax: float
    n_points: int

    def __post_init__(self):
        if self.xmax <= self.xmin:
            raise ModelError("xmax must exceed xmin")
        if self.n_points < 3:
            raise ModelError("grid needs at least 3 points")

    @property
    def spacing(self) -> float:
        return (self.xmax - self.xmin) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.n_points)


DEFAULT_GRID = Grid(-8.0, 8.0, 2001)


@dataclass(frozen=True)
class BoundarySet:
    """Initial/final boundary positions {x_1 ... x_J} covering [-a, +a]."""

    points: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ModelError("need at least 2 boundary points")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ModelError("boundary points must be strictly increasing")

    @classmethod
    def uniform(cls, halfwidth: float, n: int = 6) -> "BoundarySet":
        if halfwidth <= 0:
            raise ModelError("halfwidth must be positive")
        return cls(tuple(np.linspace(-halfwidth, halfwidth, n)))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.points)
