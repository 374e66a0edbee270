"""Euclidean classical boundary-value problem for a trial action.

Solves m x'' = +V'(x) (imaginary-time sign) with fixed endpoints by damped
Newton relaxation on a uniform time grid, refined by Richardson
extrapolation; among multiple classical solutions the least-action one is
returned. Relaxation is used instead of shooting because shooting error
grows like exp(omega*T) and fails for the long transition times needed by
the temperature scans.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import solve_banded

from .model import HBAR, ActionParams, PolynomialPotential


class TrajectoryError(RuntimeError):
    pass


class NoConvergenceError(TrajectoryError):
    pass


class CausticError(TrajectoryError):
    """Conjugate point detected along the returned path."""


@dataclass(frozen=True)
class ClassicalPath:
    """Solution of the Euclidean equation of motion with fixed endpoints."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    action_value: float
    discarded_solutions: int = 0
    ambiguous: bool = False

    def euclidean_energy(self, mass: float, potential: PolynomialPotential) -> np.ndarray:
        """E(t) = m/2 x'^2 - V(x); constant along an exact solution."""
        return 0.5 * mass * self.velocities**2 - potential(self.positions)


def _newton_relax(potential, mass, T, x_in, x_fi, guess, max_iter=60):
    """Damped Newton on the discretized EOM; returns interior+endpoint path or None."""
    x = guess.copy()
    x[0], x[-1] = x_in, x_fi
    n = len(x) - 1
    h = T / n
    fscale = mass * (1.0 + abs(x_in) + abs(x_fi)) / h**2

    def residual(xv):
        return (mass * (xv[2:] - 2.0 * xv[1:-1] + xv[:-2]) / h**2
                - potential.derivative(xv[1:-1]))

    F = residual(x)
    fnorm = np.max(np.abs(F))
    for _ in range(max_iter):
        if not np.isfinite(fnorm):
            return None
        if fnorm < 1e-11 * fscale:
            return x
        d2 = potential.second_derivative(x[1:-1])
        ab = np.zeros((3, n - 1))
        ab[0, 1:] = mass / h**2
        ab[1, :] = -2.0 * mass / h**2 - d2
        ab[2, :-1] = mass / h**2
        try:
            dx = solve_banded((1, 1), ab, -F)
        except np.linalg.LinAlgError:
            return None
        step = 1.0
        while step > 1e-6:
            trial = x.copy()
            trial[1:-1] += step * dx
            Ft = residual(trial)
            ft = np.max(np.abs(Ft))
            if np.isfinite(ft) and ft < fnorm * (1.0 - 0.25 * step) + 1e-14 * fscale:
                x, F, fnorm = trial, Ft, ft
                break
            step *= 0.5
        else:
            return None
    return x if fnorm < 1e-9 * fscale else None


def _initial_guesses(potential, mass, T, x_in, x_fi, t):
    line = x_in + (x_fi - x_in) * t / T
    guesses = [line]
    mins, _ = potential.minima()
    for x0 in mins:
        w2 = potential.second_derivative(x0) / mass
        if w2 <= 0:
            continue
        w = np.sqrt(w2)
        # relax from x_in down to the well and back up to x_fi
        decay = (x0 + (x_in - x0) * np.exp(-w * t)
                 + (x_fi - x0) * np.exp(-w * (T - t)))
        guesses.append(decay)
    if len(mins) == 2 and x_in * x_fi < 0:
        # kink-like sweep through the barrier for well-to-well transitions
        w = np.sqrt(max(potential.second_derivative(mins[0]), 1e-6) / mass)
        prof = np.tanh(w * (t - 0.5 * T))
        prof = prof / max(prof[-1], 1e-12)
        guesses.append(0.5 * (x_in + x_fi) + 0.5 * (x_fi - x_in) * prof)
    return guesses


def _derivative(x, h):
    """Fourth-order finite-difference derivative on a uniform grid."""
    v = np.empty_like(x)
    v[2:-2] = (x[:-4] - 8 * x[1:-3] + 8 * x[3:-1] - x[4:]) / (12 * h)
    for k in (0, 1):
        c = (-25 * x[k] + 48 * x[k + 1] - 36 * x[k + 2] + 16 * x[k + 3] - 3 * x[k + 4]) / (12 * h)
        v[k] = c
    for k in (-1, -2):
        c = (25 * x[k] - 48 * x[k - 1] + 36 * x[k - 2] - 16 * x[k - 3] + 3 * x[k - 4]) / (12 * h)
        v[k] = c
    return v


def _discrete_action(x, potential, mass, h):
    v = np.diff(x) / h
    kin = 0.5 * mass * np.sum(v**2) * h
    pot = np.trapezoid(potential(x), dx=h)
    return kin + pot


def _check_caustic(x, potential, mass, h):
    """Jacobi field eta'' = (V''/m) eta from eta(0)=0; sign change => conjugate point."""
    d2 = potential.second_derivative(x) / mass
    eta_prev, eta = 0.0, h
    for k in range(1, len(x) - 1):
        eta_next = (2.0 + h**2 * d2[k]) * eta - eta_prev
        if eta_next <= 0.0:
            raise CausticError("conjugate point on the classical path")
        # rescale to avoid overflow on long paths
        if eta_next > 1e100:
            eta_next *= 1e-100
            eta *= 1e-100
        eta_prev, eta = eta, eta_next


def solve_euclidean_bvp(action: ActionParams, x_in: float, x_fi: float,
                        n_nodes: int | None = None,
                        initial_guess: np.ndarray | None = None,
                        check_caustics: bool = False) -> ClassicalPath:
    """Least-action Euclidean path between fixed endpoints.

    initial_guess (positions on a uniform grid spanning [0, T]) warm-starts
    the relaxation; when it converges the multi-guess sweep is skipped, so a
    caller iterating over slowly-changing parameters stays on one branch.
    """
    potential, mass, T = action.potential, action.mass, action.transition_time
    if not potential.is_confining:
        raise TrajectoryError("potential must be confining")
    if n_nodes is None:
        n_nodes = int(np.ceil(max(512.0, 160.0 * T) / 4.0) * 4)
    n = n_nodes
    t = np.linspace(0.0, T, n + 1)

    solutions = []
    if initial_guess is not None:
        g = np.interp(t, np.linspace(0.0, T, len(initial_guess)), initial_guess)
        g[0], g[-1] = x_in, x_fi
        sol = _newton_relax(potential, mass, T, x_in, x_fi, g)
        if sol is not None:
            solutions.append(sol)
    if not solutions:
        for g in _initial_guesses(potential, mass, T, x_in, x_fi, t):
            sol = _newton_relax(potential, mass, T, x_in, x_fi, g)
            if sol is None:
                continue
            if all(np.max(np.abs(sol - s)) > 1e-6 for s in solutions):
                solutions.append(sol)
    if not solutions:
        raise NoConvergenceError(
            f"no classical path found for {x_in} -> {x_fi} at T={T}")

    h = T / n
    acts = [_discrete_action(s, potential, mass, h) for s in solutions]
    order = np.argsort(acts)
    best = solutions[order[0]]
    ambiguous = len(acts) > 1 and acts[order[1]] - acts[order[0]] < 1e-8
    if ambiguous:
        warnings.warn("two classical paths within 1e-8 in action; keeping one",
                      RuntimeWarning, stacklevel=2)

    # refine: re-solve on the doubled grid and Richardson-extrapolate O(h^4)
    t2 = np.linspace(0.0, T, 2 * n + 1)
    g2 = np.interp(t2, t, best)
    fine = _newton_relax(potential, mass, T, x_in, x_fi, g2)
    if fine is None:
        fine = g2
    x = (4.0 * fine[::2] - best) / 3.0
    x[0], x[-1] = x_in, x_fi

    if check_caustics:
        _check_caustic(x, potential, mass, h)

    vel = _derivative(x, h)
    lagr = 0.5 * mass * vel**2 + potential(x)
    action_value = float(simpson(lagr, dx=h))
    return ClassicalPath(times=t, positions=x, velocities=vel,
                         action_value=action_value,
                         discarded_solutions=len(solutions) - 1,
                         ambiguous=ambiguous)


def amplitude_from_action(action: ActionParams, x_in: float, x_fi: float,
                          hbar: float = HBAR, **bvp_kwargs) -> float:
    """G = exp(log_z - S[classical path]/hbar) for the given endpoints."""
    path = solve_euclidean_bvp(action, x_in, x_fi, **bvp_kwargs)
    return float(np.exp(action.log_z - path.action_value / hbar))


def harmonic_path(mass: float, omega: float, T: float, x_in: float, x_fi: float,
                  times: np.ndarray) -> np.ndarray:
    """Closed-form Euclidean path of the harmonic oscillator (test oracle)."""
    s = np.sinh(omega * T)
    return (x_in * np.sinh(omega * (T - times)) + x_fi * np.sinh(omega * times)) / s


def harmonic_action(mass: float, omega: float, T: float, x_in: float, x_fi: float) -> float:
    """Closed-form Euclidean classical action of the harmonic oscillator."""
    return (mass * omega / (2.0 * np.sinh(omega * T))
            * ((x_in**2 + x_fi**2) * np.cosh(omega * T) - 2.0 * x_in * x_fi))


def harmonic_log_z(mass: float, omega: float, T: float, hbar: float = HBAR) -> float:
    """ln of the Euclidean harmonic normalization sqrt(m w / (2 pi hbar sinh wT))."""
    return 0.5 * np.log(mass * omega / (2.0 * np.pi * hbar * np.sinh(omega * T)))
