"""Instanton extraction from double-well actions, classical or fitted.

The instanton is the zero-Euclidean-energy kink interpolating between the
degenerate minima +-a of a double-well potential. Its action comes from the
spatial quadrature S = int_{-a}^{+a} sqrt(2 m [V(x) - V_min]) dx and the
profile from inverting t(x) = int_0^x sqrt(m / (2 [V - V_min])) dx', with
the logarithmic endpoint approach handled by the local harmonic expansion.
Fitted potentials are symmetrized (odd coefficients dropped) before use, so
temperature-indexed fit series map to quantum instantons via tau = hbar/(k_B T).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.interpolate import CubicSpline

from .model import HBAR, KBOLTZ, ActionParams, PolynomialPotential
from .fitter import FitSeries


class InstantonError(RuntimeError):
    pass


class NotADoubleWellError(InstantonError):
    """Symmetrized potential lacks the v2 < 0 < v4 double-well structure."""


class AsymmetricWellError(InstantonError):
    """Pre-symmetrization minima heights differ beyond tolerance."""


@dataclass(frozen=True)
class InstantonProfile:
    """Centered kink x(t) between the wells of a symmetrized double well.

    source_T is the transition time whose fitted action supplied the
    potential, or None for a classical input; temperature is the thermal
    label tau = hbar / (k_B T) when source_T is set.
    """

    times: np.ndarray
    positions: np.ndarray
    well_edges: tuple
    action: float
    source_T: float | None = None

    @property
    def temperature(self) -> float | None:
        if self.source_T is None:
            return None
        return HBAR / (KBOLTZ * self.source_T)

    def to_csv(self, path, comment: str | None = None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["t", "x"])
            for t, x in zip(self.times, self.positions):
                writer.writerow([repr(float(t)), repr(float(x))])


def _symmetrize(potential: PolynomialPotential, coeff_errors=None) -> PolynomialPotential:
    """Drop odd coefficients; error if the original minima heights disagree
    by more than 5x the propagated fit error (or an absolute fallback)."""
    xs, vals = potential.minima()
    if len(xs) == 2:
        mismatch = abs(vals[1] - vals[0])
        if coeff_errors is not None:
            k = np.arange(len(potential.coeffs))
            scale = float(np.max(np.abs(xs)))
            tol = 5.0 * float(np.sum(np.asarray(coeff_errors) * scale**k))
        else:
            tol = 5e-6 * max(1.0, float(np.max(np.abs(vals))))
        if mismatch > max(tol, 1e-12):
            raise AsymmetricWellError(
                f"minima heights differ by {mismatch:.3g} (tolerance {tol:.3g})")
    coeffs = tuple(c if k % 2 == 0 else 0.0
                   for k, c in enumerate(potential.coeffs))
    return PolynomialPotential(coeffs)


def extract_instanton(potential: PolynomialPotential, mass: float,
                      source_T: float | None = None, coeff_errors=None,
                      n_profile: int = 801, hbar: float = HBAR) -> InstantonProfile:
    """Kink profile and action of a (symmetrized) double-well potential.

    Accepts the potential of a fitted quantum action or a classical one; the
    quartic ansatz must have v4 > 0 and v2 < 0 after symmetrization.
    """
    if mass <= 0:
        raise InstantonError("mass must be positive")
    pot = _symmetrize(potential, coeff_errors)
    if pot.degree < 4 or pot.coeffs[4] <= 0 or pot.coeffs[2] >= 0:
        raise NotADoubleWellError(
            f"need v4 > 0 and v2 < 0, got v2={pot.coeffs[2]:.4g}, "
            f"v4={pot.coeffs[4] if pot.degree >= 4 else 0.0:.4g}")
    xs, vals = pot.minima()
    if len(xs) != 2:
        raise NotADoubleWellError("symmetrized potential does not have two minima")
    a = float(xs[1])
    v_min = float(vals[1])

    def gap(x):
        return np.maximum(pot(x) - v_min, 0.0)

    action, act_err = quad(lambda x: np.sqrt(2.0 * mass * gap(x)), -a, a, limit=200)
    if not np.isfinite(action) or action <= 0:
        raise InstantonError("instanton action quadrature failed")

    # t(x) on [0, a - delta]; near the well the harmonic form
    # a - x(t) = (a - x0) exp(-w (t - t0)) takes over analytically
    curv = float(pot.second_derivative(a))
    omega_w = np.sqrt(curv / mass)
    # handoff distance to the analytic harmonic tail: small enough that the
    # anharmonic correction is ~1e-8 a^2, large enough that V(x) - V_min
    # (a ~delta^2 cancellation) keeps ~8 significant digits in float64
    delta = 1e-4 * a

    # t(x) = (1/w) ln(a/(a-x)) + int_0^x f, with the logarithmic divergence
    # split off analytically so f stays regular up to the well; nodes are
    # log-spaced in (a - x) so the spacing in t stays roughly uniform
    x_nodes = a - a * np.geomspace(delta / a, 1.0, 4001)[::-1]
    x_nodes[0] = 0.0

    fr = np.sqrt(mass / (2.0 * gap(x_nodes))) - 1.0 / (omega_w * (a - x_nodes))
    t_nodes = (cumulative_trapezoid(fr, x_nodes, initial=0.0)
               + np.log(a / (a - x_nodes)) / omega_w)
    x_of_t = CubicSpline(t_nodes, x_nodes)
    t_edge = float(t_nodes[-1])

    t_max = 12.0 / omega_w
    times = np.linspace(-t_max, t_max, n_profile)
    positions = np.empty_like(times)
    at = np.abs(times)
    inner = at <= t_edge
    positions[inner] = x_of_t(at[inner])
    positions[~inner] = a - (a - x_nodes[-1]) * np.exp(-omega_w * (at[~inner] - t_edge))
    positions *= np.sign(times + 1e-300)
    mid = n_profile // 2
    if n_profile % 2 == 1:
        positions[mid] = 0.0
    if np.any(np.diff(positions) < -1e-12 * a):
        raise InstantonError("interpolated kink profile is not monotone")

    return InstantonProfile(times=times, positions=positions,
                            well_edges=(-a, a), action=float(action),
                            source_T=source_T)


def instanton_from_params(params: ActionParams, coeff_errors=None,
                          hbar: float = HBAR) -> InstantonProfile:
    """Instanton of a fitted quantum action, labeled by its transition time."""
    return extract_instanton(params.potential, params.mass,
                             source_T=params.transition_time,
                             coeff_errors=coeff_errors, hbar=hbar)


@dataclass(frozen=True)
class ScanEntry:
    """One temperature point of a quantum-instanton scan."""

    source_T: float
    temperature: float
    profile: InstantonProfile | None
    error: str | None = None


def quantum_instanton_scan(series: FitSeries, hbar: float = HBAR) -> tuple:
    """One instanton per fitted T; structure failures become error records.

    Larger transition times T map to smaller temperature labels
    tau = hbar / (k_B T), so the largest-T entry approximates the
    zero-temperature quantum instanton.
    """
    entries = []
    for r in series.results:
        T = r.params.transition_time
        tau = hbar / (KBOLTZ * T)
        n_coef = len(r.params.potential.coeffs)
        errs = r.param_errors[1: 1 + n_coef]
        try:
            prof = instanton_from_params(r.params, coeff_errors=errs, hbar=hbar)
            entries.append(ScanEntry(source_T=T, temperature=tau, profile=prof))
        except InstantonError as exc:
            entries.append(ScanEntry(source_T=T, temperature=tau,
                                     profile=None, error=str(exc)))
    return tuple(entries)


def scan_summary_to_csv(entries, path, comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["T", "temperature", "well_edge", "action", "error"])
        for e in entries:
            if e.profile is not None:
                writer.writerow([e.source_T, repr(e.temperature),
                                 repr(e.profile.well_edges[1]),
                                 repr(e.profile.action), ""])
            else:
                writer.writerow([e.source_T, repr(e.temperature), "", "", e.error])
