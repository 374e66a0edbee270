"""Stochastic propagator oracle: path-integral Monte Carlo with fixed endpoints.

The time-sliced Euclidean amplitude is estimated by a reference-ratio
method: the free-kinetic Gaussian kernel centered on the discrete classical
path is exactly normalizable, and Metropolis sampling of that reference
yields G = G_ref * < exp(-(S_full - S_ref)/hbar) >_ref. Sampling the
reference (rather than the target) keeps the reweighting factor bounded for
potentials growing faster than quadratically. Statistical errors come from
blocking with jackknife over blocks.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .model import HBAR, BoundarySet, PolynomialPotential
from .spectral import PropagatorTable
from .trajectory import _initial_guesses


class PimcError(RuntimeError):
    pass


def default_slices(T: float) -> int:
    """Default slice count: step of 1/64 but never fewer than 32 slices."""
    return max(32, int(np.ceil(T / 0.015625)))


@dataclass(frozen=True)
class LatticeConfig:
    """Discretization and sampling settings for the Monte Carlo oracle.

    n_slices=None selects default_slices(T) at run time; epsilon is always
    T / n_slices.
    """

    n_slices: int | None = None
    rng_seed: int = 20457
    n_sweeps: int = 4096
    n_therm: int = 512
    n_decorrelate: int = 4

    def __post_init__(self):
        if self.n_slices is not None and self.n_slices < 2:
            raise PimcError("need at least 2 time slices")
        if min(self.n_sweeps, self.n_therm, self.n_decorrelate) <= 0:
            raise PimcError("sweep counts must be positive")

    def slices(self, T: float) -> int:
        return self.n_slices if self.n_slices is not None else default_slices(T)


@dataclass(frozen=True)
class EntryDiagnostics:
    """Per-entry sampling health data (sidecar to the propagator table)."""

    x_in: float
    x_fi: float
    acceptance: float
    proposal_width: float
    tau_int: float  # integrated autocorrelation time, in measurement units
    n_blocks: int


def euclidean_lattice_action(path, potential: PolynomialPotential, mass: float,
                             epsilon: float) -> float:
    """Trapezoid-rule lattice action sum_k [m dx^2/(2 eps) + eps (V_k+V_{k+1})/2]."""
    x = np.asarray(path, dtype=float)
    dx = np.diff(x)
    v = potential(x)
    return float(np.sum(0.5 * mass * dx**2 / epsilon)
                 + epsilon * np.sum(0.5 * (v[1:] + v[:-1])))


def _lattice_classical_path(potential, mass, T, x_in, x_fi, n):
    """Exact minimizer of the lattice action (Newton, tridiagonal Hessian)."""
    eps = T / n
    t = np.linspace(0.0, T, n + 1)
    best = None
    best_act = np.inf
    for guess in _initial_guesses(potential, mass, T, x_in, x_fi, t):
        x = guess.copy()
        x[0], x[-1] = x_in, x_fi
        ok = False
        for _ in range(80):
            grad = (mass * (2.0 * x[1:-1] - x[2:] - x[:-2]) / eps
                    + eps * potential.derivative(x[1:-1]))
            if np.max(np.abs(grad)) < 1e-12 * mass / eps * (1.0 + np.max(np.abs(x))):
                ok = True
                break
            ab = np.zeros((3, n - 1))
            ab[0, 1:] = -mass / eps
            ab[1, :] = 2.0 * mass / eps + eps * potential.second_derivative(x[1:-1])
            ab[2, :-1] = -mass / eps
            try:
                dx = solve_banded((1, 1), ab, -grad)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(dx)):
                break
            step = 1.0
            act0 = euclidean_lattice_action(x, potential, mass, eps)
            while step > 1e-8:
                trial = x.copy()
                trial[1:-1] += step * dx
                if euclidean_lattice_action(trial, potential, mass, eps) < act0 + 1e-14:
                    x = trial
                    break
                step *= 0.5
            else:
                break
        if ok:
            act = euclidean_lattice_action(x, potential, mass, eps)
            if act < best_act:
                best, best_act = x, act
    if best is None:
        raise PimcError(f"no lattice classical path for {x_in} -> {x_fi} at T={T}")
    return best, best_act


def _free_kinetic(delta, mass, eps, hbar):
    return 0.5 * mass * np.sum(np.diff(delta)**2) / eps / hbar


def _autocorrelation_time(w):
    """Integrated autocorrelation time with the standard self-consistent cutoff."""
    w = np.asarray(w, dtype=float)
    n = len(w)
    c = w - w.mean()
    var = np.dot(c, c) / n
    if var <= 0:
        return 0.5
    tau = 0.5
    for lag in range(1, min(n // 4, 2000)):
        rho = np.dot(c[:-lag], c[lag:]) / ((n - lag) * var)
        if rho < 0:
            break
        tau += rho
        if lag > 6.0 * tau:
            break
    return tau


def _blocked_error(w, tau):
    """Jackknife-over-blocks error of mean(w); block length >= 4 tau."""
    n = len(w)
    block = max(1, int(np.ceil(4.0 * tau)))
    n_blocks = n // block
    if n_blocks < 4:
        n_blocks = 4
        block = n // n_blocks
    trimmed = w[: n_blocks * block].reshape(n_blocks, block)
    bm = trimmed.mean(axis=1)
    total = bm.mean()
    jack = (n_blocks * total - bm) / (n_blocks - 1)
    sigma = np.sqrt((n_blocks - 1) / n_blocks * np.sum((jack - jack.mean())**2))
    return total, sigma, n_blocks


def _sample_entry(potential, mass, T, x_in, x_fi, cfg, seed_seq, hbar):
    """Estimate one amplitude; returns (G, sigma, EntryDiagnostics)."""
    n = cfg.slices(T)
    eps = T / n
    rng = np.random.Generator(np.random.PCG64(seed_seq))

    x_star, s_star = _lattice_classical_path(potential, mass, T, x_in, x_fi, n)
    # exactly-normalized free-kinetic Gaussian centered on the classical path
    log_gref = 0.5 * np.log(mass / (2.0 * np.pi * hbar * T)) - s_star / hbar

    omega_char = np.sqrt(max(np.max(np.abs(potential.second_derivative(x_star))), 1e-12) / mass)
    if eps * omega_char > 0.1:
        warnings.warn(f"epsilon={eps:.3g} coarse for curvature scale {omega_char:.3g}",
                      RuntimeWarning, stacklevel=3)

    delta = np.zeros(n + 1)
    odd = np.arange(1, n, 2)
    even = np.arange(2, n, 2)
    width = np.sqrt(hbar * eps / mass)
    kin = mass / eps / hbar

    # long-wavelength sine modes for collective Metropolis moves; single-site
    # updates alone decorrelate the bridge only after O(n^2) sweeps
    ks = np.arange(n + 1)
    n_modes = min(8, n - 1)
    modes = [np.sin(np.pi * p * ks / n) for p in range(1, n_modes + 1)]
    mode_diffs = [np.diff(s) for s in modes]
    mode_q = [float(np.sum(d**2)) for d in mode_diffs]
    mode_width = [2.4 / np.sqrt(kin * q) for q in mode_q]

    def half_sweep(idx):
        prop = delta[idx] + width * rng.uniform(-1.0, 1.0, len(idx))
        left, right = delta[idx - 1], delta[idx + 1]
        ds = kin * (0.5 * ((prop - left)**2 + (right - prop)**2
                           - (delta[idx] - left)**2 - (right - delta[idx])**2))
        acc = rng.random(len(idx)) < np.exp(-np.minimum(ds, 700.0))
        delta[idx[acc]] = prop[acc]
        return int(np.sum(acc)), len(idx)

    def mode_sweep():
        dd = np.diff(delta)
        for p in range(n_modes):
            a = mode_width[p] * rng.uniform(-1.0, 1.0)
            ds = kin * (a * float(np.dot(dd, mode_diffs[p])) + 0.5 * a * a * mode_q[p])
            if rng.random() < np.exp(-min(ds, 700.0)):
                delta[:] += a * modes[p]
                dd += a * mode_diffs[p]

    accepted = proposed = 0
    for sweep in range(cfg.n_therm):
        for idx in (odd, even):
            a, p = half_sweep(idx)
            accepted += a
            proposed += p
        mode_sweep()
        if (sweep + 1) % 32 == 0 and proposed:
            rate = accepted / proposed
            if rate < 0.4:
                width *= 0.8
            elif rate > 0.6:
                width *= 1.25
            accepted = proposed = 0

    weights = np.empty(cfg.n_sweeps // cfg.n_decorrelate)
    accepted = proposed = 0
    k = 0
    for sweep in range(cfg.n_sweeps):
        for idx in (odd, even):
            a, p = half_sweep(idx)
            accepted += a
            proposed += p
        mode_sweep()
        if (sweep + 1) % cfg.n_decorrelate == 0:
            # antithetic pair (delta, -delta): the reference weight is even in
            # delta, so averaging cancels the odd-order reweighting skew
            kin_free = _free_kinetic(delta, mass, eps, hbar)
            w = 0.0
            for sgn in (1.0, -1.0):
                s_full = euclidean_lattice_action(x_star + sgn * delta, potential, mass, eps)
                w += 0.5 * np.exp(-((s_full - s_star) / hbar - kin_free))
            weights[k] = w
            k += 1
    weights = weights[:k]

    tau = _autocorrelation_time(weights)
    if tau > 2.0 * max(1.0, cfg.n_sweeps / cfg.n_decorrelate / 16.0):
        warnings.warn(f"autocorrelation time {tau:.1f} measurements is large; "
                      "increase n_decorrelate or n_sweeps", RuntimeWarning, stacklevel=3)
    mean_w, sigma_w, n_blocks = _blocked_error(weights, tau)
    if mean_w <= 0:
        raise PimcError("non-positive reweighting average (sampling failure)")
    gref = np.exp(log_gref)
    diag = EntryDiagnostics(x_in=x_in, x_fi=x_fi,
                            acceptance=accepted / max(proposed, 1),
                            proposal_width=float(width), tau_int=float(tau),
                            n_blocks=n_blocks)
    return gref * mean_w, gref * sigma_w, diag


def pimc_table_with_diagnostics(potential: PolynomialPotential, mass: float,
                                boundary: BoundarySet, T: float,
                                cfg: LatticeConfig | None = None,
                                hbar: float = HBAR, n_threads: int = 1):
    """PropagatorTable plus per-entry diagnostics.

    One independent RNG stream per unordered boundary pair, derived from the
    master seed by SeedSequence spawning, so results do not depend on
    execution order or thread count.
    """
    if not potential.is_confining:
        raise PimcError("potential must be confining")
    if cfg is None:
        cfg = LatticeConfig()
    xs = boundary.array
    m = len(xs)
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    streams = np.random.SeedSequence(cfg.rng_seed).spawn(len(pairs))

    def work(args):
        (i, j), ss = args
        return _sample_entry(potential, mass, T, xs[i], xs[j], cfg, ss, hbar)

    jobs = list(zip(pairs, streams))
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            outputs = list(pool.map(work, jobs))
    else:
        outputs = [work(j) for j in jobs]

    values = np.zeros((m, m))
    sigmas = np.zeros((m, m))
    diags = []
    for (i, j), (g, s, d) in zip(pairs, outputs):
        values[i, j] = values[j, i] = g
        sigmas[i, j] = sigmas[j, i] = s
        diags.append(d)
    table = PropagatorTable(boundary=boundary, T=T, values=values, sigmas=sigmas)
    return table, tuple(diags)


def pimc_propagator(potential: PolynomialPotential, mass: float, boundary: BoundarySet,
                    T: float, cfg: LatticeConfig | None = None, hbar: float = HBAR,
                    n_threads: int = 1) -> PropagatorTable:
    """Monte Carlo estimate of the amplitude table with statistical sigmas."""
    table, _ = pimc_table_with_diagnostics(potential, mass, boundary, T, cfg,
                                           hbar, n_threads)
    return table


def diagnostics_to_csv(diags, path, comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["x_in", "x_fi", "acceptance", "proposal_width",
                        "tau_int", "n_blocks"])
        for d in diags:
            writer.writerow([d.x_in, d.x_fi, f"{d.acceptance:.4f}",
                             repr(d.proposal_width), f"{d.tau_int:.3f}", d.n_blocks])
