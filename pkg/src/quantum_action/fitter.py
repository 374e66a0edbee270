"""Global least-squares fit of quantum-action parameters to propagator tables.

The model for each boundary pair is ln G_ij = C - S(x_i -> x_j)/hbar, where
S is the classical action of the trial parameters along the least-action
Euclidean path and C = log_z - v0*T/hbar is the gauge-invariant
normalization (a constant shift of the potential is exactly absorbed by the
normalization factor, so only C is constrained by the data). After
convergence the gauge is fixed by the harmonic convention
log_z = ln sqrt(m_fit * w / (2 pi hbar sinh(w T))) with w the curvature
frequency at the fitted potential minimum, and v0 = (log_z - C) * hbar / T.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .model import HBAR, ActionParams, BoundarySet, PolynomialPotential
from .spectral import PropagatorTable
from .trajectory import harmonic_log_z, solve_euclidean_bvp

PARAM_NAMES = ("m", "v0", "v1", "v2", "v3", "v4", "v5", "v6", "v7", "v8")


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitResult:
    """Fitted action parameters with 1-sigma errors and fit quality."""

    params: ActionParams
    param_errors: np.ndarray  # aligned with [m, v0 .. vN, logZ]
    chi2: float
    dof: int
    interval: tuple
    gauge_logz: float  # gauge-invariant combination logZ - v0*T/hbar
    n_iterations: int

    @property
    def param_vector(self) -> np.ndarray:
        """[m, v0, ..., vN] as fitted (v0 under the harmonic gauge convention)."""
        return np.concatenate(([self.params.mass], self.params.potential.coeffs))

    @property
    def logz_error(self) -> float:
        return float(self.param_errors[-1])


@dataclass(frozen=True)
class FitSeries:
    """Fit results over a scan variable (interval half-widths or T values)."""

    scan_values: np.ndarray
    results: tuple
    kind: str  # "interval" or "temperature"

    def __post_init__(self):
        sv = np.asarray(self.scan_values, dtype=float)
        if np.any(np.diff(sv) <= 0):
            raise FitError("scan values must be strictly increasing")
        object.__setattr__(self, "scan_values", sv)
        object.__setattr__(self, "results", tuple(self.results))

    @property
    def param_matrix(self) -> np.ndarray:
        return np.array([r.param_vector for r in self.results])

    @property
    def mean_params(self) -> np.ndarray:
        return self.param_matrix.mean(axis=0)

    @property
    def sigma_params(self) -> np.ndarray:
        pm = self.param_matrix
        if pm.shape[0] < 2:
            return np.zeros(pm.shape[1])
        return pm.std(axis=0, ddof=1)

    def to_csv(self, path, comment: str | None = None):
        n_coef = self.param_matrix.shape[1] - 1
        names = list(PARAM_NAMES[: n_coef + 1])
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh)
            header = ["scan", "T"]
            for nm in names:
                header += [nm, f"{nm}_err"]
            header += ["logZ", "logZ_err", "gauge_logZ", "chi2", "dof", "interval_lo", "interval_hi"]
            writer.writerow(header)
            for sv, r in zip(self.scan_values, self.results):
                row = [sv, r.params.transition_time]
                for val, err in zip(r.param_vector, r.param_errors[:-1]):
                    row += [repr(float(val)), repr(float(err))]
                row += [repr(r.params.log_z), repr(r.logz_error), repr(r.gauge_logz),
                        repr(r.chi2), r.dof, r.interval[0], r.interval[1]]
                writer.writerow(row)
            mean = self.mean_params
            sig = self.sigma_params
            row = ["mean", ""]
            for v, s in zip(mean, sig):
                row += [repr(float(v)), repr(float(s))]
            writer.writerow(row + [""] * 7)


def one_loop_coefficients(mass: float, omega: float, lam: float):
    """One-loop shifts of the quadratic and quartic couplings.

    delta_v2 = 3 lam / (m w), delta_v4 = 9 lam^2 / (m w^2).
    """
    if mass <= 0 or omega <= 0:
        raise FitError("mass and omega must be positive")
    if lam < 0:
        raise FitError("coupling must be non-negative")
    return 3.0 * lam / (mass * omega), 9.0 * lam**2 / (mass * omega**2)


def _pairs(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


class _Objective:
    """ln-amplitude residuals and analytic Jacobian for the action fit.

    Parameter vector: theta = [log m, v1 .. vN, C]. The Jacobian uses the
    stationarity of the action: at the solved path, dS/d(param) is the
    integral of the corresponding Lagrangian term along the fixed path.
    """

    def __init__(self, table: PropagatorTable, degree: int, hbar: float):
        self.table = table
        self.degree = degree
        self.hbar = hbar
        self.xs = table.boundary.array
        self.pairs = _pairs(len(self.xs))
        self.T = table.T
        lnG = np.array([np.log(table.values[i, j]) for i, j in self.pairs])
        if np.any(~np.isfinite(lnG)):
            raise FitError("table entries must be positive")
        self.lnG = lnG
        sig = np.array([table.sigmas[i, j] for i, j in self.pairs])
        if np.any(sig > 0):
            rel = sig / np.array([table.values[i, j] for i, j in self.pairs])
            self.weights = 1.0 / np.maximum(rel, 1e-12) ** 2
        else:
            self.weights = np.ones(len(self.pairs))
        self._guess = {}

    def potential_from(self, theta) -> PolynomialPotential:
        coeffs = np.concatenate(([0.0], theta[1: self.degree + 1]))
        return PolynomialPotential(tuple(coeffs))

    def evaluate(self, theta):
        """Residuals r, Jacobian J, chi2 at theta."""
        mass = float(np.exp(theta[0]))
        C = theta[-1]
        pot = self.potential_from(theta)
        if not pot.is_confining:
            return None
        params = ActionParams(mass, pot, 0.0, self.T)
        n_par = len(theta)
        r = np.empty(len(self.pairs))
        J = np.empty((len(self.pairs), n_par))
        for idx, (i, j) in enumerate(self.pairs):
            try:
                path = solve_euclidean_bvp(params, self.xs[i], self.xs[j],
                                           initial_guess=self._guess.get((i, j)))
            except RuntimeError:
                return None
            self._guess[(i, j)] = path.positions
            h = path.times[1] - path.times[0]
            kin = 0.5 * simpson(path.velocities**2, dx=h)
            model = C - path.action_value / self.hbar
            r[idx] = model - self.lnG[idx]
            J[idx, 0] = -mass * kin / self.hbar
            xk = path.positions.copy()
            for k in range(1, self.degree + 1):
                J[idx, k] = -simpson(xk, dx=h) / self.hbar
                if k < self.degree:
                    xk *= path.positions
            J[idx, -1] = 1.0
        chi2 = float(np.sum(self.weights * r**2))
        return r, J, chi2


def fit_quantum_action(table: PropagatorTable, ansatz_degree: int = 4,
                       init: ActionParams | None = None, hbar: float = HBAR,
                       max_iter: int = 200, rel_tol: float = 1e-12) -> FitResult:
    """Damped Gauss-Newton fit of (m, v1..vN, C) to ln of the table entries.

    init supplies the starting mass and potential (typically the classical
    parameters); the normalization C starts at its conditionally-optimal
    value given those parameters.
    """
    if ansatz_degree < 2 or ansatz_degree % 2:
        raise FitError("ansatz degree must be even and >= 2")
    if init is None:
        raise FitError("an initial ActionParams guess is required")
    obj = _Objective(table, ansatz_degree, hbar)

    theta = np.zeros(ansatz_degree + 2)
    theta[0] = np.log(init.mass)
    init_coeffs = list(init.potential.coeffs[1:]) + [0.0] * ansatz_degree
    theta[1: ansatz_degree + 1] = init_coeffs[:ansatz_degree]
    if theta[ansatz_degree] <= 0:
        theta[ansatz_degree] = 1e-3  # keep the trial potential confining
    out = obj.evaluate(theta)
    if out is None:
        raise FitError("initial parameters not solvable")
    r, J, chi2 = out
    # optimal C given the initial action parameters (model is linear in C)
    w = obj.weights
    theta[-1] -= np.sum(w * r) / np.sum(w)
    out = obj.evaluate(theta)
    r, J, chi2 = out

    lam = 1e-3
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        A = (J.T * w) @ J
        g = (J.T * w) @ r
        accepted = False
        for _ in range(50):
            try:
                step = np.linalg.solve(A + lam * np.diag(np.diag(A)), -g)
            except np.linalg.LinAlgError as exc:
                raise FitError("singular normal equations (degenerate boundary set)") from exc
            trial = theta + step
            out = obj.evaluate(trial)
            if out is not None and out[2] < chi2:
                theta = trial
                r, J, chi2_new = out
                accepted = True
                lam = max(lam / 10.0, 1e-14)
                break
            lam *= 10.0
            if lam > 1e12:
                break
        if not accepted:
            break  # stationary: no decreasing step in any trust region
        if abs(chi2 - chi2_new) <= rel_tol * max(chi2, 1e-300) and np.max(np.abs(step)) < 1e-8:
            chi2 = chi2_new
            break
        chi2 = chi2_new
    else:
        raise FitError(f"no convergence after {max_iter} iterations")

    dof = len(obj.pairs) - len(theta)
    if dof <= 0:
        raise FitError("more parameters than independent amplitudes")
    A = (J.T * w) @ J
    try:
        cov = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise FitError("singular normal equations at the optimum") from exc
    exact_table = not np.any(obj.table.sigmas > 0)
    if exact_table:
        cov = cov * (chi2 / dof)
    sigma_theta = np.sqrt(np.maximum(np.diag(cov), 0.0))

    mass = float(np.exp(theta[0]))
    C = float(theta[-1])
    T = table.T
    pot_fit = obj.potential_from(theta)
    log_z, v0 = _fix_gauge(pot_fit, mass, C, T, hbar)
    coeffs = (v0,) + tuple(pot_fit.coeffs[1:])
    params = ActionParams(mass, PolynomialPotential(coeffs), log_z, T)

    errors = np.empty(ansatz_degree + 3)
    errors[0] = mass * sigma_theta[0]
    errors[1] = sigma_theta[-1] * hbar / T  # v0 inherits the error of C
    errors[2: ansatz_degree + 2] = sigma_theta[1:-1]
    errors[-1] = sigma_theta[-1]
    xs = obj.xs
    return FitResult(params=params, param_errors=errors, chi2=chi2, dof=dof,
                     interval=(float(xs[0]), float(xs[-1])),
                     gauge_logz=C, n_iterations=n_iter)


def _fix_gauge(pot_fit: PolynomialPotential, mass: float, C: float, T: float, hbar: float):
    """Harmonic-convention normalization at the fitted-potential minimum."""
    xs, _ = pot_fit.minima()
    if len(xs):
        vals = pot_fit(xs)
        curv = pot_fit.second_derivative(xs[np.argmin(vals)])
    else:
        curv = -1.0
    if curv <= 0:
        curv = 2.0 * abs(pot_fit.coeffs[2]) if len(pot_fit.coeffs) > 2 else 1.0
    omega = np.sqrt(curv / mass)
    log_z = float(harmonic_log_z(mass, omega, T, hbar))
    v0 = (log_z - C) * hbar / T
    return log_z, v0


def interval_scan(oracle, potential: PolynomialPotential, mass: float, T: float,
                  halfwidths, n_boundary: int = 6, ansatz_degree: int = 4,
                  hbar: float = HBAR) -> FitSeries:
    """One fit per boundary interval [-a, +a]; supports the check that the
    fitted parameters are interval-independent."""
    init = ActionParams(mass, potential, 0.0, T)
    results = []
    for a in halfwidths:
        boundary = BoundarySet.uniform(a, n_boundary)
        table = oracle(potential, mass, boundary, T)
        results.append(fit_quantum_action(table, ansatz_degree, init, hbar))
    return FitSeries(scan_values=np.asarray(halfwidths, dtype=float),
                     results=tuple(results), kind="interval")


def temperature_scan(oracle, potential: PolynomialPotential, mass: float,
                     T_values, halfwidth: float, n_boundary: int = 6,
                     ansatz_degree: int = 4, hbar: float = HBAR,
                     max_iter: int = 500, continuation: bool = False) -> FitSeries:
    """One fit per transition time T (inverse temperature beta = T/hbar).

    With continuation=True each fit starts from the previous T's optimum
    instead of the classical parameters, which tracks a single branch when
    the landscape develops nearly-degenerate directions at large T.
    """
    boundary = BoundarySet.uniform(halfwidth, n_boundary)
    results = []
    init = ActionParams(mass, potential, 0.0, float(T_values[0]))
    for T in T_values:
        init = ActionParams(init.mass if continuation else mass,
                            init.potential if continuation else potential,
                            0.0, T)
        table = oracle(potential, mass, boundary, T)
        try:
            res = fit_quantum_action(table, ansatz_degree, init, hbar,
                                     max_iter=max_iter)
        except FitError:
            if not continuation:
                raise
            # a warm start can land where the boundary-value problem has no
            # solution (e.g. runaway wells at large T); restart classically
            init = ActionParams(mass, potential, 0.0, T)
            res = fit_quantum_action(table, ansatz_degree, init, hbar,
                                     max_iter=max_iter)
        results.append(res)
        if continuation:
            init = res.params
    return FitSeries(scan_values=np.asarray(T_values, dtype=float),
                     results=tuple(results), kind="temperature")
