"""Nonlinear least squares and the four parameter-extraction pipelines.

The engine is a Levenberg-Marquardt minimizer with a central-difference
numeric Jacobian and simple box projection.  Pipelines: damped-Rabi
curves -> (c1, c2, c3); the temperature series of c3 -> (alpha, omega_c);
the temperature series of indistinguishability -> mu; the delay series of
indistinguishability -> (gamma0, tau_c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coherence import (
    charge_noise_rate,
    indistinguishability_resonant,
    indistinguishability_with_jitter,
)
from .dynamics import phenomenological_rabi
from .errors import FitConvergenceError
from .kernels import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    franck_condon,
    virtual_dephasing_rate,
)
from .model import (
    ChargeNoise,
    PhononCoupling,
    rate_psinv_to_uev,
    rate_uev_to_psinv,
)


@dataclass(frozen=True)
class FitProblem:
    """Weighted least-squares problem: model(x, params) -> y."""

    model: object
    x: np.ndarray
    y: np.ndarray
    sigma_y: np.ndarray
    initial_guess: np.ndarray
    bounds: tuple | None = None  # (lower array, upper array)
    max_iterations: int = 200
    convergence_tol: float = 1e-10
    jacobian_mode: str = "central"

    def __post_init__(self):
        if self.jacobian_mode not in ("central", "forward"):
            raise ValueError(
                f"jacobian_mode must be 'central' or 'forward', got {self.jacobian_mode!r}"
            )
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        s = np.asarray(self.sigma_y, dtype=float)
        p0 = np.asarray(self.initial_guess, dtype=float)
        if y.size == 0:
            raise ValueError("data must be non-empty")
        if np.any(s <= 0):
            raise ValueError("sigma_y must be > 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma_y", s)
        object.__setattr__(self, "initial_guess", p0)
        if self.bounds is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.bounds)
            if np.any(p0 < lo) or np.any(p0 > hi):
                raise ValueError("initial guess must lie within bounds")
            object.__setattr__(self, "bounds", (lo, hi))


@dataclass(frozen=True)
class FitResult:
    """Converged parameters with covariance = (J^T W J)^-1 at the optimum."""

    parameters: np.ndarray
    covariance: np.ndarray
    chi_square: float
    iterations: int
    converged: bool

    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


_GRAD_TOL = 1e-8
_LAMBDA_START = 1e-3
_LAMBDA_SHRINK = 0.3
_LAMBDA_GROW = 2.0
_LAMBDA_MAX = 1e12


def _jacobian(model, x, params, bounds=None, mode="central"):
    """Numeric Jacobian, step max(1e-6 |p|, 1e-9) per parameter.

    "central" differences by default; "forward" halves the model
    evaluations at first-order accuracy.  Either falls back to a
    one-sided difference where a bound truncates the stencil.
    """
    base = np.asarray(model(x, params), dtype=float) if mode == "forward" else None
    cols = []
    for j in range(params.size):
        h = max(1e-6 * abs(params[j]), 1e-9)
        pp = params.copy()
        pp[j] += h
        if bounds is not None:
            pp[j] = min(pp[j], bounds[1][j])
        if mode == "forward" and pp[j] != params[j]:
            cols.append((np.asarray(model(x, pp)) - base) / (pp[j] - params[j]))
            continue
        pm = params.copy()
        pm[j] -= h
        if bounds is not None:
            pm[j] = max(pm[j], bounds[0][j])
        spread = pp[j] - pm[j]
        if spread == 0.0:
            cols.append(np.zeros(np.asarray(model(x, params)).size))
            continue
        cols.append(
            (np.asarray(model(x, pp)) - np.asarray(model(x, pm))) / spread
        )
    return np.stack(cols, axis=1)


def least_squares(p: FitProblem) -> FitResult:
    """Levenberg-Marquardt minimization of sum w (y - model)^2.

    Each iteration first tries the undamped Gauss-Newton step, so a
    quadratic residual surface converges in a couple of steps; otherwise
    damping starts at 1e-3, shrinks x0.3 on an accepted step and grows x2
    on a rejected one, scaled by diag(J^T W J) so parameters of very
    different magnitude are damped comparably.  Convergence requires a
    relative chi-square change below convergence_tol and a gradient norm
    below 1e-8 (relative to the starting gradient for steep problems).
    """
    model, x, y = p.model, p.x, p.y
    weights = 1.0 / p.sigma_y**2
    params = p.initial_guess.copy().astype(float)

    def project(q):
        if p.bounds is None:
            return q
        return np.clip(q, p.bounds[0], p.bounds[1])

    params = project(params)
    resid = y - np.asarray(model(x, params))
    chi2 = float(np.dot(weights, resid**2))
    lam = _LAMBDA_START
    converged = False
    n_steps = 0
    n_stalled = 0

    for iteration in range(1, p.max_iterations + 1):
        jac = _jacobian(model, x, params, p.bounds, mode=p.jacobian_mode)
        jtw = jac.T * weights
        hess = jtw @ jac
        grad = jtw @ resid
        if np.linalg.norm(grad, ord=np.inf) < _GRAD_TOL:
            converged = True
            break
        diag = np.diag(hess)
        scale = np.maximum(diag, max(1e-12 * float(diag.max()), 1e-300))

        def try_step(damped):
            try:
                step = np.linalg.solve(damped, grad)
            except np.linalg.LinAlgError:
                return None
            trial = project(params + step)
            delta = trial - params
            predicted = float(2.0 * grad @ delta - delta @ (hess @ delta))
            trial_resid = y - np.asarray(model(x, trial))
            chi2_t = float(np.dot(weights, trial_resid**2))
            return trial, trial_resid, chi2_t, predicted

        # an undamped Gauss-Newton trial is kept only when the quadratic
        # model predicts the actual drop (gain ratio >= 0.75), so exactly
        # quadratic surfaces converge in O(1) steps while wild steps on
        # ill-conditioned surfaces fall through to the damped path
        accepted = None
        best_chi2 = np.inf
        out = try_step(hess)
        if out is not None:
            best_chi2 = out[2]
            if out[3] > 0 and (chi2 - out[2]) >= 0.75 * out[3]:
                accepted = out
        if accepted is None:
            while lam <= _LAMBDA_MAX:
                out = try_step(hess + lam * np.diag(scale))
                if out is not None:
                    best_chi2 = min(best_chi2, out[2])
                    if out[2] <= chi2:
                        accepted = out
                        break
                lam *= _LAMBDA_GROW
        if accepted is None:
            if n_steps > 0 and best_chi2 <= chi2 * (1.0 + 1e-9):
                # chi-square is at its floating-point floor
                converged = True
                break
            cond = float(np.linalg.cond(hess))
            raise FitConvergenceError(
                f"no acceptable step at iteration {iteration} "
                f"(normal-equation condition {cond:.3g})",
                iterations=n_steps,
            )
        rel_drop = (chi2 - accepted[2]) / max(chi2, 1e-300)
        params, resid, chi2 = accepted[0], accepted[1], accepted[2]
        lam = max(lam * _LAMBDA_SHRINK, 1e-12)
        n_steps += 1
        if rel_drop < p.convergence_tol:
            n_stalled += 1
            grad_now = (jac.T * weights) @ resid
            if np.linalg.norm(grad_now, ord=np.inf) < _GRAD_TOL or n_stalled >= 2:
                converged = True
        else:
            n_stalled = 0
        if converged:
            break

    if not converged:
        raise FitConvergenceError(
            f"no convergence within {p.max_iterations} iterations",
            iterations=p.max_iterations,
        )

    jac = _jacobian(model, x, params, p.bounds)
    jtwj = (jac.T * weights) @ jac
    try:
        cov = np.linalg.inv(jtwj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtwj)
    cov = 0.5 * (cov + cov.T)
    return FitResult(
        parameters=params,
        covariance=cov,
        chi_square=chi2,
        iterations=n_steps,
        converged=True,
    )


# ---------------------------------------------------------------------------
# pipelines


@dataclass(frozen=True)
class RabiCurveFit:
    c1: float
    c2: float
    c3: float
    fit: FitResult = field(repr=False, compare=False, default=None)


def fit_rabi_curve(
    areas, intensities, sigma=None, initial_guess=None
) -> RabiCurveFit:
    """Fit the damped-oscillation form c1 [1 - exp(-c2 A^2) cos(c3 A)].

    c3 is seeded from the position of the first intensity maximum
    (c3 ~ pi / A_max); needs >= 8 points spanning at least one oscillation.
    """
    areas = np.asarray(areas, dtype=float)
    intensities = np.asarray(intensities, dtype=float)
    if areas.size < 8:
        raise ValueError("need at least 8 points spanning one oscillation")
    if sigma is None:
        sigma = np.full(areas.size, max(np.max(np.abs(intensities)), 1e-12) * 1e-2)
    if initial_guess is None:
        i_max = int(np.argmax(intensities))
        a_first_max = areas[i_max] if areas[i_max] > 0 else areas[-1]
        # the first maximum of the undamped form sits at c3 A = pi
        c3_0 = math.pi / a_first_max
        c1_0 = 0.5 * (np.max(intensities) + np.min(intensities))
        initial_guess = np.array([max(c1_0, 1e-6), 1e-3, c3_0])
    problem = FitProblem(
        model=lambda a, q: phenomenological_rabi(a, *q),
        x=areas,
        y=intensities,
        sigma_y=sigma,
        initial_guess=np.asarray(initial_guess, dtype=float),
        bounds=(np.array([0.0, 0.0, 0.0]), np.array([np.inf] * 3)),
    )
    res = least_squares(problem)
    c1, c2, c3 = res.parameters
    return RabiCurveFit(c1=float(c1), c2=float(c2), c3=float(c3), fit=res)


@dataclass(frozen=True)
class PhononParamsFit:
    alpha: float
    omega_c: float
    scale: float
    degenerate: bool
    fit: FitResult = field(repr=False, compare=False, default=None)


def extract_phonon_params(
    temperatures,
    c3_values,
    sigma=None,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
    initial_guess=None,
) -> PhononParamsFit:
    """Fit c3(T) = kappa B(T; alpha, omega_c) for the coupling strength and
    cutoff, with the proportionality kappa as a nuisance scale.

    alpha and omega_c are partially degenerate through B; a covariance
    condition number above 1e6 sets the degenerate flag.
    """
    temperatures = np.asarray(temperatures, dtype=float)
    c3_values = np.asarray(c3_values, dtype=float)
    if temperatures.size < 4:
        raise ValueError("need at least 4 temperatures")
    if sigma is None:
        sigma = np.full(c3_values.size, max(np.max(np.abs(c3_values)), 1e-12) * 1e-2)

    def model(ts, params):
        alpha, omega_c, kappa = params
        coupling = PhononCoupling(alpha=alpha, omega_c=omega_c)
        return np.array(
            [kappa * franck_condon(coupling, t, q) for t in ts]
        )

    if initial_guess is None:
        alpha0, omega_c0 = 0.1, 2.0
        kappa0 = c3_values[0] / franck_condon(
            PhononCoupling(alpha=alpha0, omega_c=omega_c0),
            temperatures[0],
            q,
        )
        initial_guess = np.array([alpha0, omega_c0, kappa0])
    problem = FitProblem(
        model=model,
        x=temperatures,
        y=c3_values,
        sigma_y=sigma,
        initial_guess=np.asarray(initial_guess, dtype=float),
        bounds=(np.array([0.0, 1e-3, 0.0]), np.array([np.inf] * 3)),
    )
    res = least_squares(problem)
    alpha, omega_c, kappa = res.parameters
    degenerate = float(np.linalg.cond(res.covariance)) > 1e6
    return PhononParamsFit(
        alpha=float(alpha),
        omega_c=float(omega_c),
        scale=float(kappa),
        degenerate=degenerate,
        fit=res,
    )


@dataclass(frozen=True)
class VirtualCouplingFit:
    mu: float
    fit: FitResult = field(repr=False, compare=False, default=None)


def fit_mu(
    temperatures,
    indistinguishabilities,
    alpha: float,
    omega_c: float,
    gamma_emission: float,
    sigma=None,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> VirtualCouplingFit:
    """Single-parameter fit of the virtual-coupling prefactor mu from an
    indistinguishability-vs-temperature series, holding alpha and omega_c
    at their already-determined values.

    The virtual dephasing rate is linear in mu, so it is precomputed at
    mu = 1 per temperature and scaled inside the fit.
    """
    temperatures = np.asarray(temperatures, dtype=float)
    indist = np.asarray(indistinguishabilities, dtype=float)
    if sigma is None:
        sigma = np.full(indist.size, 1e-3)
    unit = PhononCoupling(alpha=alpha, omega_c=omega_c, mu=1.0)
    # coherence-rate contribution per unit mu at each temperature
    gamma_unit = np.array(
        [0.5 * virtual_dephasing_rate(unit, t, q) for t in temperatures]
    )

    def model(_ts, params):
        (mu,) = params
        return gamma_emission / (gamma_emission + 2.0 * mu * gamma_unit)

    # invert the first usable point for a starting value
    mu0 = 1e-3
    for i in range(temperatures.size):
        if gamma_unit[i] > 0 and 0 < indist[i] < 1:
            gam = 0.5 * gamma_emission * (1.0 / indist[i] - 1.0)
            mu0 = gam / gamma_unit[i]
            break
    problem = FitProblem(
        model=model,
        x=temperatures,
        y=indist,
        sigma_y=sigma,
        initial_guess=np.array([mu0]),
        bounds=(np.array([0.0]), np.array([np.inf])),
    )
    res = least_squares(problem)
    return VirtualCouplingFit(mu=float(res.parameters[0]), fit=res)


@dataclass(frozen=True)
class ChargeNoiseFit:
    gamma0: float  # ueV
    tau_c: float  # ns
    tau_c_identifiable: bool
    fit: FitResult = field(repr=False, compare=False, default=None)


def fit_charge_noise(
    tau_ds,
    indistinguishabilities,
    mode: str,
    gamma_emission: float,
    gamma_relax: float | None = None,
    gamma_pd: float = 0.0,
    sigma=None,
) -> ChargeNoiseFit:
    """Fit (gamma0, tau_c) of the finite-correlation-time charge-noise
    model from an indistinguishability-vs-pulse-separation series.

    mode "resonant" uses the bare dephasing form; mode "jitter"
    multiplies in the relaxation timing-jitter factor and requires
    gamma_relax.  tau_c is flagged unidentifiable when every measured
    delay sits far beyond the fitted correlation time or the covariance
    is numerically degenerate.
    """
    if mode not in ("resonant", "jitter"):
        raise ValueError(f"mode must be resonant|jitter, got {mode}")
    if mode == "jitter" and gamma_relax is None:
        raise ValueError("jitter mode requires gamma_relax")
    tau_ds = np.asarray(tau_ds, dtype=float)
    indist = np.asarray(indistinguishabilities, dtype=float)
    if tau_ds.size < 4:
        raise ValueError("need at least 4 delay points")
    if sigma is None:
        sigma = np.full(indist.size, 1e-3)

    def model(td, params):
        gamma0, tau_c = params
        noise = ChargeNoise(gamma0=max(gamma0, 0.0), tau_c=max(tau_c, 1e-9))
        out = np.empty(td.size)
        for i, t in enumerate(td):
            gam = gamma_pd + rate_uev_to_psinv(charge_noise_rate(t, noise))
            if mode == "jitter":
                out[i] = indistinguishability_with_jitter(
                    gamma_relax, gamma_emission, gam
                ).value
            else:
                out[i] = indistinguishability_resonant(gamma_emission, gam)
        return out

    # seed gamma0 from the largest-delay point, tau_c from the delay where
    # the series has fallen halfway to its asymptote
    jitter = (
        gamma_relax / (gamma_relax + gamma_emission)
        if mode == "jitter"
        else 1.0
    )
    deph_end = np.clip(indist[-1] / jitter, 1e-6, 1.0 - 1e-9)
    gamma0_0 = max(
        rate_psinv_to_uev(0.5 * gamma_emission * (1.0 / deph_end - 1.0)), 1e-4
    )
    order = np.argsort(tau_ds)
    halfway = 0.5 * (indist[order][0] + indist[order][-1])
    tau_c0 = float(np.interp(halfway, indist[order][::-1], tau_ds[order][::-1]))
    tau_c0 = min(max(tau_c0, 0.5), 50.0)
    problem = FitProblem(
        model=model,
        x=tau_ds,
        y=indist,
        sigma_y=sigma,
        initial_guess=np.array([gamma0_0, tau_c0]),
        bounds=(np.array([0.0, 1e-3]), np.array([np.inf, np.inf])),
    )
    res = least_squares(problem)
    gamma0, tau_c = res.parameters
    cond = float(np.linalg.cond(res.covariance))
    identifiable = cond <= 1e6 and float(np.min(tau_ds)) <= 3.0 * tau_c
    return ChargeNoiseFit(
        gamma0=float(gamma0),
        tau_c=float(tau_c),
        tau_c_identifiable=bool(identifiable),
        fit=res,
    )
