"""Phonon-environment functions.

Spectral densities, the Franck-Condon factor, the polaron propagator
phi(tau), the polaronic correlation functions Lambda_x/y/z, their
half-range Fourier transforms, and the virtual-phonon pure-dephasing rate.

All frequencies are ps^-1 and times ps (see model.py).  The Gaussian
cutoff exp(-(omega/omega_c)^2) makes every omega-integral effectively
compact; integration always runs over [0, omega_max_factor * omega_c].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import CubicSpline

from .errors import QuadratureError
from .model import PhononCoupling, thermal_frequency


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature controls shared by every omega- and tau-integral.

    omega_max_factor >= 6 because the slowest-decaying integrand carries
    exp(-2(omega/omega_c)^2) ~ 1e-31 at 6 omega_c.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    omega_max_factor: float = 6.0

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.abs_tol < 0:
            raise ValueError(f"abs_tol must be >= 0, got {self.abs_tol}")
        if self.max_subdivisions < 10:
            raise ValueError(
                f"max_subdivisions must be >= 10, got {self.max_subdivisions}"
            )
        if self.omega_max_factor < 6:
            raise ValueError(
                f"omega_max_factor must be >= 6, got {self.omega_max_factor}"
            )


DEFAULT_QUADRATURE = QuadratureSpec()


def _checked_quad(f, a, b, q: QuadratureSpec, weight=None, wvar=None) -> float:
    """scipy quad with the tolerances in q; raises QuadratureError when the
    achieved error estimate misses the requested tolerance by 10x."""
    out = quad(
        f, a, b,
        epsabs=q.abs_tol, epsrel=q.rel_tol, limit=q.max_subdivisions,
        weight=weight, wvar=wvar, full_output=1,
    )
    y, abserr = out[0], out[1]
    if len(out) > 3 and abserr > 10 * max(q.abs_tol, q.rel_tol * abs(y)):
        raise QuadratureError(
            f"quadrature failed: {out[3]}", achieved_tol=abserr
        )
    return y


def spectral_density(omega: float, c: PhononCoupling) -> float:
    """Linear-coupling spectral density J(omega) = alpha omega^3
    exp(-(omega/omega_c)^2)."""
    if omega < 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    x = omega / c.omega_c
    return c.alpha * omega**3 * math.exp(-x * x)


def quadratic_spectral_density(omega: float, c: PhononCoupling) -> float:
    """Quadratic-coupling spectral density sqrt(alpha^2 mu / omega_c^4) *
    omega^5 exp(-(omega/omega_c)^2)."""
    if omega < 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    pref = math.sqrt(c.alpha**2 * c.mu / c.omega_c**4)
    x = omega / c.omega_c
    return pref * omega**5 * math.exp(-x * x)


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation n(omega) at a temperature in kelvin.

    omega = 0 is rejected (pole); integrands must absorb the divergence
    analytically, which all integrands here do via omega^3 or higher weights.
    """
    if omega <= 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    nu = thermal_frequency(temperature)
    if nu == 0.0:
        return 0.0
    return 1.0 / math.expm1(omega / nu)


def _coth(y: float) -> float:
    # series branch keeps the omega -> 0 end of integrands finite
    if y < 1e-6:
        return 1.0 / y + y / 3.0 - y**3 / 45.0
    return 1.0 / math.tanh(y)


def _j_over_w2_coth(w: float, c: PhononCoupling, nu: float) -> float:
    """J(w)/w^2 coth(w / 2 nu), with its finite w -> 0 limit 2 alpha nu."""
    if w == 0.0:
        return 2.0 * c.alpha * nu
    base = c.alpha * w * math.exp(-((w / c.omega_c) ** 2))
    return base * _coth(0.5 * w / nu)


def _occ_pair(x: float) -> float:
    # n(n+1) as a function of x = omega/nu_T, via 1/(4 sinh^2(x/2))
    if x < 1e-4:
        return 1.0 / (x * x) - 1.0 / 12.0
    if x > 700.0:
        return 0.0
    s = math.sinh(0.5 * x)
    return 1.0 / (4.0 * s * s)


def franck_condon(
    c: PhononCoupling, temperature: float, q: QuadratureSpec = DEFAULT_QUADRATURE
) -> float:
    """Franck-Condon renormalization factor B(T) = exp[-(1/2) *
    integral J(omega)/omega^2 coth(omega / 2 k_B T) domega]."""
    if c.alpha == 0.0:
        return 1.0
    nu = thermal_frequency(temperature)
    if nu == 0.0:
        def integrand(w):
            return c.alpha * w * math.exp(-((w / c.omega_c) ** 2))
    else:
        def integrand(w):
            return _j_over_w2_coth(w, c, nu)

    val = _checked_quad(integrand, 0.0, q.omega_max_factor * c.omega_c, q)
    return math.exp(-0.5 * val)


def propagator_phi(
    tau: float,
    c: PhononCoupling,
    temperature: float,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> complex:
    """Polaron propagator phi(tau) = integral J(omega)/omega^2 *
    [cos(omega tau) coth(omega / 2 k_B T) - i sin(omega tau)] domega."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if c.alpha == 0.0:
        return 0.0 + 0.0j
    nu = thermal_frequency(temperature)
    w_max = q.omega_max_factor * c.omega_c

    def even_part(w: float) -> float:
        if nu == 0.0:
            return c.alpha * w * math.exp(-((w / c.omega_c) ** 2))
        return _j_over_w2_coth(w, c, nu)

    def odd_part(w: float) -> float:
        return c.alpha * w * math.exp(-((w / c.omega_c) ** 2))

    if tau == 0.0:
        return complex(_checked_quad(even_part, 0.0, w_max, q), 0.0)
    # QAWO handles the oscillatory factors at large tau
    re = _checked_quad(even_part, 0.0, w_max, q, weight="cos", wvar=tau)
    im = _checked_quad(odd_part, 0.0, w_max, q, weight="sin", wvar=tau)
    return complex(re, -im)


def _lambda_z_inner(
    tau: float, c: PhononCoupling, nu: float, q: QuadratureSpec
) -> complex:
    """integral over omega of curly-J(omega) [ (2n+1) cos(omega tau)
    - i sin(omega tau) ]; Lambda_z is the square of this."""
    pref = math.sqrt(c.alpha**2 * c.mu / c.omega_c**4)
    w_max = q.omega_max_factor * c.omega_c

    def sym(w: float) -> float:
        if w == 0.0:
            return 0.0
        base = pref * w**5 * math.exp(-((w / c.omega_c) ** 2))
        if nu == 0.0:
            return base
        return base * _coth(0.5 * w / nu)

    def asym(w: float) -> float:
        return pref * w**5 * math.exp(-((w / c.omega_c) ** 2))

    if tau == 0.0:
        return complex(_checked_quad(sym, 0.0, w_max, q), 0.0)
    re = _checked_quad(sym, 0.0, w_max, q, weight="cos", wvar=tau)
    im = _checked_quad(asym, 0.0, w_max, q, weight="sin", wvar=tau)
    return complex(re, -im)


def lambda_z(
    tau: float,
    c: PhononCoupling,
    temperature: float,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> complex:
    """Virtual-transition correlation function Lambda_z(tau), the squared
    inner integral over the quadratic spectral density."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if c.mu == 0.0 or c.alpha == 0.0:
        return 0.0 + 0.0j
    inner = _lambda_z_inner(tau, c, thermal_frequency(temperature), q)
    return inner * inner


def virtual_dephasing_rate(
    c: PhononCoupling, temperature: float, q: QuadratureSpec = DEFAULT_QUADRATURE
) -> float:
    """Virtual-phonon pure-dephasing channel rate gamma_pd(T) =
    (alpha^2 mu / omega_c^4) integral omega^10 exp(-2(omega/omega_c)^2)
    n(n+1) domega.

    This is the Lindblad channel rate of the exciton-projector dissipator;
    the exciton coherence it produces decays at gamma_pd / 2.
    """
    if c.mu == 0.0 or c.alpha == 0.0 or temperature == 0.0:
        return 0.0
    nu = thermal_frequency(temperature)
    pref = c.alpha**2 * c.mu / c.omega_c**4

    def integrand(w: float) -> float:
        return (
            pref
            * w**10
            * math.exp(-2.0 * (w / c.omega_c) ** 2)
            * _occ_pair(w / nu)
        )

    return _checked_quad(integrand, 0.0, q.omega_max_factor * c.omega_c, q)


def virtual_dephasing_rate_spectral(
    c: PhononCoupling, temperature: float, q: QuadratureSpec = DEFAULT_QUADRATURE
) -> float:
    """Same rate via the squared quadratic spectral density,
    integral curly-J(omega)^2 n(n+1) domega; must agree with
    :func:`virtual_dephasing_rate` to 1e-10 relative."""
    if c.mu == 0.0 or c.alpha == 0.0 or temperature == 0.0:
        return 0.0
    nu = thermal_frequency(temperature)

    def integrand(w: float) -> float:
        return quadratic_spectral_density(w, c) ** 2 * _occ_pair(w / nu)

    return _checked_quad(integrand, 0.0, q.omega_max_factor * c.omega_c, q)


@dataclass(frozen=True)
class KernelTable:
    """phi(tau) and the Lambda_z inner integral sampled on a uniform tau
    grid, with the Franck-Condon factor.  Built once per (coupling, T) and
    shared read-only; correlation functions and half-Fourier transforms
    evaluate against it.
    """

    tau_grid: np.ndarray
    phi_values: np.ndarray
    zinner_values: np.ndarray
    B: float
    coupling: PhononCoupling
    temperature: float
    _phi_spline: CubicSpline = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if not 0.0 < self.B <= 1.0:
            raise ValueError(f"B must be in (0, 1], got {self.B}")
        if abs(self.phi_values[0].imag) > 1e-9:
            raise ValueError(
                f"Im phi(0) must vanish, got {self.phi_values[0].imag}"
            )
        object.__setattr__(
            self, "_phi_spline", CubicSpline(self.tau_grid, self.phi_values)
        )

    @property
    def tau_max(self) -> float:
        return float(self.tau_grid[-1])

    def phi(self, tau):
        """Cubic interpolation of phi on the table grid; 0 beyond it."""
        tau = np.asarray(tau, dtype=float)
        out = np.asarray(self._phi_spline(np.clip(tau, 0.0, self.tau_max)))
        out = np.where(tau > self.tau_max, 0.0 + 0.0j, out)
        return out if out.ndim else complex(out)


def build_kernel_table(
    c: PhononCoupling,
    temperature: float,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
    tau_spacing: float = 0.01,
    tau_extent_factor: float = 20.0,
) -> KernelTable:
    """Precompute phi(tau) and the Lambda_z inner integral on a uniform grid
    of spacing tau_spacing (ps) covering [0, tau_extent_factor / omega_c].

    alpha = 0 is allowed and produces the trivial table (phi = 0, B = 1),
    so uncoupled configurations flow through the same code path.
    """
    tau_max = tau_extent_factor / c.omega_c
    n = int(round(tau_max / tau_spacing)) + 1
    tau_grid = np.linspace(0.0, tau_max, n)
    nu = thermal_frequency(temperature)
    phi_vals = np.array(
        [propagator_phi(t, c, temperature, q) for t in tau_grid]
    )
    if c.mu > 0.0 and c.alpha > 0.0:
        zin = np.array([_lambda_z_inner(t, c, nu, q) for t in tau_grid])
    else:
        zin = np.zeros(n, dtype=complex)
    return KernelTable(
        tau_grid=tau_grid,
        phi_values=phi_vals,
        zinner_values=zin,
        B=franck_condon(c, temperature, q),
        coupling=c,
        temperature=temperature,
    )


def lambda_x(tau, table: KernelTable):
    """Lambda_x(tau) = B^2 (cosh phi - 1), the sigma_x-channel correlation
    function."""
    phi = table.phi(tau)
    return table.B**2 * (np.cosh(phi) - 1.0)


def lambda_y(tau, table: KernelTable):
    """Lambda_y(tau) = B^2 sinh phi, the sigma_y-channel correlation
    function."""
    phi = table.phi(tau)
    return table.B**2 * np.sinh(phi)


def _lambda_on_grid(which: str, table: KernelTable) -> np.ndarray:
    if which == "x":
        return table.B**2 * (np.cosh(table.phi_values) - 1.0)
    if which == "y":
        return table.B**2 * np.sinh(table.phi_values)
    if which == "z":
        return table.zinner_values**2
    raise ValueError(f"unknown kernel {which!r}; expected 'x', 'y' or 'z'")


def half_fourier_rate(
    which: str,
    omega: float,
    table: KernelTable,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> complex:
    """Half-range Fourier transform gamma_i(omega) = integral_0^inf
    Lambda_i(tau) e^{i omega tau} dtau, evaluated by Simpson's rule on the
    table grid.

    The tail beyond the grid is bounded by |Lambda(tau_max)| / omega_c
    (the correlation functions decay at least exponentially on the phonon
    timescale there); the bound must stay below the requested tolerance.
    """
    lam = _lambda_on_grid(which, table)
    integrand = lam * np.exp(1j * omega * table.tau_grid)
    val = complex(simpson(integrand, x=table.tau_grid))
    tail_bound = abs(lam[-1]) / table.coupling.omega_c
    if tail_bound > max(q.abs_tol, q.rel_tol * abs(val)) * 10:
        raise QuadratureError(
            f"half-Fourier tail truncation too coarse for kernel {which!r}",
            achieved_tol=tail_bound,
        )
    return val


@dataclass(frozen=True)
class RateSet:
    """Drive-dependent transition rates at one renormalized Rabi frequency:
    Gamma_i for real single-phonon processes, chi_i for virtual two-phonon
    processes."""

    gamma1: complex
    gamma2: complex
    gamma3: complex
    chi1: complex
    chi2: complex
    chi3: complex


def rate_functions(
    omega_r: float,
    table: KernelTable,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> RateSet:
    """Evaluate all six rate functions at renormalized Rabi frequency
    omega_r >= 0 (ps^-1)."""
    if omega_r < 0:
        raise ValueError(f"omega_r must be >= 0, got {omega_r}")
    g_x0 = half_fourier_rate("x", 0.0, table, q)
    g_yp = half_fourier_rate("y", omega_r, table, q)
    g_ym = half_fourier_rate("y", -omega_r, table, q)
    g_z0 = half_fourier_rate("z", 0.0, table, q)
    g_zp = half_fourier_rate("z", omega_r, table, q)
    g_zm = half_fourier_rate("z", -omega_r, table, q)
    return RateSet(
        gamma1=g_x0,
        gamma2=0.5 * (g_yp + g_ym),
        gamma3=(g_yp - g_ym) / 2j,
        chi1=0.5 * g_z0 - 0.25 * (g_zp + g_zm),
        chi2=(g_zp - g_zm) / 4j,
        chi3=0.5 * (g_zp + g_zm),
    )


def kernel_table_csv_rows(table: KernelTable):
    """Yield (tau_ps, re_phi, im_phi) rows for the debug CSV dump."""
    for tau, phi in zip(table.tau_grid, table.phi_values):
        yield float(tau), float(phi.real), float(phi.imag)
