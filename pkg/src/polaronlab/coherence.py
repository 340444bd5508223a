"""Photon indistinguishability.

Analytic models (lifetime vs. dephasing, charge noise with finite
correlation time, timing jitter), the first-order-coherence construction
by the quantum regression theorem, the double-integral definition used
as a numerical oracle, and a three-level pump simulation.

All gamma arguments are coherence-decay rates in ps^-1: the exciton
coherence itself decays at gamma_total, so the indistinguishability of
the two-level emitter is Gamma / (Gamma + 2 gamma_total).  The virtual
phonon channel rate from kernels.virtual_dephasing_rate contributes
half its value here (see DephasingBudget).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import dblquad
from scipy.linalg import expm

from .kernels import DEFAULT_QUADRATURE, QuadratureSpec, virtual_dephasing_rate
from .model import (
    ChargeNoise,
    EmitterParams,
    PhononCoupling,
    PumpLevel,
    rate_uev_to_psinv,
)


@dataclass(frozen=True)
class DephasingBudget:
    """Additive exciton dephasing budget, all coherence-decay rates in ps^-1.

    gamma_pd is the virtual-phonon contribution: half the Lindblad channel
    rate of the exciton-projector dissipator, because that dissipator
    decays the coherence at half its channel rate.  gamma_charge is the
    delay-dependent charge-noise rate, already a coherence rate as fitted.
    """

    gamma_pd: float
    gamma_charge: float
    total: float | None = None

    def __post_init__(self):
        if self.gamma_pd < 0 or self.gamma_charge < 0:
            raise ValueError("dephasing rates must be >= 0")
        expected = self.gamma_pd + self.gamma_charge
        if self.total is None:
            object.__setattr__(self, "total", expected)
        elif abs(self.total - expected) > 1e-12 * max(1.0, expected):
            raise ValueError(
                f"total {self.total} != gamma_pd + gamma_charge {expected}"
            )


def dephasing_budget(
    c: PhononCoupling,
    temperature: float,
    noise: ChargeNoise | None = None,
    tau_d: float = 0.0,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> DephasingBudget:
    """Compose the phonon and charge-noise dephasing rates for a device at
    one temperature and emission delay tau_d (ns)."""
    gamma_pd = 0.5 * virtual_dephasing_rate(c, temperature, q)
    gamma_charge = 0.0
    if noise is not None:
        gamma_charge = rate_uev_to_psinv(charge_noise_rate(tau_d, noise))
    return DephasingBudget(gamma_pd=gamma_pd, gamma_charge=gamma_charge)


@dataclass(frozen=True)
class IndistinguishabilityResult:
    """An indistinguishability value tagged with how it was computed."""

    value: float
    method: str
    components: dict | None = None

    def __post_init__(self):
        if self.components is not None:
            jf = self.components.get("jitter_factor")
            df = self.components.get("dephasing_factor")
            if jf is not None and df is not None:
                if abs(self.value - jf * df) > 1e-12:
                    raise ValueError(
                        "value must equal jitter_factor * dephasing_factor"
                    )


def charge_noise_rate(tau_d: float, n: ChargeNoise) -> float:
    """Delay-dependent charge-noise dephasing gamma0 (1 - exp(-(tau_d /
    tau_c)^2)) in ueV, for tau_d in ns."""
    if tau_d < 0:
        raise ValueError(f"tau_d must be >= 0, got {tau_d}")
    return n.gamma0 * -math.expm1(-((tau_d / n.tau_c) ** 2))


def indistinguishability_resonant(
    gamma_emission: float, gamma_total: float
) -> float:
    """Two-level-emitter indistinguishability Gamma / (Gamma + 2 gamma)."""
    if gamma_emission <= 0:
        raise ValueError("gamma_emission must be > 0")
    if gamma_total < 0:
        raise ValueError("gamma_total must be >= 0")
    return gamma_emission / (gamma_emission + 2.0 * gamma_total)


def indistinguishability_with_jitter(
    gamma_relax: float, gamma_emission: float, gamma_total: float
) -> IndistinguishabilityResult:
    """Indistinguishability including relaxation timing jitter:
    [gamma_relax / (gamma_relax + Gamma)] * [Gamma / (Gamma + 2 gamma)]."""
    if gamma_relax <= 0:
        raise ValueError("gamma_relax must be > 0")
    jitter = gamma_relax / (gamma_relax + gamma_emission)
    dephasing = indistinguishability_resonant(gamma_emission, gamma_total)
    return IndistinguishabilityResult(
        value=jitter * dephasing,
        method="analytic",
        components={"jitter_factor": jitter, "dephasing_factor": dephasing},
    )


def g1_resonant(
    t: float,
    tau: float,
    rho_xx0: float,
    gamma_emission: float,
    gamma_total: float,
) -> complex:
    """First-order coherence g1(t, t + tau) of the freely decaying emitter:
    rho_XX(t) exp(-(Gamma + 2 gamma) tau / 2) with rho_XX(t) =
    rho_XX(0) exp(-Gamma t)."""
    if t < 0 or tau < 0:
        raise ValueError("t and tau must be >= 0")
    pop = rho_xx0 * math.exp(-gamma_emission * t)
    return complex(
        pop * math.exp(-0.5 * (gamma_emission + 2.0 * gamma_total) * tau)
    )


def indistinguishability_oracle(
    gamma_emission: float,
    gamma_total: float,
    rho_xx0: float = 1.0,
    extent_factor: float = 15.0,
) -> float:
    """Indistinguishability from the double-integral definition,
    integral |g1|^2 over the population-population product, by 2-D adaptive
    quadrature on [0, extent_factor / Gamma]^2.  Independent of rho_xx0."""
    if gamma_emission <= 0:
        raise ValueError("gamma_emission must be > 0")
    span = extent_factor / gamma_emission

    def num(tau, t):
        return abs(g1_resonant(t, tau, rho_xx0, gamma_emission, gamma_total)) ** 2

    def den(tau, t):
        return (
            g1_resonant(t, 0.0, rho_xx0, gamma_emission, gamma_total).real
            * g1_resonant(t + tau, 0.0, rho_xx0, gamma_emission, gamma_total).real
        )

    n_val, _ = dblquad(num, 0.0, span, 0.0, span, epsabs=1e-13, epsrel=1e-10)
    d_val, _ = dblquad(den, 0.0, span, 0.0, span, epsabs=1e-13, epsrel=1e-10)
    return n_val / d_val


@dataclass(frozen=True)
class CorrelationGridSpec:
    """Uniform-grid controls for the three-level correlation integrals:
    step dt (ps) and extent extent_factor / Gamma."""

    dt: float = 1.0
    extent_factor: float = 15.0

    def __post_init__(self):
        if self.dt <= 0 or self.extent_factor <= 0:
            raise ValueError("dt and extent_factor must be > 0")


def _vec_left(op: np.ndarray) -> np.ndarray:
    # row-major vec: vec(A rho) = kron(A, I) vec(rho)
    return np.kron(op, np.eye(op.shape[0]))


def _liouvillian_3level(
    gamma_emission: float,
    gamma_relax: float,
    gamma_total: float,
    level_shift: float,
) -> np.ndarray:
    """9x9 generator for basis (|0>, |X>, |P>), row-major vec ordering."""
    dim = 3
    ident = np.eye(dim, dtype=complex)
    sigma = np.zeros((dim, dim), dtype=complex)
    sigma[0, 1] = 1.0  # |0><X|
    relax = np.zeros((dim, dim), dtype=complex)
    relax[1, 2] = 1.0  # |X><P|
    n_x = np.diag([0.0, 1.0, 0.0]).astype(complex)
    n_p = np.diag([0.0, 0.0, 1.0]).astype(complex)

    def dissip(op: np.ndarray, rate: float) -> np.ndarray:
        od_o = op.conj().T @ op
        return rate * (
            np.kron(op, op.conj())
            - 0.5 * (np.kron(od_o, ident) + np.kron(ident, od_o.T))
        )

    ham = level_shift * n_p
    lv = -1j * (np.kron(ham, ident) - np.kron(ident, ham.T))
    lv += dissip(sigma, gamma_emission)
    lv += dissip(relax, gamma_relax)
    lv += dissip(n_x, 2.0 * gamma_total)
    return lv


def three_level_simulation(
    pump: PumpLevel,
    e: EmitterParams,
    gamma_total: float,
    spec: CorrelationGridSpec | None = None,
) -> IndistinguishabilityResult:
    """Indistinguishability of the pump -> exciton -> ground cascade by
    direct numerical construction.

    The three-level master equation is integrated from |P><P| with a
    fixed-step matrix-exponential propagator; g1(t, t + tau) is built by
    the quantum regression theorem, propagating the emission-operator
    correlation with the same generator, and the double integral is
    accumulated with Simpson weights separably in t and tau.
    """
    spec = spec or CorrelationGridSpec()
    gamma = e.gamma_emission
    lv = _liouvillian_3level(
        gamma, pump.gamma_relax, gamma_total, pump.level_shift
    )

    span = spec.extent_factor / gamma
    n_t = int(math.ceil(span / spec.dt))
    if n_t % 2 == 1:
        n_t += 1  # Simpson needs an even interval count
    dt = span / n_t
    step = expm(lv * dt)

    # trace functional of sigma^dag Bhat is component (0,1) of Bhat
    c_row = np.zeros(9, dtype=complex)
    c_row[1] = 1.0
    s_left = _vec_left(np.array(
        [[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=complex
    ))

    rho = np.zeros(9, dtype=complex)
    rho[8] = 1.0  # |P><P|

    # u[j] = c^T e^{L tau_j}; v[i] = vec(sigma rho(t_i)); populations on
    # a doubled grid feed the denominator's shifted product
    n_grid = n_t + 1
    u = np.empty((n_grid, 9), dtype=complex)
    v = np.empty((n_grid, 9), dtype=complex)
    pop = np.empty(2 * n_grid - 1, dtype=float)

    u_row = c_row.copy()
    rho_i = rho.copy()
    for i in range(2 * n_grid - 1):
        if i < n_grid:
            u[i] = u_row
            v[i] = s_left @ rho_i
        pop[i] = rho_i[4].real  # rho_XX at row-major index (1,1)
        u_row = u_row @ step
        rho_i = step @ rho_i

    w = _simpson_weights(n_grid, dt)

    # numerator: sum_kl [int u_k conj(u_l) dtau] [int v_k conj(v_l) dt]
    a_mat = (u * w[:, None]).T @ u.conj()
    d_mat = (v * w[:, None]).T @ v.conj()
    numerator = float(np.sum(a_mat * d_mat).real)

    # denominator: int dt pop(t) int dtau pop(t + tau)
    inner = np.correlate(pop, w, mode="valid")
    denominator = float(np.dot(w, pop[:n_grid] * inner))

    return IndistinguishabilityResult(
        value=numerator / denominator, method="three-level"
    )


def _simpson_weights(n_points: int, dt: float) -> np.ndarray:
    w = np.ones(n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (dt / 3.0)
