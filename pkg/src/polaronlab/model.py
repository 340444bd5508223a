"""Domain types, physical constants, and unit conversions.

Canonical internal units: time in ps, rates and frequencies in ps^-1
(hbar = 1), temperature in kelvin at the API boundary only.  Charge-noise
dephasing is quoted in ueV and detector timing in ns by convention; the
conversion helpers below are the single place those units cross over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# CODATA-derived constants, fixed to 7 digits.  These are configuration,
# not fit parameters.
HBAR_MEV_PS: float = 0.6582119  # meV ps
KB_MEV_PER_K: float = 0.0861733  # meV / K
KB_OVER_HBAR: float = KB_MEV_PER_K / HBAR_MEV_PS  # ps^-1 / K, = 0.1309 to 4 s.f.

_FWHM_TO_DTAU = 1.0 / (4.0 * math.sqrt(math.log(2.0)))


def thermal_frequency(temperature: float) -> float:
    """Thermal frequency k_B T / hbar in ps^-1 for a temperature in kelvin."""
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0 K, got {temperature}")
    return KB_OVER_HBAR * temperature


def rate_uev_to_psinv(x: float) -> float:
    """Convert an energy-units rate in ueV to an angular rate in ps^-1."""
    return x / (HBAR_MEV_PS * 1e3)


def rate_psinv_to_uev(x: float) -> float:
    """Inverse of :func:`rate_uev_to_psinv`."""
    return x * (HBAR_MEV_PS * 1e3)


@dataclass(frozen=True)
class PhononCoupling:
    """Effective exciton-phonon coupling parameters.

    Parameters
    ----------
    alpha:
        Linear coupling strength.  With omega in ps^-1 the spectral density
        J(omega) = alpha omega^3 exp(-(omega/omega_c)^2) evaluates in ps^-1,
        matching the convention in which alpha is quoted as ps^-1.
    omega_c:
        Gaussian cutoff frequency in ps^-1.
    mu:
        Quadratic (virtual) coupling prefactor in ps^2.  The derived
        quadratic strength alpha^2 mu / omega_c^4 is computed where needed,
        never stored.
    """

    alpha: float
    omega_c: float
    mu: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.omega_c <= 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")


@dataclass(frozen=True)
class EmitterParams:
    """Two-level emitter constants.

    gamma_emission is the radiative rate 1/T1 in ps^-1.  detuning is the
    polaron-shifted laser detuning in ps^-1; only the resonant branch
    (detuning = 0) is supported by the dynamics module.  omega_x is the bare
    transition frequency, informational only.
    """

    gamma_emission: float
    detuning: float = 0.0
    omega_x: float = 0.0

    def __post_init__(self):
        if self.gamma_emission <= 0:
            raise ValueError(
                f"gamma_emission must be > 0, got {self.gamma_emission}"
            )


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian drive pulse: area in radians, intensity FWHM in ps.

    The envelope standard width is dtau = fwhm / (4 sqrt(ln 2)) so that
    Omega(t) = (area / 2 dtau sqrt(pi)) exp(-((t - center) / 2 dtau)^2)
    integrates to the pulse area.
    """

    area: float
    fwhm: float = 1.2
    center: float = 0.0
    carrier_detuning: float = 0.0

    def __post_init__(self):
        if self.fwhm <= 0:
            raise ValueError(f"fwhm must be > 0, got {self.fwhm}")

    @property
    def dtau(self) -> float:
        return self.fwhm * _FWHM_TO_DTAU


@dataclass(frozen=True)
class Environment:
    """Thermal environment; temperature in kelvin."""

    temperature: float

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(
                f"temperature must be >= 0 K, got {self.temperature}"
            )


@dataclass(frozen=True)
class ChargeNoise:
    """Charge-noise dephasing: asymptotic rate gamma0 in ueV, correlation
    time tau_c in ns."""

    gamma0: float
    tau_c: float

    def __post_init__(self):
        if self.gamma0 < 0:
            raise ValueError(f"gamma0 must be >= 0, got {self.gamma0}")
        if self.tau_c <= 0:
            raise ValueError(f"tau_c must be > 0, got {self.tau_c}")


@dataclass(frozen=True)
class PumpLevel:
    """Third (pump) level above the exciton: relaxation rate gamma_relax
    (ps^-1) and level shift (ps^-1, phase-only, defaults to 0)."""

    gamma_relax: float
    level_shift: float = 0.0

    def __post_init__(self):
        if self.gamma_relax <= 0:
            raise ValueError(
                f"gamma_relax must be > 0, got {self.gamma_relax}"
            )
