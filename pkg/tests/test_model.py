"""Units, physical constants, and parameter-container validation."""

from __future__ import annotations

import math

import pytest

from polaronlab.model import (
    HBAR_MEV_PS,
    KB_MEV_PER_K,
    KB_OVER_HBAR,
    ChargeNoise,
    EmitterParams,
    Environment,
    PhononCoupling,
    PulseSpec,
    PumpLevel,
    rate_psinv_to_uev,
    rate_uev_to_psinv,
    thermal_frequency,
)


class TestConstants:
    def test_hbar(self):
        assert HBAR_MEV_PS == 0.6582119

    def test_kb(self):
        assert KB_MEV_PER_K == 0.0861733

    def test_kb_over_hbar_is_ratio(self):
        assert KB_OVER_HBAR == KB_MEV_PER_K / HBAR_MEV_PS
        assert KB_OVER_HBAR == pytest.approx(0.1309, abs=5e-5)


class TestThermalFrequency:
    def test_value_at_10_kelvin(self):
        assert thermal_frequency(10.0) == pytest.approx(
            1.3092030089398263, rel=1e-15
        )

    def test_linear_in_temperature(self):
        assert thermal_frequency(5.6) == pytest.approx(
            5.6 * KB_OVER_HBAR, rel=1e-15
        )

    def test_zero_kelvin(self):
        assert thermal_frequency(0.0) == 0.0

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            thermal_frequency(-0.1)


class TestRateConversion:
    def test_linewidth_to_rate(self):
        # 0.37 ueV -> 0.37e-3 meV / hbar in ps^-1
        assert rate_uev_to_psinv(0.37) == pytest.approx(
            0.37e-3 / HBAR_MEV_PS, rel=1e-15
        )
        assert rate_uev_to_psinv(0.37) == pytest.approx(5.6213e-4, rel=1e-4)

    def test_round_trip(self):
        for x in (0.0, 0.37, 2.5, 100.0):
            assert rate_psinv_to_uev(rate_uev_to_psinv(x)) == pytest.approx(
                x, rel=1e-14, abs=1e-300
            )

    def test_hbar_over_lifetime_identity(self):
        # hbar / (730 ps) expressed as a rate equals the 1/730 ps^-1 rate
        assert rate_uev_to_psinv(rate_psinv_to_uev(1.0 / 730.0)) == pytest.approx(
            1.0 / 730.0, rel=1e-14
        )


class TestPhononCoupling:
    def test_fields(self):
        c = PhononCoupling(alpha=0.13, omega_c=1.8, mu=1.1e-3)
        assert (c.alpha, c.omega_c, c.mu) == (0.13, 1.8, 1.1e-3)

    def test_zero_alpha_and_mu_allowed(self):
        PhononCoupling(alpha=0.0, omega_c=1.8, mu=0.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alpha": -0.1, "omega_c": 1.8, "mu": 0.0},
            {"alpha": 0.13, "omega_c": 0.0, "mu": 0.0},
            {"alpha": 0.13, "omega_c": -1.8, "mu": 0.0},
            {"alpha": 0.13, "omega_c": 1.8, "mu": -1e-3},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PhononCoupling(**kwargs)

    def test_frozen(self):
        c = PhononCoupling(alpha=0.13, omega_c=1.8, mu=1.1e-3)
        with pytest.raises(AttributeError):
            c.alpha = 0.2  # type: ignore[misc]


class TestPulseSpec:
    def test_dtau_from_fwhm(self):
        p = PulseSpec(area=math.pi, fwhm=1.2)
        assert p.dtau == pytest.approx(1.2 / (4.0 * math.sqrt(math.log(2.0))), rel=1e-15)

    def test_amplitude_fwhm_relation(self):
        # the drive envelope exp(-(t / 2 dtau)^2) falls to half its peak
        # at t = +/- fwhm / 2
        p = PulseSpec(area=1.0, fwhm=2.0)
        half = math.exp(-((p.fwhm / 2.0) / (2.0 * p.dtau)) ** 2)
        assert half == pytest.approx(0.5, rel=1e-12)

    def test_invalid_fwhm_rejected(self):
        with pytest.raises(ValueError):
            PulseSpec(area=1.0, fwhm=0.0)


class TestValidation:
    def test_emitter_requires_positive_rate(self):
        with pytest.raises(ValueError):
            EmitterParams(gamma_emission=0.0)
        EmitterParams(gamma_emission=1.0 / 730.0)

    def test_environment_requires_nonnegative_temperature(self):
        with pytest.raises(ValueError):
            Environment(temperature=-1.0)
        assert Environment(temperature=0.0).temperature == 0.0

    def test_charge_noise_validation(self):
        with pytest.raises(ValueError):
            ChargeNoise(gamma0=-0.1, tau_c=6.48)
        with pytest.raises(ValueError):
            ChargeNoise(gamma0=0.37, tau_c=0.0)
        ChargeNoise(gamma0=0.0, tau_c=6.48)

    def test_pump_level_requires_positive_relaxation(self):
        with pytest.raises(ValueError):
            PumpLevel(gamma_relax=0.0)
        PumpLevel(gamma_relax=1.0 / 53.0)
