"""Pulse-driven master-equation dynamics and Rabi scans.

Frozen populations were cross-checked against an independently written
fixed-step integrator before this module existed; they are reproduced
here to the integrator tolerance, not to machine precision.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from polaronlab.dynamics import (
    IntegratorSpec,
    build_pulse_context,
    phenomenological_rabi,
    pulse_envelope,
    rabi_scan,
    simulate_pulse,
    trajectory_csv_rows,
)
from polaronlab.model import PhononCoupling, PulseSpec

from conftest import REFERENCE_COUPLING

NO_PHONONS = PhononCoupling(alpha=0.0, omega_c=1.8, mu=0.0)
NO_VIRTUAL = PhononCoupling(alpha=0.13, omega_c=1.8, mu=0.0)


class TestPulseEnvelope:
    def test_integrates_to_area(self):
        p = PulseSpec(area=2.7, fwhm=1.2)
        val, _ = quad(lambda t: pulse_envelope(t, p), -10.0, 10.0)
        assert val == pytest.approx(2.7, rel=1e-10)

    def test_peak_at_center(self):
        p = PulseSpec(area=1.0, fwhm=1.2, center=3.0)
        assert pulse_envelope(3.0, p) == pytest.approx(
            1.0 / (2.0 * p.dtau * math.sqrt(math.pi)), rel=1e-14
        )
        assert pulse_envelope(3.5, p) < pulse_envelope(3.0, p)


class TestIntegratorSpec:
    def test_defaults(self):
        spec = IntegratorSpec()
        assert spec.method == "RK45"
        assert spec.rtol == 1e-8
        assert spec.atol == 1e-10

    def test_invalid_tolerances_rejected(self):
        with pytest.raises(ValueError):
            IntegratorSpec(rtol=0.0)
        with pytest.raises(ValueError):
            IntegratorSpec(atol=-1e-10)


class TestSimulatePulse:
    def test_zero_area_is_identity(self, context_cache):
        ctx = context_cache()
        res = simulate_pulse(PulseSpec(area=0.0), ctx)
        assert res.final_population == 0.0
        assert np.trace(res.rho_end) == pytest.approx(1.0)

    @pytest.mark.parametrize("area", [0.5, math.pi / 2, math.pi, 2.5])
    def test_flat_pulse_rabi_identity(self, context_cache, area):
        # without phonons a constant drive gives rho_XX = sin^2(A/2)
        ctx = context_cache(NO_PHONONS)
        res = simulate_pulse(PulseSpec(area=area), ctx, envelope="flat")
        assert res.final_population == pytest.approx(
            math.sin(area / 2.0) ** 2, abs=1e-6
        )

    def test_gaussian_pi_pulse_inverts_without_phonons(self, context_cache):
        ctx = context_cache(NO_PHONONS)
        res = simulate_pulse(PulseSpec(area=math.pi), ctx)
        assert abs(res.final_population - 1.0) < 1e-6

    def test_frozen_pi_population_at_10_kelvin(self, context_cache):
        ctx = context_cache(REFERENCE_COUPLING, 10.0)
        res = simulate_pulse(PulseSpec(area=math.pi), ctx)
        assert res.final_population == pytest.approx(0.7354606462448008, abs=1e-6)

    def test_trace_and_hermiticity_along_trajectory(self, context_cache):
        ctx = context_cache(REFERENCE_COUPLING, 10.0)
        res = simulate_pulse(PulseSpec(area=math.pi), ctx, n_samples=120)
        traces = np.trace(res.trajectory, axis1=1, axis2=2)
        assert np.max(np.abs(traces - 1.0)) < 1e-9
        dev = res.trajectory - np.conj(np.transpose(res.trajectory, (0, 2, 1)))
        assert np.max(np.abs(dev)) < 1e-9

    def test_populations_stay_in_unit_interval(self, context_cache):
        ctx = context_cache(REFERENCE_COUPLING, 10.0)
        res = simulate_pulse(PulseSpec(area=2.0 * math.pi), ctx, n_samples=200)
        pops = res.trajectory[:, 0, 0].real
        assert np.all(pops > -1e-9)
        assert np.all(pops < 1.0 + 1e-9)

    def test_tolerance_halving_stability(self, context_cache):
        # halving rtol/atol must not move the final population by more
        # than ten times the default absolute tolerance scale
        ctx = context_cache(REFERENCE_COUPLING, 10.0)
        base = simulate_pulse(PulseSpec(area=math.pi), ctx).final_population
        tight = simulate_pulse(
            PulseSpec(area=math.pi), ctx, IntegratorSpec(rtol=5e-9, atol=5e-11)
        ).final_population
        assert abs(base - tight) < 1e-9

    def test_static_and_full_virtual_modes_agree(self, context_cache):
        # at the reference coupling the virtual channel is so weak that
        # the static pure-dephasing limit matches the chi-based dissipator
        static = simulate_pulse(
            PulseSpec(area=math.pi), context_cache(REFERENCE_COUPLING, 20.0)
        ).final_population
        full = simulate_pulse(
            PulseSpec(area=math.pi),
            context_cache(REFERENCE_COUPLING, 20.0, "full"),
        ).final_population
        assert static == pytest.approx(0.5998183305903785, abs=1e-6)
        assert full == pytest.approx(0.5998408481765652, abs=1e-6)
        assert abs(static - full) < 1e-4

    def test_removing_virtual_channel_barely_moves_pi_point(self, context_cache):
        with_mu = simulate_pulse(
            PulseSpec(area=math.pi), context_cache(REFERENCE_COUPLING, 10.0)
        ).final_population
        without_mu = simulate_pulse(
            PulseSpec(area=math.pi), context_cache(NO_VIRTUAL, 10.0)
        ).final_population
        assert abs(without_mu - with_mu) / with_mu < 1e-3

    def test_oversized_pulse_rejected(self, context_cache):
        ctx = context_cache(REFERENCE_COUPLING, 10.0)
        with pytest.raises(ValueError, match="rate grid"):
            simulate_pulse(PulseSpec(area=25.0), ctx)

    def test_custom_initial_state(self, context_cache):
        ctx = context_cache(NO_PHONONS)
        excited = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        res = simulate_pulse(PulseSpec(area=math.pi), ctx, initial=excited)
        # a pi pulse maps |X> back to the ground state
        assert res.final_population == pytest.approx(0.0, abs=1e-6)


class TestRabiScan:
    def test_zpl_intensity_is_b_squared_population(self, context_cache):
        ctx = context_cache(REFERENCE_COUPLING, 10.0)
        areas = np.linspace(0.3, 6.0, 7)
        scan = rabi_scan(areas, REFERENCE_COUPLING, 10.0, context=ctx)
        assert np.array_equal(
            scan.zpl_intensity, ctx.B**2 * scan.final_population
        )

    def test_threads_do_not_change_results(self, context_cache):
        ctx = context_cache(REFERENCE_COUPLING, 10.0)
        areas = np.linspace(0.3, 6.0, 7)
        serial = rabi_scan(areas, REFERENCE_COUPLING, 10.0, context=ctx)
        threaded = rabi_scan(
            areas, REFERENCE_COUPLING, 10.0, context=ctx, threads=3
        )
        assert np.array_equal(serial.final_population, threaded.final_population)

    def test_unsorted_areas_rejected(self, context_cache):
        ctx = context_cache(REFERENCE_COUPLING, 10.0)
        with pytest.raises(ValueError):
            rabi_scan(
                np.array([2.0, 1.0, 3.0]), REFERENCE_COUPLING, 10.0, context=ctx
            )

    def test_phonons_off_matches_analytic(self, context_cache):
        ctx = context_cache(NO_PHONONS)
        areas = np.array([0.5, 1.5, math.pi])
        scan = rabi_scan(areas, NO_PHONONS, 10.0, context=ctx)
        expected = np.sin(areas / 2.0) ** 2
        assert np.max(np.abs(scan.final_population - expected)) < 1e-6


class TestPhenomenologicalRabi:
    def test_closed_form(self):
        a = np.array([0.0, 1.0, 2.5])
        c1, c2, c3 = 0.8, 0.05, 1.1
        expected = c1 * (1.0 - np.exp(-c2 * a**2) * np.cos(c3 * a))
        assert np.allclose(phenomenological_rabi(a, c1, c2, c3), expected)

    def test_zero_area_gives_zero(self):
        assert phenomenological_rabi(0.0, 0.9, 0.02, 1.0) == 0.0

    def test_undamped_limit_oscillates(self):
        # with c2 = 0 the curve is pure c1 (1 - cos(c3 A))
        val = phenomenological_rabi(math.pi, 0.5, 0.0, 1.0)
        assert val == pytest.approx(1.0, rel=1e-12)


class TestTrajectoryExport:
    def test_rows_match_trajectory(self, context_cache):
        ctx = context_cache(REFERENCE_COUPLING, 10.0)
        res = simulate_pulse(PulseSpec(area=math.pi), ctx, n_samples=40)
        rows = list(trajectory_csv_rows(res))
        assert len(rows) == 40
        t, pop, re_c, im_c = rows[13]
        assert t == res.times[13]
        assert pop == res.trajectory[13, 0, 0].real
        assert re_c == res.trajectory[13, 0, 1].real
        assert im_c == res.trajectory[13, 0, 1].imag
