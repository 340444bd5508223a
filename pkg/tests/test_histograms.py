"""Coincidence-histogram synthesis, fitting, and visibility corrections."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from polaronlab.histograms import (
    BeamsplitterSpec,
    HistogramFit,
    PeakModel,
    fit_histogram,
    g2_from_fit,
    hom_central_areas,
    make_bins,
    michelson_contrast,
    peak_shape,
    raw_visibility,
    santori_correction,
    seed_centers,
    synthesize_histogram,
)

APPARATUS = BeamsplitterSpec(
    reflectivity=0.485,
    transmissivity=0.515,
    interferometer_contrast=0.99,
    g_star=0.006,
)


def _brute_force_shape(t: float, p: PeakModel) -> float:
    # direct numerical convolution of the two-sided exponential with the
    # Gaussian resolution function
    def integrand(s):
        decay = math.exp(-abs(s - p.center) / p.decay_time) / (2.0 * p.decay_time)
        blur = math.exp(
            -((t - s) ** 2) / (2.0 * p.resolution_sigma**2)
        ) / (p.resolution_sigma * math.sqrt(2.0 * math.pi))
        return decay * blur

    lo = p.center - 12.0 * (p.decay_time + p.resolution_sigma)
    hi = p.center + 12.0 * (p.decay_time + p.resolution_sigma)
    val, _ = quad(integrand, lo, hi, points=[p.center], limit=200)
    return p.area * val


class TestPeakShape:
    def test_matches_brute_force_convolution(self):
        p = PeakModel(center=1.3, decay_time=0.35, resolution_sigma=0.12, area=7.0)
        for t in (-0.5, 1.0, 1.3, 1.45, 2.5):
            assert peak_shape(t, p) == pytest.approx(
                _brute_force_shape(t, p), rel=1e-8
            )

    def test_zero_sigma_is_bare_exponential(self):
        p = PeakModel(center=0.0, decay_time=0.4, resolution_sigma=0.0, area=2.0)
        for t in (-0.8, 0.0, 0.6):
            expected = 2.0 / (2.0 * 0.4) * math.exp(-abs(t) / 0.4)
            assert peak_shape(t, p) == pytest.approx(expected, rel=1e-14)

    def test_symmetric_about_center(self):
        p = PeakModel(center=2.0, decay_time=0.35, resolution_sigma=0.12, area=1.0)
        for dt in (0.1, 0.5, 1.7):
            assert peak_shape(2.0 + dt, p) == pytest.approx(
                peak_shape(2.0 - dt, p), rel=1e-12
            )

    def test_integrates_to_area(self):
        p = PeakModel(center=0.0, decay_time=0.35, resolution_sigma=0.12, area=5.0)
        val, _ = quad(lambda t: peak_shape(t, p), -20.0, 20.0, limit=200)
        assert val == pytest.approx(5.0, rel=1e-8)

    def test_no_overflow_for_broad_resolution(self):
        # sigma >> T1 exercises the erfcx-stabilized branch
        p = PeakModel(center=0.0, decay_time=0.01, resolution_sigma=2.0, area=1.0)
        val = peak_shape(0.0, p)
        assert np.isfinite(val)
        # the narrow-exponential limit is the Gaussian itself
        assert val == pytest.approx(1.0 / (2.0 * math.sqrt(2.0 * math.pi)), rel=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            PeakModel(center=0.0, decay_time=0.0, resolution_sigma=0.1, area=1.0)
        with pytest.raises(ValueError):
            PeakModel(center=0.0, decay_time=0.3, resolution_sigma=-0.1, area=1.0)
        with pytest.raises(ValueError):
            PeakModel(center=0.0, decay_time=0.3, resolution_sigma=0.1, area=-1.0)


class TestBinsAndSeeds:
    def test_make_bins_uniform(self):
        edges = make_bins(-55.0, 55.0, 0.05)
        assert edges.size == 2201
        assert edges[0] == -55.0
        assert edges[-1] == pytest.approx(55.0, abs=1e-9)
        assert np.allclose(np.diff(edges), 0.05)

    def test_make_bins_rejects_bad_width(self):
        with pytest.raises(ValueError):
            make_bins(0.0, 1.0, 0.0)

    def test_seed_centers_pulse_grid(self):
        centers = seed_centers(9, "hbt", 12.2, 2.0)
        assert np.allclose(centers, 12.2 * np.arange(-4, 5))

    def test_seed_centers_pair_cluster(self):
        centers = seed_centers(5, "hom", 12.2, 2.0)
        assert np.allclose(centers, 2.0 * np.arange(-2, 3))

    def test_seed_centers_unknown_mode(self):
        with pytest.raises(ValueError):
            seed_centers(5, "bogus", 12.2, 2.0)


class TestSynthesize:
    def test_expected_counts_sum_to_total_area(self):
        edges = make_bins(-30.0, 30.0, 0.05)
        peaks = [
            PeakModel(center=c, decay_time=0.35, resolution_sigma=0.12, area=500.0)
            for c in (-12.2, 0.0, 12.2)
        ]
        expected = synthesize_histogram(peaks, edges, baseline=0.0)
        assert expected.sum() == pytest.approx(1500.0, rel=1e-6)

    def test_baseline_added_per_bin(self):
        edges = make_bins(0.0, 1.0, 0.1)
        counts = synthesize_histogram([], edges, baseline=2.5)
        assert np.allclose(counts, 2.5)

    def test_poisson_sampling_deterministic_per_seed(self):
        edges = make_bins(-10.0, 10.0, 0.05)
        peaks = [PeakModel(center=0.0, decay_time=0.35,
                           resolution_sigma=0.12, area=300.0)]
        a = synthesize_histogram(peaks, edges, noise_seed=11, baseline=1.0)
        b = synthesize_histogram(peaks, edges, noise_seed=11, baseline=1.0)
        c = synthesize_histogram(peaks, edges, noise_seed=12, baseline=1.0)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert a.dtype == np.int64

    def test_rejects_unsorted_edges(self):
        with pytest.raises(ValueError):
            synthesize_histogram([], np.array([0.0, 1.0, 0.5]))


def _synthetic_fit(
    central_area: float,
    side_area: float = 1000.0,
    n_peaks: int = 5,
    noise_seed: int | None = None,
    weighting: str = "none",
):
    edges = make_bins(-30.0, 30.0, 0.05)
    centers = seed_centers(n_peaks, "hbt", 12.2, 2.0)
    peaks = [
        PeakModel(
            center=c,
            decay_time=0.35,
            resolution_sigma=0.12,
            area=(central_area if abs(c) < 1e-9 else side_area),
        )
        for c in centers
    ]
    counts = synthesize_histogram(peaks, edges, noise_seed=noise_seed, baseline=2.0)
    fit = fit_histogram(counts, edges, n_peaks, weighting=weighting)
    return peaks, fit


class TestFitHistogram:
    def test_noiseless_round_trip(self):
        truth, fit = _synthetic_fit(central_area=6.0)
        assert fit.peaks[0].decay_time == pytest.approx(0.35, rel=1e-3)
        assert fit.peaks[0].resolution_sigma == pytest.approx(0.12, rel=1e-3)
        assert fit.baseline == pytest.approx(2.0, rel=1e-3)
        for true_peak, fitted in zip(truth, sorted(fit.peaks, key=lambda p: p.center)):
            assert fitted.center == pytest.approx(true_peak.center, abs=1e-3)
            assert fitted.area == pytest.approx(true_peak.area, rel=1e-3)

    def test_poisson_round_trip_single_seed(self):
        truth, fit = _synthetic_fit(
            central_area=6.0, noise_seed=3, weighting="poisson"
        )
        # one seed: loose bounds; the acceptance suite runs the 100-seed
        # pull battery
        assert fit.peaks[0].decay_time == pytest.approx(0.35, rel=0.10)
        assert fit.peaks[0].resolution_sigma == pytest.approx(0.12, rel=0.10)
        side = [p.area for p in fit.peaks if abs(p.center) > 1.0]
        assert np.mean(side) == pytest.approx(1000.0, rel=0.05)

    def test_empty_central_peak_consistent_with_zero(self):
        _, fit = _synthetic_fit(central_area=0.0)
        central = min(fit.peaks, key=lambda p: abs(p.center))
        assert central.area < 1.0

    def test_shared_shape_across_peaks(self):
        _, fit = _synthetic_fit(central_area=6.0)
        t1s = {p.decay_time for p in fit.peaks}
        sigmas = {p.resolution_sigma for p in fit.peaks}
        assert len(t1s) == 1
        assert len(sigmas) == 1


class TestG2:
    def test_noiseless_low_central_peak(self):
        _, fit = _synthetic_fit(central_area=6.0)
        res = g2_from_fit(fit)
        assert res.g2 == pytest.approx(0.006, abs=2e-4)
        assert res.g_star == pytest.approx(0.006, abs=2e-4)

    def test_all_equal_areas_give_unity(self):
        peaks = tuple(
            PeakModel(center=c, decay_time=0.35, resolution_sigma=0.12, area=100.0)
            for c in seed_centers(5, "hbt", 12.2, 2.0)
        )
        fit = HistogramFit(peaks=peaks, baseline=0.0, residual_norm=0.0)
        res = g2_from_fit(fit)
        assert res.g2 == 1.0
        assert res.g_star == 1.0

    def test_needs_three_peaks(self):
        peaks = tuple(
            PeakModel(center=c, decay_time=0.35, resolution_sigma=0.12, area=100.0)
            for c in (-12.2, 0.0)
        )
        fit = HistogramFit(peaks=peaks, baseline=0.0, residual_norm=0.0)
        with pytest.raises(ValueError):
            g2_from_fit(fit)


class TestVisibility:
    def test_raw_visibility(self):
        assert raw_visibility(37.0, 1000.0) == pytest.approx(0.963, rel=1e-12)
        assert raw_visibility(0.0, 1000.0) == 1.0
        with pytest.raises(ValueError):
            raw_visibility(1.0, 0.0)

    def test_correction_frozen_value(self):
        res = santori_correction(0.963, APPARATUS)
        assert res.value == pytest.approx(0.996134864812675, rel=1e-12)
        assert not res.above_unity

    def test_ideal_apparatus_is_identity(self):
        ideal = BeamsplitterSpec(
            reflectivity=0.5,
            transmissivity=0.5,
            interferometer_contrast=1.0,
            g_star=0.0,
        )
        res = santori_correction(0.9, ideal)
        assert res.value == pytest.approx(0.9, rel=1e-12)

    def test_above_unity_flagged_not_clamped(self):
        res = santori_correction(0.999, APPARATUS)
        assert res.value > 1.0
        assert res.above_unity

    def test_raw_above_unity_rejected(self):
        with pytest.raises(ValueError):
            santori_correction(1.01, APPARATUS)

    def test_zero_contrast_rejected(self):
        bs = BeamsplitterSpec(
            reflectivity=0.5,
            transmissivity=0.5,
            interferometer_contrast=0.0,
            g_star=0.0,
        )
        with pytest.raises(ValueError):
            santori_correction(0.9, bs)

    def test_forward_model_inverts(self):
        nu = 0.973
        a_para, a_perp = hom_central_areas(nu, APPARATUS, scale=1234.5)
        recovered = santori_correction(raw_visibility(a_para, a_perp), APPARATUS)
        assert recovered.value == pytest.approx(nu, rel=1e-12)

    def test_beamsplitter_validation(self):
        with pytest.raises(ValueError):
            BeamsplitterSpec(
                reflectivity=0.6,
                transmissivity=0.5,
                interferometer_contrast=1.0,
                g_star=0.0,
            )
        with pytest.raises(ValueError):
            BeamsplitterSpec(
                reflectivity=1.2,
                transmissivity=-0.2,
                interferometer_contrast=1.0,
                g_star=0.0,
            )


class TestMichelson:
    def test_frozen_value(self):
        assert michelson_contrast(533.0, 2.80) == pytest.approx(
            0.9895483389324377, rel=1e-12
        )

    def test_limits(self):
        assert michelson_contrast(10.0, 0.0) == 1.0
        assert michelson_contrast(10.0, 10.0) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            michelson_contrast(0.0, 0.0)
        with pytest.raises(ValueError):
            michelson_contrast(5.0, 6.0)
        with pytest.raises(ValueError):
            michelson_contrast(5.0, -1.0)
