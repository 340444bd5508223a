"""Coincidence-histogram synthesis, fitting, and visibility corrections.

Peaks are two-sided exponential decays convolved with a Gaussian detector
response, parameterized by area (total counts) rather than amplitude so
fitted areas feed the g2 and visibility formulas directly.  Times are ns
throughout this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx

from .fitting import FitProblem, FitResult, _jacobian, least_squares

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PeakModel:
    """One coincidence peak: center and decay time T1 in ns, detector
    resolution sigma in ns, area in counts."""

    center: float
    decay_time: float
    resolution_sigma: float
    area: float

    def __post_init__(self):
        if self.decay_time <= 0:
            raise ValueError(f"decay_time must be > 0, got {self.decay_time}")
        if self.resolution_sigma < 0:
            raise ValueError(
                f"resolution_sigma must be >= 0, got {self.resolution_sigma}"
            )
        if self.area < 0:
            raise ValueError(f"area must be >= 0, got {self.area}")


@dataclass(frozen=True)
class BeamsplitterSpec:
    """Interference-apparatus imperfections entering the visibility
    correction: beamsplitter R/T, interferometer contrast (1 - epsilon),
    and the adjacent-peak g2 value g_star."""

    reflectivity: float
    transmissivity: float
    interferometer_contrast: float
    g_star: float

    def __post_init__(self):
        for name in ("reflectivity", "transmissivity",
                     "interferometer_contrast", "g_star"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if abs(self.reflectivity + self.transmissivity - 1.0) > 1e-6:
            raise ValueError("reflectivity + transmissivity must equal 1")


def _exp_erfcx(a: float, b: np.ndarray) -> np.ndarray:
    # exp(-b^2) erfcx(a + b), branched so neither factor overflows: for
    # a + b < 0 use erfcx(z) = 2 exp(z^2) - erfcx(-z), which leaves the
    # decaying exponential exp(a^2 + 2 a b) in place of the 0 * inf pair.
    shape = np.shape(b)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    z = a + b
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = np.exp(-b[pos] ** 2) * erfcx(z[pos])
    neg = ~pos
    out[neg] = 2.0 * np.exp(a * a + 2.0 * a * b[neg]) - np.exp(
        -b[neg] ** 2
    ) * erfcx(-z[neg])
    return out.reshape(shape)


def peak_shape(t, p: PeakModel):
    """Density (counts per ns) of a two-sided exponential decay convolved
    with a Gaussian; integrates to the peak area.

    Evaluated via the scaled complementary error function so the
    exp(sigma^2 / 2 T1^2) factor never overflows; sigma = 0 falls back to
    the bare two-sided exponential.
    """
    t = np.asarray(t, dtype=float)
    u = t - p.center
    t1 = p.decay_time
    sig = p.resolution_sigma
    if sig == 0.0:
        out = (p.area / (2.0 * t1)) * np.exp(-np.abs(u) / t1)
    else:
        a = sig / (_SQRT2 * t1)
        b = u / (_SQRT2 * sig)
        out = (p.area / (4.0 * t1)) * (_exp_erfcx(a, b) + _exp_erfcx(a, -b))
    return out if out.ndim else float(out)


def make_bins(t_min: float, t_max: float, width: float) -> np.ndarray:
    """Uniform bin edges covering [t_min, t_max] with the given width."""
    if width <= 0:
        raise ValueError(f"bin width must be > 0, got {width}")
    n = int(round((t_max - t_min) / width))
    return t_min + width * np.arange(n + 1)


_SIMPSON_5 = np.array([1.0, 4.0, 2.0, 4.0, 1.0]) / 3.0


def _peak_columns(edges: np.ndarray, t1: float, sig: float, centers) -> np.ndarray:
    """(n_bins, n_peaks) matrix of unit-area peak integrals per bin.

    Each bin is integrated with a five-point Simpson subsample; a peak is
    only evaluated on bins within 20 T1 + 6 sigma of its center (the
    shape is below e^-20 of its maximum beyond that).
    """
    widths = np.diff(edges)
    h = widths[:, None] * 0.25
    t_sub = edges[:-1, None] + h * np.arange(5)[None, :]
    bin_centers = 0.5 * (edges[:-1] + edges[1:])
    t1 = max(t1, 1e-9)
    sig = max(sig, 0.0)
    cut = 20.0 * t1 + 6.0 * sig + float(widths.max())

    cols = np.zeros((widths.size, len(centers)))
    for k, c in enumerate(centers):
        rows = np.abs(bin_centers - c) <= cut
        if not np.any(rows):
            continue
        unit = PeakModel(center=float(c), decay_time=t1,
                         resolution_sigma=sig, area=1.0)
        dens = peak_shape(t_sub[rows], unit)
        cols[rows, k] = (dens * _SIMPSON_5[None, :]).sum(axis=1) * h[rows, 0]
    return cols


def _binned_model(edges: np.ndarray, params: np.ndarray, n_peaks: int):
    """Expected counts per bin for the shared-shape multi-peak model.

    params = [t1, sigma, baseline, areas (n), centers (n)]; baseline is
    counts per bin.
    """
    t1, sig, baseline = params[0], params[1], params[2]
    areas = params[3 : 3 + n_peaks]
    centers = params[3 + n_peaks : 3 + 2 * n_peaks]
    return _peak_columns(edges, t1, sig, centers) @ areas + baseline


def synthesize_histogram(
    peaks,
    edges: np.ndarray,
    noise_seed: int | None = None,
    baseline: float = 0.0,
):
    """Expected counts per bin for a list of PeakModel, Poisson-sampled
    when noise_seed is given (deterministic per seed)."""
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    expected = np.full(edges.size - 1, float(baseline))
    widths = np.diff(edges)
    h = widths[:, None] * 0.25
    t_sub = edges[:-1, None] + h * np.arange(5)[None, :]
    for p in peaks:
        dens = peak_shape(t_sub, p)
        expected += (dens * _SIMPSON_5[None, :]).sum(axis=1) * h[:, 0]
    if noise_seed is None:
        return expected
    rng = np.random.Generator(np.random.PCG64(noise_seed))
    return rng.poisson(expected).astype(np.int64)


@dataclass(frozen=True)
class HistogramFit:
    """Fitted multi-peak histogram: shared-shape peaks, flat baseline,
    weighted residual norm, and per-area standard errors."""

    peaks: tuple
    baseline: float
    residual_norm: float
    area_errors: np.ndarray = field(repr=False, default=None)
    fit: FitResult = field(repr=False, compare=False, default=None)


def seed_centers(
    n_peaks: int, mode: str, pulse_period: float, pair_separation: float
) -> np.ndarray:
    """Initial peak centers on the pulse grid ("hbt") or the five-peak
    pair-cluster grid ("hom")."""
    if mode == "hbt":
        k = np.arange(n_peaks) - (n_peaks - 1) / 2.0
        return k * pulse_period
    if mode == "hom":
        k = np.arange(n_peaks) - (n_peaks - 1) / 2.0
        return k * pair_separation
    raise ValueError(f"mode must be hbt|hom, got {mode}")


def fit_histogram(
    counts,
    edges,
    n_peaks: int,
    pulse_period: float = 12.2,
    mode: str = "hbt",
    pair_separation: float = 2.0,
    weighting: str = "poisson",
    initial_centers=None,
    max_iterations: int = 400,
) -> HistogramFit:
    """Weighted least-squares fit of n_peaks shared-shape peaks plus a
    flat baseline.

    T1 and sigma are shared across peaks; centers are seeded on the pulse
    (or pair-cluster) grid and left free; areas are free and bounded at
    zero.  Poisson weighting starts from sigma_y = sqrt(max(counts, 1))
    and takes one reweighting pass with model-based variances, which
    removes the low-count bias of observed-count weights.
    """
    counts = np.asarray(counts, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if counts.size != edges.size - 1:
        raise ValueError("counts and edges sizes are inconsistent")
    if n_peaks < 1:
        raise ValueError("n_peaks must be >= 1")
    if weighting not in ("poisson", "none"):
        raise ValueError(f"weighting must be poisson|none, got {weighting}")

    width = float(np.mean(np.diff(edges)))
    centers0 = (
        np.asarray(initial_centers, dtype=float)
        if initial_centers is not None
        else seed_centers(n_peaks, mode, pulse_period, pair_separation)
    )
    spacing = pair_separation if mode == "hom" else pulse_period
    # seed T1 from the area/height ratio of the populated peaks
    # (area = 2 T1 * peak density), falling back to the pulse spacing
    base_est = float(np.percentile(counts, 10))
    bin_mid = 0.5 * (edges[:-1] + edges[1:])
    ratios = []
    for c in centers0:
        window = np.abs(bin_mid - c) <= 0.5 * spacing
        if not np.any(window):
            continue
        a_est = float(np.sum(counts[window] - base_est))
        h_est = float(np.max(counts[window]) - base_est) / width
        if a_est > 0 and h_est > 0:
            ratios.append(a_est / (2.0 * h_est))
    sigma0 = max(width, 0.01)
    t1_0 = float(np.median(ratios)) if ratios else spacing / 16.0
    if ratios:
        # smearing lowers the observed peak height (density at the cusp is
        # erfcx(s)/(2 T1), s = sigma/(sqrt(2) T1)), which inflates the
        # area/height ratio; invert by fixed point with sigma augmented by
        # the bin width
        s_eff = math.hypot(sigma0, width / math.sqrt(12.0))
        ratio = t1_0
        for _ in range(3):
            t1_0 = ratio * float(erfcx(s_eff / (_SQRT2 * max(t1_0, 1e-6))))
    t1_0 = min(max(t1_0, width), spacing / 4.0)

    q0 = np.concatenate([[t1_0, sigma0], centers0])
    q_lo = np.concatenate([[1e-6, 0.0], centers0 - 0.5 * spacing])
    q_hi = np.concatenate([[np.inf, np.inf], centers0 + 0.5 * spacing])

    # Baseline and areas enter the model linearly, so they are profiled
    # out by a weighted linear solve inside the model and the outer
    # minimizer only sees (t1, sigma, centers).  The full-parameter
    # covariance is restored afterwards.
    def make_model(sigma_y):
        def linear_coefficients(q):
            cols = _peak_columns(edges, q[0], q[1], q[2:])
            design = np.column_stack([np.ones(counts.size), cols])
            coef, *_ = np.linalg.lstsq(
                design / sigma_y[:, None], counts / sigma_y, rcond=None
            )
            return np.clip(coef, 0.0, None), design

        def projected_model(_e, q):
            coef, design = linear_coefficients(q)
            return design @ coef

        return linear_coefficients, projected_model

    def run_pass(sigma_y, q_init):
        _, model = make_model(sigma_y)
        problem = FitProblem(
            model=model,
            x=edges,
            y=counts,
            sigma_y=sigma_y,
            initial_guess=np.clip(q_init, q_lo, q_hi),
            bounds=(q_lo, q_hi),
            max_iterations=max_iterations,
            # counting noise puts the chi-square floor at ~n_bins, so
            # relative changes below 1e-7 move parameters by a small
            # fraction of a standard error
            convergence_tol=1e-7,
            jacobian_mode="forward",
        )
        return least_squares(problem)

    if weighting == "poisson":
        sigma_y = np.sqrt(np.clip(counts, 1.0, None))
        res = run_pass(sigma_y, q0)
        linear_coefficients, _ = make_model(sigma_y)
        coef, _design = linear_coefficients(res.parameters)
        expected = _design @ coef
        sigma_y = np.sqrt(np.clip(expected, 1.0, None))
        res = run_pass(sigma_y, res.parameters)
    else:
        sigma_y = np.ones_like(counts)
        res = run_pass(sigma_y, q0)

    t1, sig = res.parameters[:2]
    centers = res.parameters[2:]
    linear_coefficients, _ = make_model(sigma_y)
    coef, _ = linear_coefficients(res.parameters)
    baseline, areas = coef[0], coef[1:]
    full = np.concatenate([[t1, sig, baseline], areas, centers])
    full_lo = np.concatenate(
        [[1e-6, 0.0, 0.0], np.zeros(n_peaks), centers0 - 0.5 * spacing]
    )
    full_hi = np.concatenate(
        [[np.inf] * 3, [np.inf] * n_peaks, centers0 + 0.5 * spacing]
    )
    jac = _jacobian(
        lambda e_, pp: _binned_model(e_, pp, n_peaks),
        edges, full, (full_lo, full_hi),
    )
    jtwj = (jac.T / sigma_y**2) @ jac
    try:
        cov = np.linalg.inv(jtwj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtwj)
    cov = 0.5 * (cov + cov.T)
    full_res = FitResult(
        parameters=full,
        covariance=cov,
        chi_square=res.chi_square,
        iterations=res.iterations,
        converged=res.converged,
    )
    errors = full_res.standard_errors()[3 : 3 + n_peaks]
    peaks = tuple(
        PeakModel(center=float(c), decay_time=float(t1),
                  resolution_sigma=float(sig), area=float(a))
        for a, c in zip(areas, centers)
    )
    return HistogramFit(
        peaks=peaks,
        baseline=float(baseline),
        residual_norm=math.sqrt(res.chi_square),
        area_errors=errors,
        fit=full_res,
    )


@dataclass(frozen=True)
class G2Result:
    """Normalized central-peak coincidences: g2 against the mean of all
    side peaks, g_star against only the two adjacent ones."""

    g2: float
    g_star: float


def g2_from_fit(fit: HistogramFit, pulse_period: float = 12.2) -> G2Result:
    """g2(0) from fitted areas: central area over the mean side-peak area,
    plus the adjacent-peaks-only variant."""
    if len(fit.peaks) < 3:
        raise ValueError("need at least 3 fitted peaks")
    centers = np.array([p.center for p in fit.peaks])
    areas = np.array([p.area for p in fit.peaks])
    i_central = int(np.argmin(np.abs(centers)))
    side_areas = np.delete(areas, i_central)
    if np.mean(side_areas) <= 0:
        raise ValueError("side-peak areas are zero; g2 undefined")
    g2 = areas[i_central] / float(np.mean(side_areas))

    side_centers = np.delete(centers, i_central)
    i_plus = int(np.argmin(np.abs(side_centers - pulse_period)))
    i_minus = int(np.argmin(np.abs(side_centers + pulse_period)))
    adjacent = 0.5 * (side_areas[i_plus] + side_areas[i_minus])
    if adjacent <= 0:
        raise ValueError("adjacent-peak areas are zero; g_star undefined")
    return G2Result(g2=float(g2), g_star=float(areas[i_central] / adjacent))


def raw_visibility(a_hh: float, a_hv: float) -> float:
    """Raw two-photon-interference visibility 1 - A_HH / A_HV."""
    if a_hv <= 0:
        raise ValueError(f"a_hv must be > 0, got {a_hv}")
    return 1.0 - a_hh / a_hv


@dataclass(frozen=True)
class CorrectedVisibility:
    """Apparatus-corrected visibility; above_unity marks a value that came
    out > 1 (reported, never clamped)."""

    value: float
    above_unity: bool


def santori_correction(
    nu_raw: float, bs: BeamsplitterSpec
) -> CorrectedVisibility:
    """Correct the raw visibility for beamsplitter imbalance, finite
    interferometer contrast, and residual multiphoton events:

    nu = nu_raw (R^3 T + R T^3)(1 + 2 g_star) / [2 (1-eps)^2 R^2 T^2]
    """
    if nu_raw > 1.0:
        raise ValueError(f"nu_raw must be <= 1, got {nu_raw}")
    if bs.interferometer_contrast == 0.0:
        raise ValueError("zero interferometer contrast; correction undefined")
    r, t = bs.reflectivity, bs.transmissivity
    num = (r**3 * t + r * t**3) * (1.0 + 2.0 * bs.g_star)
    den = 2.0 * bs.interferometer_contrast**2 * r**2 * t**2
    value = nu_raw * num / den
    return CorrectedVisibility(value=value, above_unity=value > 1.0)


def hom_central_areas(
    nu: float, bs: BeamsplitterSpec, scale: float = 1.0
) -> tuple[float, float]:
    """Forward model of the central-peak areas for a source of
    indistinguishability nu: (co-polarized, cross-polarized).

    santori_correction composed with raw_visibility inverts this exactly.
    """
    r, t = bs.reflectivity, bs.transmissivity
    base = (r**3 * t + r * t**3) * (1.0 + 2.0 * bs.g_star)
    a_perp = scale * base
    a_para = scale * (
        base - 2.0 * bs.interferometer_contrast**2 * r**2 * t**2 * nu
    )
    return a_para, a_perp


def michelson_contrast(i_max: float, i_min: float) -> float:
    """Fringe contrast (I_max - I_min) / (I_max + I_min)."""
    if i_max <= 0:
        raise ValueError(f"i_max must be > 0, got {i_max}")
    if i_min < 0 or i_min > i_max:
        raise ValueError("need i_max >= i_min >= 0")
    return (i_max - i_min) / (i_max + i_min)
