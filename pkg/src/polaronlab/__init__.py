"""polaronlab: polaron master-equation toolkit for phonon-coupled
quantum-dot single-photon sources.

Simulates drive-dependent phonon dephasing of pulsed Rabi oscillations,
evaluates every dephasing channel feeding photon indistinguishability,
synthesizes and fits coincidence histograms, and extracts the model
parameters back out of such data by nonlinear least squares.
"""

from .coherence import (
    CorrelationGridSpec,
    DephasingBudget,
    IndistinguishabilityResult,
    charge_noise_rate,
    dephasing_budget,
    g1_resonant,
    indistinguishability_oracle,
    indistinguishability_resonant,
    indistinguishability_with_jitter,
    three_level_simulation,
)
from .dynamics import (
    IntegratorSpec,
    PulseContext,
    PulseResult,
    RabiScanResult,
    build_pulse_context,
    master_equation_rhs,
    phenomenological_rabi,
    pulse_envelope,
    rabi_scan,
    simulate_pulse,
    virtual_rates_static_approximation,
)
from .errors import (
    ConfigError,
    FitConvergenceError,
    IntegrationError,
    PolaronLabError,
    QuadratureError,
)
from .fitting import (
    ChargeNoiseFit,
    FitProblem,
    FitResult,
    PhononParamsFit,
    RabiCurveFit,
    VirtualCouplingFit,
    extract_phonon_params,
    fit_charge_noise,
    fit_mu,
    fit_rabi_curve,
    least_squares,
)
from .histograms import (
    BeamsplitterSpec,
    CorrectedVisibility,
    G2Result,
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
    synthesize_histogram,
)
from .kernels import (
    DEFAULT_QUADRATURE,
    KernelTable,
    QuadratureSpec,
    RateSet,
    build_kernel_table,
    franck_condon,
    half_fourier_rate,
    lambda_x,
    lambda_y,
    lambda_z,
    propagator_phi,
    quadratic_spectral_density,
    rate_functions,
    spectral_density,
    thermal_occupation,
    virtual_dephasing_rate,
    virtual_dephasing_rate_spectral,
)
from .model import (
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

__version__ = "0.1.0"
