"""Photothermal cantilever-cooling toolkit.

Closed-form occupation budgets, frequency-domain spectra, stochastic
time-domain simulation with a delayed (memory-kernel) feedback force,
cooling-limit optimization, and fitting of the deformation coefficient to
temperature-vs-power data.
"""

from .config import (
    bundled_device,
    canonical_json,
    list_bundled_devices,
    load_device_config,
    params_digest,
    parse_device_config,
    system_params_to_config,
)
from .errors import (
    ConfigValidationError,
    DatasetParseError,
    DegenerateDetuningError,
    FitDivergedError,
    GridTooCoarseError,
    HeatingRegimeError,
    InstabilityError,
    InvalidParameterError,
    NegativeOccupancyError,
    NoFeasiblePointError,
    NonstationaryTrajectoryError,
    PhotocoolError,
    SimulationAbortError,
    TooFewSegmentsError,
    UnderdeterminedFitError,
)
from .fitting import Dataset, FitResult, fit, load_dataset, predict_mode_temperature
from .model import (
    LinearCoefficients,
    cavity_photon_number,
    classical_population,
    effective_temperature,
    force_gradient_and_noise,
    linear_coefficients,
    noise_population,
    occupation_budget,
    photothermal_damping,
    photothermal_damping_rate,
    pump_amplitude_from_power,
    radiation_pressure_terms,
    rate_equation_total,
    renormalized_frequency,
    stability_margin,
)
from .optimize import (
    JointOptResult,
    OptInputs,
    OptResult,
    classical_bound,
    joint_optimize,
    noise_floor,
    noise_floor_bound,
    noise_floor_large_qc,
    noise_floor_result,
    noise_population_A,
    noise_terms_A,
    optimal_A,
    optimal_detuning,
)
from .params import (
    CantileverParams,
    CavityParams,
    DerivedQuantities,
    EnvironmentParams,
    SystemParams,
)
from .simulate import (
    SimConfig,
    Trajectory,
    estimate_occupancy,
    kernel_lowpass_step,
    poisson_window_counts,
    read_trajectory,
    shot_noise_counter,
    simulate,
    suggest_config,
    suggest_dt,
    welch_psd,
    write_trajectory,
)
from .spectral import (
    Spectrum,
    displacement_psd,
    occupancy_from_psd,
    resonance_grid,
    response_denominator,
    steady_state_occupancy,
    write_spectrum_csv,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # parameters
    "CavityParams",
    "CantileverParams",
    "EnvironmentParams",
    "SystemParams",
    "DerivedQuantities",
    # closed-form model
    "pump_amplitude_from_power",
    "cavity_photon_number",
    "force_gradient_and_noise",
    "radiation_pressure_terms",
    "photothermal_damping",
    "photothermal_damping_rate",
    "renormalized_frequency",
    "stability_margin",
    "effective_temperature",
    "classical_population",
    "noise_population",
    "rate_equation_total",
    "occupation_budget",
    "LinearCoefficients",
    "linear_coefficients",
    # spectral
    "Spectrum",
    "response_denominator",
    "displacement_psd",
    "occupancy_from_psd",
    "resonance_grid",
    "steady_state_occupancy",
    "write_spectrum_csv",
    # simulator
    "SimConfig",
    "Trajectory",
    "kernel_lowpass_step",
    "simulate",
    "suggest_dt",
    "suggest_config",
    "estimate_occupancy",
    "welch_psd",
    "shot_noise_counter",
    "poisson_window_counts",
    "write_trajectory",
    "read_trajectory",
    # optimizer
    "OptInputs",
    "OptResult",
    "JointOptResult",
    "noise_terms_A",
    "noise_population_A",
    "optimal_A",
    "noise_floor",
    "noise_floor_large_qc",
    "noise_floor_bound",
    "noise_floor_result",
    "optimal_detuning",
    "classical_bound",
    "joint_optimize",
    # fitting
    "Dataset",
    "FitResult",
    "predict_mode_temperature",
    "fit",
    "load_dataset",
    # config
    "parse_device_config",
    "load_device_config",
    "system_params_to_config",
    "params_digest",
    "canonical_json",
    "list_bundled_devices",
    "bundled_device",
    # errors
    "PhotocoolError",
    "InvalidParameterError",
    "DegenerateDetuningError",
    "HeatingRegimeError",
    "InstabilityError",
    "GridTooCoarseError",
    "NegativeOccupancyError",
    "NonstationaryTrajectoryError",
    "TooFewSegmentsError",
    "SimulationAbortError",
    "NoFeasiblePointError",
    "FitDivergedError",
    "UnderdeterminedFitError",
    "ConfigValidationError",
    "DatasetParseError",
]
