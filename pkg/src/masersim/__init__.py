"""Two-level maser rate equations: models, integrators, analyses and sweeps."""

from .analysis import (
    FluxSummary,
    PulseMetrics,
    PulseTrain,
    conserved_quantity_drift,
    detect_pulse_train,
    pulse_metrics,
    time_averaged_outflow,
)
from .models import (
    InitialState,
    ModelVariant,
    NormalizedParams,
    PhysicalParams,
    default_initial_state,
    einstein_alpha,
    normalize,
    pulsating_fixed_point,
    predicted_outflow,
    predicted_repetition_rate,
    stationary_inversion,
    stationary_photons,
    threshold_mu_th1,
    threshold_mu_th2,
    vector_field,
)
from .ode import IntegratorConfig, Trajectory, VectorField, derivative_of_log, integrate
from .sweep import RunRecord, SweepSpec, compare_models, figure_preset, run_sweep

__version__ = "0.1.0"

__all__ = [
    "FluxSummary",
    "InitialState",
    "IntegratorConfig",
    "ModelVariant",
    "NormalizedParams",
    "PhysicalParams",
    "PulseMetrics",
    "PulseTrain",
    "RunRecord",
    "SweepSpec",
    "Trajectory",
    "VectorField",
    "compare_models",
    "conserved_quantity_drift",
    "default_initial_state",
    "derivative_of_log",
    "detect_pulse_train",
    "einstein_alpha",
    "figure_preset",
    "integrate",
    "normalize",
    "predicted_outflow",
    "predicted_repetition_rate",
    "pulsating_fixed_point",
    "pulse_metrics",
    "run_sweep",
    "stationary_inversion",
    "stationary_photons",
    "threshold_mu_th1",
    "threshold_mu_th2",
    "time_averaged_outflow",
    "vector_field",
]
