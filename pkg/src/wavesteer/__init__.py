"""Spectral simulation and Gramian steering for a damped wave model.

The package simulates a strongly damped semilinear wave equation with a
memory convolution, a fixed state delay, and velocity impulses, truncated
onto the Dirichlet sine eigenbasis, and synthesizes regularized
minimum-energy controls that steer the final state toward a target.
"""

from .config import ConfigError, ExperimentConfig, ProfileSpec, load_config, validate_config
from .dynamics import (
    MemoryKernel,
    NonlinearitySpec,
    SolverAbort,
    SolverConfig,
    Trajectory,
    WaveIntegrator,
    validate_growth,
)
from .gramian import (
    ControlSignal,
    GramianData,
    SteeringWindow,
    adjoint_map,
    assemble_gramian,
    controllability_map,
    energy_vector,
    input_map,
    state_from_energy,
    steering_error,
    synthesize_tail,
)
from .semigroup import Semigroup
from .spectral import (
    ActuatorRegion,
    DomainSpec,
    OverlapMatrix,
    SpectralBasis,
    analyze_field,
    build_basis,
    collocation_grid,
    overlap_matrix,
    synthesize_field,
)
from .state import (
    HistorySegment,
    ImpulseEvent,
    ImpulseSchedule,
    ModalState,
    ModelParams,
    apply_impulse,
    delayed_state,
    z_half_norm,
)
from .steering import (
    SteeringOutcome,
    SteeringRow,
    build_setup,
    growth_envelope,
    run_steering,
    sweep,
    write_report,
    write_spectrum,
    write_trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "ActuatorRegion",
    "ConfigError",
    "ControlSignal",
    "DomainSpec",
    "ExperimentConfig",
    "GramianData",
    "HistorySegment",
    "ImpulseEvent",
    "ImpulseSchedule",
    "MemoryKernel",
    "ModalState",
    "ModelParams",
    "NonlinearitySpec",
    "OverlapMatrix",
    "ProfileSpec",
    "Semigroup",
    "SolverAbort",
    "SolverConfig",
    "SpectralBasis",
    "SteeringOutcome",
    "SteeringRow",
    "SteeringWindow",
    "Trajectory",
    "WaveIntegrator",
    "adjoint_map",
    "analyze_field",
    "apply_impulse",
    "assemble_gramian",
    "build_basis",
    "build_setup",
    "collocation_grid",
    "controllability_map",
    "delayed_state",
    "energy_vector",
    "growth_envelope",
    "input_map",
    "load_config",
    "overlap_matrix",
    "run_steering",
    "state_from_energy",
    "steering_error",
    "sweep",
    "synthesize_field",
    "synthesize_tail",
    "validate_config",
    "validate_growth",
    "write_report",
    "write_spectrum",
    "write_trajectory",
    "z_half_norm",
]
