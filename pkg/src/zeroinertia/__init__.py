"""Second-order aggregation dynamics and their zero-inertia limit.

Particle, kinetic and macroscopic solvers for aggregation models driven by a
radial interaction potential K, together with exact Wasserstein-1 distances
and the diagnostics used to measure convergence as the inertia eps -> 0.
"""
from .dynamics import (
    AdjointTrajectory,
    IntegrationError,
    SimConfig,
    TrajectoryRecord,
    adjoint_relaxation,
    first_order_velocity,
    interaction_field,
    linear_closed_form,
    self_field,
    simulate_first_order,
    simulate_second_order,
    step_second_order,
)
from .kinetic_flow import monokinetic_projection, push_forward_kinetic, push_forward_macroscopic
from .measures import (
    MollifierSpec,
    PhaseEnsemble,
    SpatialEnsemble,
    ensemble_statistics,
    first_marginal,
    mollify_ensemble,
    read_ensemble_csv,
    support_radius,
    write_ensemble_csv,
)
from .metrics import (
    DiagnosticsSeries,
    RateFit,
    boundary_layer_profile,
    fit_rate,
    moment_functional,
    wasserstein1,
    wasserstein1_bruteforce,
)
from .potentials import DomainError, InvalidParameterError, RadialPotential, evaluate_kernel, gradient_bounds

__version__ = "0.1.0"

__all__ = [
    "AdjointTrajectory",
    "DiagnosticsSeries",
    "DomainError",
    "IntegrationError",
    "InvalidParameterError",
    "MollifierSpec",
    "PhaseEnsemble",
    "RadialPotential",
    "RateFit",
    "SimConfig",
    "SpatialEnsemble",
    "TrajectoryRecord",
    "adjoint_relaxation",
    "boundary_layer_profile",
    "ensemble_statistics",
    "evaluate_kernel",
    "first_marginal",
    "first_order_velocity",
    "fit_rate",
    "gradient_bounds",
    "interaction_field",
    "linear_closed_form",
    "mollify_ensemble",
    "moment_functional",
    "monokinetic_projection",
    "push_forward_kinetic",
    "push_forward_macroscopic",
    "read_ensemble_csv",
    "self_field",
    "simulate_first_order",
    "simulate_second_order",
    "step_second_order",
    "support_radius",
    "wasserstein1",
    "wasserstein1_bruteforce",
    "write_ensemble_csv",
]
