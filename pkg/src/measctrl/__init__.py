"""Measurement-driven population transfer.

Sequences of projective measurements, continuous measurement with
time-dependent projectors, an evolution-strategy search over measurement
controls, and measurement-assisted coherent control of a three-level ladder.
"""
from .quantum import (
    DimensionError,
    InvalidStateError,
    Projector,
    check_density_matrix,
    make_projector,
    measure_instantaneous,
    measure_observable,
    picture_transform,
)
from .instantaneous import (
    MeasurementSequence,
    brute_force_optimal,
    optimal_sequence,
    optimal_yield_instantaneous,
    run_sequence,
    yield_closed_form,
)
from .continuous import (
    ControlFunctions,
    LinearControlParams,
    analytic_yield_linear,
    integrate_master_equation,
    optimal_yield_continuous,
    stationarity_check,
)
from .evo import OptimizerConfig, es_optimize, free_control_search
from .three_level import (
    RabiPulse,
    ThreeLevelPlan,
    closed_form_optimum,
    population_closed_form,
    propagator,
    run_plan,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "InvalidStateError",
    "Projector",
    "check_density_matrix",
    "make_projector",
    "measure_instantaneous",
    "measure_observable",
    "picture_transform",
    "MeasurementSequence",
    "brute_force_optimal",
    "optimal_sequence",
    "optimal_yield_instantaneous",
    "run_sequence",
    "yield_closed_form",
    "ControlFunctions",
    "LinearControlParams",
    "analytic_yield_linear",
    "integrate_master_equation",
    "optimal_yield_continuous",
    "stationarity_check",
    "OptimizerConfig",
    "es_optimize",
    "free_control_search",
    "RabiPulse",
    "ThreeLevelPlan",
    "closed_form_optimum",
    "population_closed_form",
    "propagator",
    "run_plan",
]
