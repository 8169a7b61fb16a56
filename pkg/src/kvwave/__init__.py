"""Finite-volume simulation of a 1-D elastic/viscoelastic transmission wave
problem with localized Kelvin-Voigt damping, with per-step energy accounting
and decay-rate estimation."""

from .diagnostics import (
    DecayFit,
    EnergyRecord,
    EnergyTrace,
    discrete_h1_seminorm,
    discrete_l2_norm,
    dissipation_increment,
    energy_identity_residual,
    fit_exponential,
    fit_polynomial,
    kinetic_energy,
    potential_energy_explicit,
    potential_energy_implicit,
)
from .linalg import (
    SingularMatrixError,
    TriDiagFactorization,
    TriDiagMatrix,
    assemble_damping,
    assemble_mass,
    assemble_stiffness,
    dense_solve_oracle,
    factor,
    solve,
)
from .mesh import FluxCoefficients, Mesh, Parameters, build_mesh, flux_coefficients
from .model import (
    Admissibility,
    CellAverages,
    InitialData,
    cfl_max_dt,
    default_initial_data,
    sample_cell_averages,
    validate_run,
)
from .schemes import (
    DivergenceError,
    SchemeOperators,
    SchemeState,
    SimulationResult,
    Snapshot,
    bootstrap_explicit,
    bootstrap_implicit,
    build_operators,
    run,
    step_explicit,
    step_implicit,
)
from .cli import PRESET_NAMES, ConfigError, RunConfig, RunResult, parse_config, preset

__version__ = "0.1.0"

__all__ = [
    "Admissibility",
    "CellAverages",
    "ConfigError",
    "DecayFit",
    "DivergenceError",
    "EnergyRecord",
    "EnergyTrace",
    "FluxCoefficients",
    "InitialData",
    "Mesh",
    "PRESET_NAMES",
    "Parameters",
    "RunConfig",
    "RunResult",
    "SchemeOperators",
    "SchemeState",
    "SimulationResult",
    "SingularMatrixError",
    "Snapshot",
    "TriDiagFactorization",
    "TriDiagMatrix",
    "assemble_damping",
    "assemble_mass",
    "assemble_stiffness",
    "bootstrap_explicit",
    "bootstrap_implicit",
    "build_mesh",
    "build_operators",
    "cfl_max_dt",
    "default_initial_data",
    "dense_solve_oracle",
    "discrete_h1_seminorm",
    "discrete_l2_norm",
    "dissipation_increment",
    "energy_identity_residual",
    "factor",
    "fit_exponential",
    "fit_polynomial",
    "flux_coefficients",
    "kinetic_energy",
    "parse_config",
    "potential_energy_explicit",
    "potential_energy_implicit",
    "preset",
    "run",
    "sample_cell_averages",
    "solve",
    "step_explicit",
    "step_implicit",
    "validate_run",
]
