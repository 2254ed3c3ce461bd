"""Collective-dispersion energy lab: grids, states, observables,
time evolution, induced macro-fields, and fractional-operator witnesses."""

from .config import DEFAULT_TOLERANCES, ConfigError, Scenario, ScenarioConfig, parse_config
from .dynamics import (
    EvolutionRecord,
    Hamiltonian,
    NormDriftError,
    discrete_action,
    evolve,
    kinetic_energy,
    observe,
    potential_energy,
    step_reference,
    step_split,
    wfe_nonlinear_potential,
)
from .fractional import (
    FractionalOperator,
    OperatorKind,
    Side,
    antisymmetry_witness,
    build_fd,
    composition_refutation,
    euler_lagrange_dropout_check,
    fractional_integral_weights,
    moment_collapse_witness,
    transpose_identity_check,
)
from .grid import (
    Grid1D,
    GridSpecError,
    RealField,
    ResolutionError,
    TailMassError,
    fd_derivative,
    make_gaussian_density,
    make_gaussian_packet,
    spectral_derivative,
)
from .macrofield import (
    MacroFieldSolution,
    boundary_report,
    lagrangian_value,
    poisson_residual,
    quadratic_kernel_energy,
    solve_poisson_pair,
    solve_third_order,
)
from .observables import (
    WfeParams,
    com_dispersion,
    com_mean,
    marginal_com_density,
    natural_com_grid,
    wfe_direct,
    wfe_doubled,
    wfe_kernel,
)
from .scenarios import ScenarioResult, run_scenario, verify_suite
from .states import (
    ProductState,
    ProductSuperposition,
    WaveFunctionFull,
    inner_product,
    make_cat_state,
    make_product_cat,
    state_norm,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOLERANCES",
    "ConfigError",
    "EvolutionRecord",
    "FractionalOperator",
    "Grid1D",
    "GridSpecError",
    "Hamiltonian",
    "MacroFieldSolution",
    "NormDriftError",
    "OperatorKind",
    "ProductState",
    "ProductSuperposition",
    "RealField",
    "ResolutionError",
    "Scenario",
    "ScenarioConfig",
    "ScenarioResult",
    "Side",
    "TailMassError",
    "WaveFunctionFull",
    "WfeParams",
    "antisymmetry_witness",
    "boundary_report",
    "build_fd",
    "com_dispersion",
    "com_mean",
    "composition_refutation",
    "discrete_action",
    "euler_lagrange_dropout_check",
    "evolve",
    "fd_derivative",
    "fractional_integral_weights",
    "inner_product",
    "kinetic_energy",
    "lagrangian_value",
    "make_cat_state",
    "make_gaussian_density",
    "make_gaussian_packet",
    "make_product_cat",
    "marginal_com_density",
    "moment_collapse_witness",
    "natural_com_grid",
    "observe",
    "parse_config",
    "poisson_residual",
    "potential_energy",
    "quadratic_kernel_energy",
    "run_scenario",
    "solve_poisson_pair",
    "solve_third_order",
    "spectral_derivative",
    "state_norm",
    "step_reference",
    "step_split",
    "transpose_identity_check",
    "verify_suite",
    "wfe_direct",
    "wfe_doubled",
    "wfe_kernel",
    "wfe_nonlinear_potential",
]
