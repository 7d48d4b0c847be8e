"""Spectral fractional Laplacian on boxes: obstacle problems, Lewy-Stampacchia
checks, unidirectional fractional diffusion, and an extension cross-check."""

from .exceptions import (
    ConfigError,
    DomainMismatchError,
    EvolutionError,
    InvalidDomainError,
    PreconditionError,
    SolverError,
)
from .grid import (
    DomainSpec,
    EigenBasis,
    GridFunction,
    build_basis,
    from_spectral,
    gagliardo_seminorm,
    hs_norm,
    l2_inner,
    l2_norm,
    laplacian_matrix,
    lions_magenes_functional,
    to_spectral,
)
from .operator import FracOperator, x_norm
from .obstacle import (
    ObstacleProblem,
    SolverConfig,
    VISolution,
    check_equivalent_conditions,
    compare_solutions,
    positive_part_lemmas_check,
    solve_vi,
    solve_vi_active_set,
    solve_vi_psor,
    verify_lewy_stampacchia,
)
from .evolution import (
    EvolutionState,
    SampledSource,
    TimeGrid,
    asymptotic_limit,
    average_source,
    chain_rule_check,
    comparison_evolution,
    euler_step,
    evolve,
    interpolant_gap,
    stability_check,
    step_law_report,
    two_grid_gap,
)
from .extension import (
    ExtensionMesh,
    ExtensionSolution,
    extension_constant,
    solve_extension,
    verify_energy_identity,
    verify_trace_identity,
)

__version__ = "0.1.0"
