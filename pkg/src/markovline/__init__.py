"""Expanding Markov maps of the real line that preserve Lebesgue measure:
construction, transfer-operator evolution, infinite-volume mixing
functionals, and orbit statistics."""

from .bumps import BUMPS, POLY3, Bump, get_bump
from .chain import (
    BandedKernel,
    ExactEvolution,
    FloatEvolution,
    StateVector,
    apply_to_function,
    check_symmetric_decreasing,
    evolve,
    is_aperiodic,
    is_doubly_stochastic,
    is_irreducible,
    make_kernel,
    row_support_straddles,
    step,
    transition_kernel,
)
from .errors import BudgetError, ConstructionError, DefinitionError, MarkovLineError
from .maps import (
    BranchPiece,
    FiniteModification,
    QuasiLift,
    RandomWalkMap,
    axiom_report,
    build_finite_modification,
    build_quasi_lift,
    build_random_walk_map,
    distortion_log_bound,
    evaluate_map,
    measure_preservation_report,
)
from .mixing import (
    MixingReport,
    ave_invariance_report,
    factorization_check,
    ggm_joint_sweep,
    ggm_window_value,
    glm_report,
    slicing_decomposition,
)
from .observables import (
    CellSequence,
    CellUnions,
    CenteredWindows,
    CesaroAveraged,
    ComposedWithMap,
    Constant,
    Heaviside,
    LinearCombination,
    Quasiperiodic,
    alternating_cells,
    ave_estimate,
    cell_integrals,
    cell_integrals_exact,
    cesaro_average,
    even_cell_indicator,
    window_average,
)
from .orbits import (
    Cylinder,
    Itinerary,
    cylinder,
    cylinder_derivative_ratio,
    escape_diagnostics,
    image_of_cylinder,
    image_overlap_measure,
    itinerary,
    markov_property_test,
)
from .partition import Partition, as_fraction
from .transfer import (
    CellwiseDensity,
    GridDensity,
    correlate,
    duality_residual,
    duality_residual_cellwise,
    exact_correlation,
    make_g_pi,
    pf_step_cellwise,
    pf_step_grid,
)

__version__ = "0.1.0"
