"""Spectral theory and mean field equations on finite quotients of the
p-adic Tate curve: exact character arithmetic, closed-form spectra and
Green's functions with numeric oracles, and Newton solvers for the
discrete mean field equation."""

from .padic import (
    QuotientPoint,
    QuotientSpace,
    diff_valuation,
    distance_valuation,
    enumerate_points,
    format_point,
    kernel_weight,
    parse_point,
)
from .characters import Character, Phase, eigenbasis, eval_character, inner_product
from .spectral import (
    LaplacianMatrix,
    LevelMatrices,
    SpectrumEntry,
    analytic_spectrum,
    build_laplacian,
    build_level_matrices,
    compare_spectra,
    jacobi_eigh,
    numeric_spectrum,
    spectral_gap,
)
from .green import (
    GreenReport,
    HeatReport,
    green_formula,
    green_numeric,
    heat_formula,
    heat_numeric,
    verify_green,
    verify_heat,
)
from .mfe import (
    MFEProblem,
    MFESolution,
    NewtonDivergenceError,
    OrbitPartition,
    Thresholds,
    apply_J,
    apply_sigma_k,
    convergence_study,
    orbit_partition,
    solve_full,
    solve_radial,
    thresholds,
    uniqueness_probe,
    validate_structure,
)

__version__ = "0.1.0"
