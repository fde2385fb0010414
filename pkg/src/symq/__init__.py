"""Discrete Husimi Q-functions of N-qubit states in the space of symmetric measurements."""

from .bitstring import BitString, dot_mod2, walsh_hadamard, weight, xor
from .combinat import MeasLattice, is_valid_triple, r_mnk, r_mnk_exact, representative
from .gaussian import (
    GaussianModel,
    LocalizationReport,
    MomentSummary,
    MultiGaussian,
    Peak,
    classify_localization,
    eigen3,
    find_peaks,
    gaussian_density,
    ghz_two_gaussian,
    moment_summary,
    t_matrix,
    w_fine_structure,
)
from .moments import (
    CumulantDiagnostic,
    MomentReport,
    approx_moment_gaussian,
    cumulant_diagnostic,
    deviation_table,
    exact_central_moment,
    exact_moment,
    spherical_check,
)
from .phase_space import (
    PhasePoint,
    QGrid,
    dcs_vector,
    fiducial_overlap,
    kernel_delta,
    p_symbol_collective,
    q_grid_bruteforce,
    q_symbol_exp_collective,
)
from .projection import (
    NotPermutationSymmetric,
    ProjectedQ,
    expectation_from_projection,
    project_bruteforce,
    project_symmetric,
)
from .states import (
    MixedEnsemble,
    StateSpec,
    StateVector,
    UnsupportedFamily,
    analytic_projected_q,
    build_state,
)

__version__ = "0.1.0"

__all__ = [
    "BitString", "weight", "xor", "dot_mod2", "walsh_hadamard",
    "MeasLattice", "is_valid_triple", "r_mnk", "r_mnk_exact", "representative",
    "PhasePoint", "QGrid", "fiducial_overlap", "dcs_vector", "q_grid_bruteforce",
    "kernel_delta", "q_symbol_exp_collective", "p_symbol_collective",
    "StateSpec", "StateVector", "MixedEnsemble", "UnsupportedFamily",
    "build_state", "analytic_projected_q",
    "ProjectedQ", "NotPermutationSymmetric", "project_symmetric",
    "project_bruteforce", "expectation_from_projection",
    "MomentSummary", "GaussianModel", "MultiGaussian", "Peak",
    "LocalizationReport", "moment_summary", "t_matrix", "eigen3",
    "gaussian_density", "ghz_two_gaussian", "w_fine_structure", "find_peaks",
    "classify_localization",
    "MomentReport", "CumulantDiagnostic", "exact_moment", "exact_central_moment",
    "approx_moment_gaussian", "deviation_table", "cumulant_diagnostic",
    "spherical_check",
    "__version__",
]
