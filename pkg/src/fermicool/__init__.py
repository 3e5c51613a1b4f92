"""Finite-temperature Fermi-Dirac density matrices by positivity-preserving cooling.

The package integrates matrix cooling flows from infinite temperature
(beta = 0) down to a target inverse temperature, for grand canonical and
canonical ensembles in orthogonal or non-orthogonal bases, and validates the
results against exact eigendecomposition oracles.
"""

from .errors import (
    BracketError,
    DegenerateTraceError,
    DimensionMismatchError,
    FermicoolError,
    InfeasibleEnsembleError,
    MatrixParseError,
    MuConvergenceError,
    NotPositiveDefiniteError,
    ScfConvergenceError,
    SolverAbortError,
)
from .matcore import (
    EigenPair,
    HermitianMatrix,
    MuSearchResult,
    OverlapMatrix,
    aitken_accelerate,
    fermi,
    find_mu_for_occupation,
    generalized_eigh,
    matrix_function,
    maxabs_asymmetry,
    occupation,
    symmetrize,
)
from .matio import read_matrix, write_matrix
from .models import (
    Canonical,
    Ensemble,
    GrandCanonical,
    HamiltonianModel,
    ScfResult,
    SystemSpec,
    build_huckel,
    canonical_normalization,
    check_canonical_feasible,
    default_chemical_potential,
    effective_hamiltonian,
    exact_canonical_fd,
    exact_grand_fd,
    exact_gibbs,
    load_system,
    occupation_spectrum,
    scf_fixed_point,
)
from .solvers import (
    CanonicalWorkspace,
    KrausStepOperators,
    SolverConfig,
    Trajectory,
    TrajectoryDiagnostics,
    bloch_rhs,
    canonical_rhs,
    commutator_defect,
    cool,
    grand_rhs,
    mu_rhs,
    step_kraus1,
    step_kraus2,
    step_rk4,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "Canonical",
    "CanonicalWorkspace",
    "DegenerateTraceError",
    "DimensionMismatchError",
    "EigenPair",
    "Ensemble",
    "FermicoolError",
    "GrandCanonical",
    "HamiltonianModel",
    "HermitianMatrix",
    "InfeasibleEnsembleError",
    "KrausStepOperators",
    "MatrixParseError",
    "MuConvergenceError",
    "MuSearchResult",
    "NotPositiveDefiniteError",
    "OverlapMatrix",
    "ScfConvergenceError",
    "ScfResult",
    "SolverAbortError",
    "SolverConfig",
    "SystemSpec",
    "Trajectory",
    "TrajectoryDiagnostics",
    "aitken_accelerate",
    "bloch_rhs",
    "build_huckel",
    "canonical_normalization",
    "canonical_rhs",
    "check_canonical_feasible",
    "commutator_defect",
    "cool",
    "default_chemical_potential",
    "effective_hamiltonian",
    "exact_canonical_fd",
    "exact_grand_fd",
    "exact_gibbs",
    "fermi",
    "find_mu_for_occupation",
    "generalized_eigh",
    "grand_rhs",
    "load_system",
    "matrix_function",
    "maxabs_asymmetry",
    "mu_rhs",
    "occupation",
    "occupation_spectrum",
    "read_matrix",
    "scf_fixed_point",
    "step_kraus1",
    "step_kraus2",
    "step_rk4",
    "symmetrize",
    "write_matrix",
]
