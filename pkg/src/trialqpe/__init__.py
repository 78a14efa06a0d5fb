"""Low-lying eigenvalues of ``-1/2 Laplacian + V`` on the unit cube by repeated quantum phase estimation.

The package discretizes the operator on a Dirichlet grid, builds the set of
sine-mode trial states, simulates QPE (analytically or through split-operator
statevector evolution) and runs the multi-level outcome selection.
"""

from .errors import TrialQPEError
from .grid_hamiltonian import assemble_hamiltonian, build_grid, sample_potential
from .level_finder import RunConfig, run_algorithm1, run_algorithm2, verify_conditions
from .qpe_engine import QpeConfig, exact_outcome_distribution, trotterized_qpe
from .trial_set import build_trial_set

__version__ = "0.1.0"

__all__ = [
    "TrialQPEError",
    "assemble_hamiltonian",
    "build_grid",
    "sample_potential",
    "RunConfig",
    "run_algorithm1",
    "run_algorithm2",
    "verify_conditions",
    "QpeConfig",
    "exact_outcome_distribution",
    "trotterized_qpe",
    "build_trial_set",
]
