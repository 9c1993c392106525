"""One-dimensional quantum Game of Life: exact and MPS evolution, classical baseline, statistics."""

__version__ = "0.1.0"

from .lattice import HamTerm, LatticeError, LatticeSpec, build_terms, is_active, neighbor_indices, sublattice_partition
from .trotter import EvolutionParams
from .observables import TrajectoryRecord, cluster_function, density, discretize, diversity, visibility
from .dense import BackendCapacityError, DenseState, dense_oracle_evolve, evolve_exact, init_dense
from .mps import MpsState, apply_and_compress, evolve_mps, init_mps, term_propagator_operator
from .classical import classical_evolve, classical_step, injectivity_scan
from .ensemble import EnsembleSpec, EnsembleSummary, equilibrium_estimate, run_ensemble, sample_initial_config, scaling_study

__all__ = [
    "BackendCapacityError",
    "DenseState",
    "EnsembleSpec",
    "EnsembleSummary",
    "EvolutionParams",
    "HamTerm",
    "LatticeError",
    "LatticeSpec",
    "MpsState",
    "TrajectoryRecord",
    "apply_and_compress",
    "build_terms",
    "classical_evolve",
    "classical_step",
    "cluster_function",
    "dense_oracle_evolve",
    "density",
    "discretize",
    "diversity",
    "equilibrium_estimate",
    "evolve_exact",
    "evolve_mps",
    "init_dense",
    "init_mps",
    "injectivity_scan",
    "is_active",
    "neighbor_indices",
    "run_ensemble",
    "sample_initial_config",
    "scaling_study",
    "sublattice_partition",
    "term_propagator_operator",
    "visibility",
]
