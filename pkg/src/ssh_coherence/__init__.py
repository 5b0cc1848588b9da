"""Ehrenfest ensembles of the SSH chain and the decoherence of superpositions.

Typical use::

    from ssh_coherence import ModelParams, SuperpositionSpec, RunSettings, run_ensemble

    params = ModelParams(nSites=20)
    spec = SuperpositionSpec("GroundExcited")
    result = run_ensemble(spec, params, RunSettings(tFinal=200), 500, masterSeed=7)
    metrics = extract_metrics(result)
"""

from .config import RunConfig, parse_config, serialize_config
from .dynamics import (
    Propagator,
    RunSettings,
    TrajectoryRecord,
    TrajectoryState,
    compute_polarization,
    derivative,
    level_populations,
    propagate_trajectory,
    rk8_step,
)
from .eigensolve import EigenDecomposition, eig_symmetric, eig_tridiagonal
from .ensemble import (
    DecoherenceMetrics,
    EnsembleResult,
    Preparation,
    extract_metrics,
    prepare,
    run_ensemble,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    InvalidInputError,
    NumericFailure,
    SingularityError,
    SSHError,
    TrajectoryError,
    UnstableGeometryError,
)
from .model import (
    HBAR,
    LatticeState,
    ModelParams,
    SingleParticleHamiltonian,
    build_hamiltonian,
    energy_gradient,
    site_density_matrix,
    total_energy,
)
from .phonons import NormalModeBasis, analyze, build_hessian, normal_modes
from .relax import (
    RelaxedGeometry,
    excited_occupation,
    ground_state_occupation,
    optimize_geometry,
)
from .superpos import OccupationMatrix, SuperpositionKind, SuperpositionSpec, build_superposition
from .wigner import SampledInitialCondition, sample_initial_condition

__version__ = "0.1.0"
