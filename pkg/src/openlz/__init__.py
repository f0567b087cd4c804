"""Open spin-j Landau-Zener sweeps: collective Majorana model with a thermal
bath, transfer-efficiency experiments, and factorization checks."""

from .errors import (
    ConfigError,
    ContractViolationError,
    InvalidParameterError,
    OpenLZError,
    PropagationError,
    QuadratureError,
    ResourceLimitError,
)
from .spin import (
    QUBIT_CAP,
    SpinSet,
    build_spin,
    collective_operator,
    dicke_isometry,
    hermitian_eigensystem,
    rotation_y,
)
from .model import InstantaneousFrame, ModelParams, frame, gap, hamiltonian, mixing_angle
from .dissipator import (
    LindbladTerm,
    LindbladTerms,
    NoiseConfig,
    bose_occupation,
    jump_operators,
    lindblad_rhs,
    rates,
    with_rates,
)
from .integrator import (
    IntegratorConfig,
    PropagationReport,
    propagate_density,
    propagate_model_unitary,
    propagate_unitary,
)
from .experiments import (
    ResultRecord,
    SweepSpec,
    default_gamma_grid,
    read_csv,
    run_sweep,
    transfer_efficiency,
    write_csv,
)
from .factorization import (
    ClassicalNoiseReport,
    FactorizationReport,
    classical_noise_ensemble,
    dissipator_identity_gap,
    lindblad_factorization_residual,
    run_factorization,
    second_order_cross_term,
    unitary_factorization_check,
)

__version__ = "0.1.0"

__all__ = [
    "ClassicalNoiseReport",
    "ConfigError",
    "ContractViolationError",
    "FactorizationReport",
    "InstantaneousFrame",
    "IntegratorConfig",
    "InvalidParameterError",
    "LindbladTerm",
    "LindbladTerms",
    "ModelParams",
    "NoiseConfig",
    "OpenLZError",
    "PropagationError",
    "PropagationReport",
    "QUBIT_CAP",
    "QuadratureError",
    "ResourceLimitError",
    "ResultRecord",
    "SpinSet",
    "SweepSpec",
    "__version__",
    "bose_occupation",
    "build_spin",
    "classical_noise_ensemble",
    "collective_operator",
    "default_gamma_grid",
    "dicke_isometry",
    "dissipator_identity_gap",
    "frame",
    "gap",
    "hamiltonian",
    "hermitian_eigensystem",
    "jump_operators",
    "lindblad_factorization_residual",
    "lindblad_rhs",
    "mixing_angle",
    "propagate_density",
    "propagate_model_unitary",
    "propagate_unitary",
    "rates",
    "read_csv",
    "rotation_y",
    "run_factorization",
    "run_sweep",
    "second_order_cross_term",
    "transfer_efficiency",
    "unitary_factorization_check",
    "with_rates",
    "write_csv",
]
