"""Noise covariance identification for linear time-varying state-space models.

Implements the generalised measurement difference method: residues built
with annihilation matrices (so unobservable states and unknown inputs are
handled), a structure-defining parametrisation of Q and R, and ordinary /
weighted least-squares estimation of the parameter vector.
"""

from .errors import (
    DataError,
    IndefiniteWeight,
    MdmError,
    NoAnnihilator,
    NotPositiveSemidefinite,
    RankDeficientDesign,
    ValidationError,
)
from .linalg import (
    DEFAULT_TOL,
    Tolerance,
    kron,
    kron_power,
    left_null_space,
    numerical_rank,
    pinv,
    replication_matrix,
    unification_matrix,
    unvec,
    vec,
)
from .model import (
    KNOWN_INPUT,
    NO_INPUT,
    UNKNOWN_INPUT,
    InitialCondition,
    LtvModel,
    MeasurementData,
    NoiseStructure,
    Trajectory,
    assemble_qr,
    defining_replication,
    simulate,
    validate,
)
from .residue import (
    AugmentedBlock,
    RegressionRow,
    ResidueBundle,
    build_augmented_block,
    regression_row,
    residue_known_input,
    residue_unknown_input,
    stack_measurements,
)
from .estimator import (
    Estimate,
    EtaCovariances,
    IdentifiabilityReport,
    StackedSystem,
    assemble_p,
    build_design,
    build_stacked_system,
    gaussian_eta_covariances,
    identifiability_report,
    min_feasible_window,
    ordinary_mdm,
    three_step_weighted_pipeline,
    weighted_mdm,
)
from .benchmarks import (
    BenchmarkSpec,
    McResult,
    PRESET_NAMES,
    emit_plot_data,
    emit_table,
    preset,
    run_mc,
)

__version__ = "0.1.0"
