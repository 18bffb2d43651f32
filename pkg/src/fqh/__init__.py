"""Fluctuating quantum heat of projective energy measurements.

Exact trajectory distributions, moments, skew-information bounds and Monte
Carlo sampling for the three coarse-graining levels of the measurement
record: eigenstate trajectories, degenerate-subspace (partially
coarse-grained) trajectories, and the bare energy outcome.
"""

from .errors import (
    BasisNotEigen,
    DimensionMismatch,
    EmptyDistribution,
    FqhError,
    IncompleteBasis,
    NoConvergence,
    NoDegenerateBlock,
    NonHermitian,
    NotPSD,
    ParseError,
    UnknownLabel,
    ValidationError,
)
from .linalg import (
    DensityState,
    EigenCluster,
    HermitianOperator,
    SpectralDecomposition,
    eigh,
    pinch,
    rank1_pinch,
    spectral_decomposition,
)
from .instruments import (
    PROB_FLOOR,
    KrausInstrument,
    OutcomeStatistics,
    apply,
    conditional_energy_change,
    projective_instrument,
    rank1_instrument,
    sequential,
)
from .heat import (
    LEVEL_EIGENSTATE,
    LEVEL_FULL,
    LEVEL_PARTIAL,
    FqhReport,
    HeatDistribution,
    HeatEntry,
    analyze,
    bloch_basis,
    distribution_for,
    eigenstate_distribution,
    full_cg_distribution,
    moments_enumerated,
    moments_trace_formula_eigenstate,
    moments_trace_formula_partial,
    partial_cg_distribution,
    skew_information,
    variance_identities,
)
from .sampling import SampleRun, chi_square_gof, chi_square_two_sample, sample, sample_sequential
from .problems import ProblemFile, load_problem, parse_problem, two_qubit_example

__version__ = "0.1.0"
