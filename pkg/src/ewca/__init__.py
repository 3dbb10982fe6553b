"""Entropic Wasserstein component analysis.

Linear dimension reduction that picks an orthonormal basis minimizing the
entropic optimal-transport cost between samples and their projections onto
the spanned subspace, interpolating between PCA (small regularization) and
the minimum-variance subspace (large regularization), with BCD and block-MM
solvers and a 1-NN evaluation harness.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateSpectrumWarning,
    DimensionError,
    EmptySetError,
    EwcaError,
    NonConvergenceWarning,
    NonFiniteError,
    NonNumericCellError,
    NotSymmetricError,
    NumericalUnderflowError,
    ParseError,
    RaggedRowsError,
    RankDeficientError,
    UnknownLabelColumnError,
)
from .types import (
    DataMatrix,
    FitResult,
    Histogram,
    LambdaMinStrategy,
    SolverConfig,
    StiefelBasis,
    TransportPlan,
    center,
    uniform_histogram,
    validate,
    validate_transport_plan,
)
from .sinkhorn import (
    CostMatrix,
    SinkhornState,
    entropic_ot_value,
    projection_cost,
    sinkhorn_knopp,
    squared_l2_cost,
)
from .subspace import (
    SymmetricEigenResult,
    pca,
    pf,
    principal_angles,
    projector_distance,
    qf,
    symmetric_eig,
    top_k_eigvecs,
)
from .solver import (
    MmContext,
    apply_p,
    build_m,
    build_mm_context,
    ewca_objective,
    fit_bcd,
    fit_mm,
    surrogate_value,
)
from .evaluation import (
    EvalReport,
    LabeledDataset,
    SplitSpec,
    TimingRecord,
    TimingRow,
    aggregate_timings,
    evaluate_embedding,
    ewca_fitter,
    make_synthetic_clusters,
    one_nn_error,
    pca_fitter,
    plan_class_mass,
    select_epsilon,
    split_indices,
    stratified_split,
    timing_sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
