"""Core data model: samples, bases, histograms, transport plans, solver configuration.

Samples are stored column-wise: a data matrix has shape (d, n) with one
column per sample. All types validate their invariants at construction and
are immutable afterwards (backing arrays are marked read-only), so instances
are safe to share across threads.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, NonFiniteError

TOL_ORTH = 1e-10
TOL_HISTOGRAM = 1e-12
TOL_MARGINAL = 1e-9


def _as_readonly_f64(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, order="C")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or infinite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DataMatrix:
    """Sample matrix X of shape (d, n): d features, one column per sample."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_readonly_f64(self.values, "data matrix")
        if arr.ndim != 2:
            raise DimensionError(f"data matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"data matrix must be non-empty, got shape {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class StiefelBasis:
    """Orthonormal basis U of shape (d, k) with k < d, i.e. U'U = I_k."""

    values: np.ndarray
    tol_orth: float = TOL_ORTH

    def __post_init__(self):
        arr = _as_readonly_f64(self.values, "basis")
        if arr.ndim != 2:
            raise DimensionError(f"basis must be 2-D, got shape {arr.shape}")
        d, k = arr.shape
        if not 1 <= k < d:
            raise DimensionError(f"basis needs 1 <= k < d, got d={d}, k={k}")
        gram = arr.T @ arr
        defect = np.linalg.norm(gram - np.eye(k), ord="fro")
        if defect > self.tol_orth:
            raise DimensionError(
                f"basis columns not orthonormal: ||U'U - I||_F = {defect:.3e} > {self.tol_orth:.1e}"
            )
        object.__setattr__(self, "values", arr)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def projector(self) -> np.ndarray:
        """Dense projector UU'. Only for small-d diagnostics and tests."""
        return self.values @ self.values.T


@dataclass(frozen=True)
class Histogram:
    """Nonnegative weight vector summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        arr = _as_readonly_f64(self.weights, "histogram")
        if arr.ndim != 1 or arr.size < 1:
            raise DimensionError(f"histogram must be a non-empty vector, got shape {arr.shape}")
        if np.any(arr < 0):
            raise ConfigError("histogram has negative entries")
        total = float(arr.sum())
        if abs(total - 1.0) > TOL_HISTOGRAM:
            raise ConfigError(f"histogram sums to {total!r}, expected 1 within {TOL_HISTOGRAM:.1e}")
        object.__setattr__(self, "weights", arr)

    @property
    def n(self) -> int:
        return self.weights.size


def uniform_histogram(n: int) -> Histogram:
    """Uniform weights (1/n, ..., 1/n), the default marginal everywhere."""
    if n < 1:
        raise ConfigError(f"histogram length must be positive, got {n}")
    return Histogram(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class TransportPlan:
    """Coupling with prescribed marginals.

    Entries are nonnegative; row sums match ``row_marginal`` and column sums
    match ``col_marginal`` up to ``tol_marginal`` (max absolute deviation).
    """

    values: np.ndarray
    row_marginal: Histogram
    col_marginal: Histogram
    tol_marginal: float = TOL_MARGINAL

    def __post_init__(self):
        arr = _as_readonly_f64(self.values, "transport plan")
        if arr.ndim != 2:
            raise DimensionError(f"plan must be 2-D, got shape {arr.shape}")
        if arr.shape != (self.row_marginal.n, self.col_marginal.n):
            raise DimensionError(
                f"plan shape {arr.shape} does not match marginals "
                f"({self.row_marginal.n}, {self.col_marginal.n})"
            )
        object.__setattr__(self, "values", arr)
        validate_transport_plan(self)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def marginal_error(self) -> float:
        """Max absolute row/column marginal violation."""
        row_err = np.abs(self.values.sum(axis=1) - self.row_marginal.weights).max()
        col_err = np.abs(self.values.sum(axis=0) - self.col_marginal.weights).max()
        return float(max(row_err, col_err))


def validate_transport_plan(plan: TransportPlan, tol: float | None = None) -> None:
    """Check TransportPlan invariants, raising ConfigError on violation.

    Exported so tests can re-check every plan a solver produces. ``tol``
    overrides the plan's own marginal tolerance.
    """
    if np.any(plan.values < 0):
        raise ConfigError("transport plan has negative entries")
    tol = plan.tol_marginal if tol is None else tol
    err = plan.marginal_error()
    if err > tol:
        raise ConfigError(f"transport plan marginal violation {err:.3e} > {tol:.1e}")


class LambdaMinStrategy(enum.Enum):
    """How to obtain the smallest eigenvalue of sym(plan) for the MM surrogate."""

    EXACT = "exact"
    GERSHGORIN_BOUND = "bound"


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings; every tolerance has an overridable default.

    epsilon = 0 is accepted and routes the fit to plain PCA (the entropic
    solvers themselves require epsilon > 0). ``lambda_min_strategy`` of None
    means automatic: exact eigenvalue for n <= 2000, Gershgorin bound (-1/n)
    above. ``log_domain`` of False still upgrades to log-domain Sinkhorn
    automatically when epsilon is small relative to the cost median; True
    forces it.
    """

    epsilon: float
    k: int
    sinkhorn_tol: float = 1e-9
    sinkhorn_max_iter: int = 10000
    outer_tol: float = 1e-7
    outer_max_iter: int = 100
    mm_inner_iter: int = 20
    center_data: bool = True
    lambda_min_strategy: LambdaMinStrategy | None = None
    log_domain: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        for name in ("sinkhorn_tol", "outer_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("sinkhorn_max_iter", "outer_max_iter", "mm_inner_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class FitResult:
    """Outcome of a fit: basis, plan, objective per outer iteration, metadata."""

    basis: StiefelBasis
    plan: TransportPlan
    objective_trace: np.ndarray
    iterations: int
    wall_time: float
    converged: bool = True

    def __post_init__(self):
        trace = _as_readonly_f64(self.objective_trace, "objective trace")
        object.__setattr__(self, "objective_trace", trace)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


def validate(data: DataMatrix | np.ndarray, config: SolverConfig) -> DataMatrix:
    """Check that (data, config) form an admissible solver input.

    Returns the data as a DataMatrix. Raises DimensionError when k >= d or
    n < 2, NonFiniteError on NaN/Inf entries, ConfigError on a non-positive
    epsilon (epsilon = 0 is only admitted via the PCA dispatch in the fit
    functions, not here).
    """
    if not isinstance(data, DataMatrix):
        data = DataMatrix(np.asarray(data))
    if config.epsilon <= 0:
        raise ConfigError(f"entropic solvers need epsilon > 0, got {config.epsilon}")
    if config.k >= data.d:
        raise DimensionError(f"k must satisfy k < d, got k={config.k}, d={data.d}")
    if data.n < 2:
        raise DimensionError(f"solvers need at least 2 samples, got n={data.n}")
    return data


def center(data: DataMatrix) -> DataMatrix:
    """Subtract the per-feature (row) mean so that X @ 1_n = 0."""
    row_means = data.values.mean(axis=1, keepdims=True)
    return DataMatrix(data.values - row_means)
