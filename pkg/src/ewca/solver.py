"""Entropic Wasserstein component analysis: BCD and block-MM solvers.

Both algorithms minimize, over an orthonormal basis U and a coupling plan
with uniform marginals,

    sum_ij ||x_i - U U' x_j||^2 pi_ij  -  eps * H(plan),

alternating a Sinkhorn plan update with a basis update. The BCD basis step
is exact: for a fixed plan the optimal U collects the top-k eigenvectors of

    M = X (2 sym(plan) - I/n) X',        sym(plan) = (plan + plan') / 2.

The block-MM basis step avoids the (d, d) eigendecomposition. The fixed-plan
subproblem is equivalent to minimizing tr(U' P U) for the negative
semidefinite matrix

    P = alpha (Sigma - 1_{alpha>0} lambda_max I) - 2 X (sym(plan) - lambda_min I) X',

where Sigma = (1/n) X X', lambda_max is its largest eigenvalue (known from
the PCA initialization), lambda_min is the smallest eigenvalue of sym(plan)
(or the Gershgorin lower bound -1/n), and alpha = 1 - 2 n lambda_min. Since
tr(U' P U) is concave it is majorized by its linearization, whose minimizer
over the Stiefel manifold is any orthonormalization of -P U; iterating

    U <- qf(-P U)

drives the surrogate down monotonically. P is only ever applied to (d, k)
blocks, working left to right on (n, k) intermediates.

Requesting epsilon = 0 bypasses the entropic machinery entirely and returns
the PCA basis with the diagonal coupling I/n, matching the eps -> 0 limit.
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    NonConvergenceWarning,
    NumericalUnderflowError,
    RankDeficientError,
)
from .sinkhorn import entropic_ot_value, projection_cost, sinkhorn_knopp
from .subspace import pca, qf, symmetric_eig
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
)

logger = logging.getLogger(__name__)

# above this sample count the automatic lambda_min strategy switches from the
# exact eigenvalue of sym(plan) to the Gershgorin bound -1/n
EXACT_LAMBDA_MIN_MAX_N = 2000


@dataclass(frozen=True)
class MmContext:
    """Quantities the MM basis step needs besides the data and the plan.

    With the Gershgorin strategy lambda_min_sym_plan is exactly -1/n, hence
    alpha = 3; with the exact strategy it is the smallest eigenvalue of
    sym(plan).
    """

    sigma_action: Callable[[np.ndarray], np.ndarray]
    lambda_max_sigma: float
    lambda_min_sym_plan: float
    alpha: float


def _check_plan_matches(data: DataMatrix, plan: TransportPlan) -> None:
    n = data.n
    if plan.values.shape != (n, n):
        raise DimensionError(
            f"plan shape {plan.values.shape} does not match sample count {n}"
        )
    uniform = 1.0 / n
    off = max(
        np.abs(plan.row_marginal.weights - uniform).max(),
        np.abs(plan.col_marginal.weights - uniform).max(),
    )
    if off > 1e-9:
        raise ConfigError("solver plans must have uniform 1/n marginals")


def build_m(data: DataMatrix, plan: TransportPlan) -> np.ndarray:
    """The BCD step matrix M = X (2 sym(plan) - I/n) X', symmetrized."""
    _check_plan_matches(data, plan)
    x = data.values
    n = data.n
    weights = plan.values + plan.values.T  # 2 sym(plan)
    weights = weights - np.eye(n) / n
    m = x @ (weights @ x.T)
    return (m + m.T) / 2.0


def build_mm_context(
    data: DataMatrix,
    plan: TransportPlan,
    lambda_max_sigma: float,
    strategy: LambdaMinStrategy | None = None,
) -> MmContext:
    """Assemble the MM surrogate context for the current plan.

    ``strategy`` of None applies the size-based default: exact smallest
    eigenvalue for n <= 2000, Gershgorin bound -1/n above.
    """
    _check_plan_matches(data, plan)
    n = data.n
    if strategy is None:
        strategy = (
            LambdaMinStrategy.EXACT
            if n <= EXACT_LAMBDA_MIN_MAX_N
            else LambdaMinStrategy.GERSHGORIN_BOUND
        )
    if strategy is LambdaMinStrategy.EXACT:
        sym = (plan.values + plan.values.T) / 2.0
        lambda_min = float(np.linalg.eigvalsh(sym)[0])
    else:
        lambda_min = -1.0 / n
    x = data.values

    def sigma_action(block: np.ndarray) -> np.ndarray:
        return x @ (x.T @ block) / n

    return MmContext(
        sigma_action=sigma_action,
        lambda_max_sigma=lambda_max_sigma,
        lambda_min_sym_plan=lambda_min,
        alpha=1.0 - 2.0 * n * lambda_min,
    )


def apply_p(
    context: MmContext,
    data: DataMatrix,
    plan: TransportPlan,
    u: StiefelBasis | np.ndarray,
) -> np.ndarray:
    """The product P @ U evaluated without forming any (d, d) matrix.

    Products with sym(plan) act on the (n, k) block X'U as
    (plan @ V + plan' @ V) / 2.
    """
    basis = u.values if isinstance(u, StiefelBasis) else np.asarray(u, dtype=np.float64)
    if basis.ndim != 2 or basis.shape[0] != data.d:
        raise DimensionError(
            f"basis shape {basis.shape} does not match data dimension {data.d}"
        )
    _check_plan_matches(data, plan)
    x = data.values
    pi = plan.values
    coeffs = x.T @ basis  # (n, k)
    first = context.sigma_action(basis)
    if context.alpha > 0:
        first = first - context.lambda_max_sigma * basis
    sym_coeffs = (pi @ coeffs + pi.T @ coeffs) / 2.0
    second = x @ (sym_coeffs - context.lambda_min_sym_plan * coeffs)
    return context.alpha * first - 2.0 * second


def surrogate_value(
    context: MmContext,
    data: DataMatrix,
    plan: TransportPlan,
    u: StiefelBasis | np.ndarray,
) -> float:
    """tr(U' P U), the quantity the MM inner loop drives down."""
    basis = u.values if isinstance(u, StiefelBasis) else np.asarray(u, dtype=np.float64)
    return float(np.sum(basis * apply_p(context, data, plan, u)))


def ewca_objective(
    data: DataMatrix,
    basis: StiefelBasis,
    plan: TransportPlan,
    epsilon: float,
) -> float:
    """Exact objective value at (basis, plan)."""
    cost = projection_cost(data, basis)
    return entropic_ot_value(plan, cost, plan.row_marginal, plan.col_marginal, epsilon)


def _pca_dispatch(data: DataMatrix, config: SolverConfig, started: float) -> FitResult:
    if config.k >= data.d:
        raise DimensionError(f"k must satisfy k < d, got k={config.k}, d={data.d}")
    x = center(data) if config.center_data else data
    basis, _ = pca(x, config.k, center_data=False)
    n = data.n
    uniform = uniform_histogram(n)
    plan = TransportPlan(np.eye(n) / n, uniform, uniform)
    objective = ewca_objective(x, basis, plan, 0.0)
    return FitResult(
        basis=basis,
        plan=plan,
        objective_trace=np.asarray([objective]),
        iterations=0,
        wall_time=time.perf_counter() - started,
        converged=True,
    )


def _fit(
    data: DataMatrix | np.ndarray,
    config: SolverConfig,
    u_step: Callable[..., StiefelBasis],
) -> FitResult:
    started = time.perf_counter()
    if not isinstance(data, DataMatrix):
        data = DataMatrix(np.asarray(data))
    if config.epsilon == 0:
        return _pca_dispatch(data, config, started)
    data = validate(data, config)
    x = center(data) if config.center_data else data
    n = x.n
    marginal = uniform_histogram(n)
    basis, lambda_max = pca(x, config.k, center_data=False)

    log_domain = True if config.log_domain else None
    sk_state = None
    plan = None
    trace: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, config.outer_max_iter + 1):
        cost = projection_cost(x, basis)
        try:
            plan, sk_state = sinkhorn_knopp(
                cost,
                marginal,
                marginal,
                config.epsilon,
                tol=config.sinkhorn_tol,
                max_iter=config.sinkhorn_max_iter,
                log_domain=log_domain,
                init=sk_state,
            )
        except NumericalUnderflowError:
            log_domain = True
            plan, sk_state = sinkhorn_knopp(
                cost,
                marginal,
                marginal,
                config.epsilon,
                tol=config.sinkhorn_tol,
                max_iter=config.sinkhorn_max_iter,
                log_domain=True,
            )
        objective = entropic_ot_value(plan, cost, marginal, marginal, config.epsilon)
        trace.append(objective)
        if len(trace) >= 2:
            prev, cur = trace[-2], trace[-1]
            if abs(cur - prev) <= config.outer_tol * max(abs(prev), 1e-16):
                converged = True
                break
        basis = u_step(x, plan, basis, lambda_max, config)

    if not converged:
        warnings.warn(
            f"outer loop hit the iteration cap {config.outer_max_iter} before "
            f"reaching outer_tol {config.outer_tol:.1e}",
            NonConvergenceWarning,
            stacklevel=3,
        )
    return FitResult(
        basis=basis,
        plan=plan,
        objective_trace=np.asarray(trace),
        iterations=iterations,
        wall_time=time.perf_counter() - started,
        converged=converged,
    )


def _bcd_u_step(
    x: DataMatrix,
    plan: TransportPlan,
    basis: StiefelBasis,
    lambda_max: float,
    config: SolverConfig,
) -> StiefelBasis:
    eig = symmetric_eig(build_m(x, plan))
    k = config.k
    if k < eig.eigenvalues.size and eig.eigenvalues[k - 1] - eig.eigenvalues[k] < 1e-10:
        # degenerate cut: the eigenbasis is arbitrary inside the tied block,
        # keep the previous iterate to avoid oscillation
        logger.info("eigengap at k=%d below 1e-10, keeping previous basis", k)
        return basis
    return StiefelBasis(eig.eigenvectors[:, :k])


def _mm_u_step(
    x: DataMatrix,
    plan: TransportPlan,
    basis: StiefelBasis,
    lambda_max: float,
    config: SolverConfig,
) -> StiefelBasis:
    context = build_mm_context(x, plan, lambda_max, config.lambda_min_strategy)
    rng = np.random.default_rng(0x5EED)
    current = basis
    for _ in range(config.mm_inner_iter):
        pu = apply_p(context, x, plan, current)
        try:
            current = qf(-pu)
        except RankDeficientError:
            # jitter and retry once; P U can only lose rank on degenerate data
            logger.warning("rank-deficient MM update, retrying with 1e-12 jitter")
            scale = max(float(np.abs(pu).max()), 1.0)
            current = qf(-pu + rng.standard_normal(pu.shape) * 1e-12 * scale)
    return current


def fit_bcd(data: DataMatrix | np.ndarray, config: SolverConfig) -> FitResult:
    """Fit with block coordinate descent (exact eigenvector basis updates)."""
    return _fit(data, config, _bcd_u_step)


def fit_mm(data: DataMatrix | np.ndarray, config: SolverConfig) -> FitResult:
    """Fit with block majorization-minimization (QR basis updates)."""
    return _fit(data, config, _mm_u_step)
