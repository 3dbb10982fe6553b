"""Entropic optimal transport via Sinkhorn-Knopp matrix scaling.

Solves min_plan <C, plan> - eps * H(plan) over couplings with prescribed
marginals (a, b), where H(plan) = -sum_ij log(pi_ij / (a_i b_j)) pi_ij is
the entropy relative to the product measure (H <= 0, with H = 0 exactly at
the product coupling a b').

Two equivalent iteration modes are provided:

* standard domain: scalings u, v on the Gibbs kernel K = exp(-C/eps), with
  updates u <- a / (K v), v <- b / (K' u) and plan = diag(u) K diag(v);
* log domain: the same updates on log u, log v through log-sum-exp, immune
  to the kernel underflow that kills the standard mode at small eps.

The log-domain mode is selected automatically when eps is small relative to
the median cost; the standard mode raises NumericalUnderflowError instead of
silently dividing by zero so callers can retry in log domain.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    NonConvergenceWarning,
    NonFiniteError,
    NumericalUnderflowError,
)
from .types import DataMatrix, Histogram, StiefelBasis, TransportPlan

# eps below this multiple of the median cost triggers log-domain iterations
LOG_DOMAIN_EPS_FACTOR = 1e-3
# cost range over eps beyond which exp(-C/eps) hits exact float64 zeros, so
# the automatic mode goes to log domain as well
LOG_DOMAIN_EXPONENT_LIMIT = 680.0
# standard-domain stall window: stop if the marginal error improves by less
# than 1% over this many iterations (precision floor reached)
STALL_WINDOW = 200


@dataclass(frozen=True)
class CostMatrix:
    """Nonnegative pairwise cost matrix of shape (n, m)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise DimensionError(f"cost matrix must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("cost matrix contains NaN or infinite entries")
        if np.any(arr < 0):
            raise ConfigError("cost matrix has negative entries")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class SinkhornState:
    """Final scalings and diagnostics of a Sinkhorn run.

    The scalings are stored as logarithms (always finite); ``u`` and ``v``
    recover the standard-domain vectors. ``error_trace`` holds the max
    marginal violation after each full (u, v) sweep.
    """

    log_u: np.ndarray
    log_v: np.ndarray
    iterations: int
    marginal_error: float
    converged: bool
    error_trace: np.ndarray

    @property
    def u(self) -> np.ndarray:
        return np.exp(self.log_u)

    @property
    def v(self) -> np.ndarray:
        return np.exp(self.log_v)


def squared_l2_cost(x_set: DataMatrix, y_set: DataMatrix) -> CostMatrix:
    """Pairwise squared Euclidean costs C_ij = ||x_i - y_j||^2.

    Computed via the expanded inner-product form; tiny negatives from
    cancellation are clamped to zero.
    """
    if x_set.d != y_set.d:
        raise DimensionError(
            f"point sets live in different dimensions: {x_set.d} vs {y_set.d}"
        )
    x = x_set.values
    y = y_set.values
    sq_x = np.einsum("ij,ij->j", x, x)
    sq_y = np.einsum("ij,ij->j", y, y)
    cross = x.T @ y
    cost = sq_x[:, None] + sq_y[None, :] - 2.0 * cross
    return CostMatrix(np.maximum(cost, 0.0))


def projection_cost(data: DataMatrix, basis: StiefelBasis) -> CostMatrix:
    """Costs C_ij = ||x_i - U U' x_j||^2 between samples and projections.

    Works on (k, n) intermediates only; the (d, d) projector is never formed.
    """
    if data.d != basis.d:
        raise DimensionError(
            f"data dimension {data.d} does not match basis dimension {basis.d}"
        )
    x = data.values
    coeffs = basis.values.T @ x  # (k, n), coordinates of projections
    sq_x = np.einsum("ij,ij->j", x, x)
    sq_proj = np.einsum("ij,ij->j", coeffs, coeffs)  # ||UU'x_j||^2 = ||U'x_j||^2
    cross = (x.T @ basis.values) @ coeffs  # x_i' U U' x_j
    cost = sq_x[:, None] + sq_proj[None, :] - 2.0 * cross
    return CostMatrix(np.maximum(cost, 0.0))


def _logsumexp(arr: np.ndarray, axis: int) -> np.ndarray:
    peak = arr.max(axis=axis, keepdims=True)
    out = np.log(np.exp(arr - peak).sum(axis=axis)) + np.squeeze(peak, axis=axis)
    return out


def _check_inputs(cost: CostMatrix, a: Histogram, b: Histogram, epsilon: float,
                  tol: float, max_iter: int) -> None:
    n, m = cost.shape
    if a.n != n or b.n != m:
        raise DimensionError(
            f"histogram lengths ({a.n}, {b.n}) do not match cost shape {cost.shape}"
        )
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    if tol <= 0:
        raise ConfigError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {max_iter}")
    if np.any(a.weights == 0) or np.any(b.weights == 0):
        raise ConfigError("histograms with zero entries are not supported")


def sinkhorn_knopp(
    cost: CostMatrix,
    a: Histogram,
    b: Histogram,
    epsilon: float,
    tol: float = 1e-9,
    max_iter: int = 10000,
    log_domain: bool | None = None,
    init: SinkhornState | None = None,
) -> tuple[TransportPlan, SinkhornState]:
    """Solve entropic OT between histograms a, b for the given cost matrix.

    Iterates until the max absolute marginal violation drops below ``tol``.
    ``log_domain`` of None picks the mode automatically (log domain when
    epsilon < 1e-3 * median cost); True forces log domain, False forces the
    standard domain, which raises NumericalUnderflowError if the kernel
    degenerates. ``init`` warm-starts from a previous state's scalings.

    Returns the plan and the final state. If ``max_iter`` is reached first, a
    NonConvergenceWarning is issued and the best iterate is returned with
    ``state.converged`` False.
    """
    _check_inputs(cost, a, b, epsilon, tol, max_iter)
    if log_domain is None:
        values = cost.values
        log_domain = (
            epsilon < LOG_DOMAIN_EPS_FACTOR * float(np.median(values))
            or float(values.max() - values.min()) / epsilon > LOG_DOMAIN_EXPONENT_LIMIT
        )
    if log_domain:
        plan_values, state = _sinkhorn_log(cost, a, b, epsilon, tol, max_iter, init)
    else:
        plan_values, state = _sinkhorn_standard(cost, a, b, epsilon, tol, max_iter, init)
    plan = TransportPlan(
        plan_values, a, b, tol_marginal=max(tol, state.marginal_error * (1 + 1e-9))
    )
    return plan, state


def _marginal_error(plan: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    row = np.abs(plan.sum(axis=1) - a).max()
    col = np.abs(plan.sum(axis=0) - b).max()
    return float(max(row, col))


def _warn_nonconvergence(iterations: int, err: float, tol: float) -> None:
    warnings.warn(
        f"Sinkhorn did not reach tol {tol:.1e} in {iterations} iterations "
        f"(marginal error {err:.3e}); returning best iterate",
        NonConvergenceWarning,
        stacklevel=3,
    )


def _sinkhorn_standard(cost, a, b, epsilon, tol, max_iter, init):
    aw, bw = a.weights, b.weights
    kernel = np.exp(-cost.values / epsilon)
    if init is not None:
        # scalings from a log-domain run can overflow exp; clip, any positive
        # init is admissible
        u = np.exp(np.clip(init.log_u, -700, 700))
        v = np.exp(np.clip(init.log_v, -700, 700))
    else:
        u = np.ones_like(aw)
        v = np.ones_like(bw)

    kv = kernel @ v
    errors = []
    converged = False
    it = 0
    best_err = np.inf
    last_improvement = 0
    for it in range(1, max_iter + 1):
        if np.any(kv == 0) or not np.all(np.isfinite(kv)):
            raise NumericalUnderflowError(
                "Gibbs kernel underflowed in standard-domain Sinkhorn; "
                "retry with log_domain=True"
            )
        u = aw / kv
        ktu = kernel.T @ u
        if np.any(ktu == 0) or not np.all(np.isfinite(ktu)):
            raise NumericalUnderflowError(
                "Gibbs kernel underflowed in standard-domain Sinkhorn; "
                "retry with log_domain=True"
            )
        v = bw / ktu
        kv = kernel @ v  # reused by the error check and the next u-update
        # columns are exact after the v-update; rows carry the residual
        err = float(np.abs(u * kv - aw).max())
        errors.append(err)
        if err <= tol:
            converged = True
            break
        if err < 0.99 * best_err:
            best_err = err
            last_improvement = it
        elif it - last_improvement >= STALL_WINDOW:
            break  # precision floor: no meaningful progress in a long while

    plan = (u[:, None] * kernel) * v[None, :]
    err = _marginal_error(plan, aw, bw)
    if not converged:
        _warn_nonconvergence(it, err, tol)
    with np.errstate(divide="ignore"):
        state = SinkhornState(
            log_u=np.log(u),
            log_v=np.log(v),
            iterations=it,
            marginal_error=err,
            converged=converged,
            error_trace=np.asarray(errors),
        )
    return plan, state


def _sinkhorn_log(cost, a, b, epsilon, tol, max_iter, init):
    aw, bw = a.weights, b.weights
    log_a, log_b = np.log(aw), np.log(bw)
    log_kernel = -cost.values / epsilon
    if init is not None:
        log_u = init.log_u.copy()
        log_v = init.log_v.copy()
    else:
        log_u = np.zeros_like(aw)
        log_v = np.zeros_like(bw)

    lse_rows = _logsumexp(log_kernel + log_v[None, :], axis=1)
    errors = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        log_u = log_a - lse_rows
        log_v = log_b - _logsumexp(log_kernel + log_u[:, None], axis=0)
        lse_rows = _logsumexp(log_kernel + log_v[None, :], axis=1)
        err = float(np.abs(np.exp(log_u + lse_rows) - aw).max())
        errors.append(err)
        if err <= tol:
            converged = True
            break

    plan = np.exp(log_u[:, None] + log_kernel + log_v[None, :])
    err = _marginal_error(plan, aw, bw)
    if not converged:
        _warn_nonconvergence(it, err, tol)
    state = SinkhornState(
        log_u=log_u,
        log_v=log_v,
        iterations=it,
        marginal_error=err,
        converged=converged,
        error_trace=np.asarray(errors),
    )
    return plan, state


def entropic_ot_value(
    plan: TransportPlan,
    cost: CostMatrix,
    a: Histogram,
    b: Histogram,
    epsilon: float,
) -> float:
    """Objective <C, plan> - eps * H(plan) with the 0 log 0 = 0 convention."""
    if plan.values.shape != cost.shape:
        raise DimensionError(
            f"plan shape {plan.values.shape} does not match cost shape {cost.shape}"
        )
    pi = plan.values
    transport = float((pi * cost.values).sum())
    if epsilon == 0:
        return transport
    support = pi > 0
    ref = a.weights[:, None] * b.weights[None, :]
    entropy = -float((pi[support] * np.log(pi[support] / ref[support])).sum())
    return transport - epsilon * entropy
