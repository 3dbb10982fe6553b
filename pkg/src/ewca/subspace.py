"""Eigen and orthonormalization primitives shared by PCA and the two solvers.

Orthonormal bases are only determined up to a right action of the orthogonal
group, so every routine applies the same sign convention for determinism:
each column is scaled so that its largest-magnitude entry is positive, ties
broken by lowest index. Degenerate spectra (eigengap below EIGENGAP_TOL at
the cut) are flagged with DegenerateSpectrumWarning; callers comparing such
bases must compare projectors, not columns.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSpectrumWarning,
    DimensionError,
    NotSymmetricError,
    RankDeficientError,
)
from .types import DataMatrix, StiefelBasis, center

SYMMETRY_TOL = 1e-10
EIGENGAP_TOL = 1e-10
RANK_TOL = 1e-12


@dataclass(frozen=True)
class SymmetricEigenResult:
    """Eigenvalues in descending order with aligned orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _fix_column_signs(matrix: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude entry positive (first on ties)."""
    out = matrix.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = int(np.argmax(np.abs(col)))
        if col[idx] < 0:
            out[:, j] = -col
    return out


def _require_symmetric(matrix: np.ndarray) -> np.ndarray:
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    scale = max(1.0, float(np.abs(arr).max()))
    defect = float(np.abs(arr - arr.T).max())
    if defect > SYMMETRY_TOL * scale:
        raise NotSymmetricError(
            f"matrix asymmetry {defect:.3e} exceeds tolerance {SYMMETRY_TOL * scale:.1e}"
        )
    return arr


def symmetric_eig(matrix: np.ndarray) -> SymmetricEigenResult:
    """Full eigendecomposition of a symmetric matrix, descending eigenvalues."""
    arr = _require_symmetric(matrix)
    vals, vecs = np.linalg.eigh((arr + arr.T) / 2.0)
    order = np.argsort(vals)[::-1]
    return SymmetricEigenResult(
        eigenvalues=vals[order], eigenvectors=_fix_column_signs(vecs[:, order])
    )


def _warn_if_degenerate(eigenvalues: np.ndarray, k: int) -> None:
    if k < eigenvalues.size:
        gap = float(eigenvalues[k - 1] - eigenvalues[k])
        if gap < EIGENGAP_TOL:
            warnings.warn(
                f"eigengap at position {k} is {gap:.3e}; basis determined only "
                "up to rotation, compare projectors",
                DegenerateSpectrumWarning,
                stacklevel=3,
            )


def top_k_eigvecs(matrix: np.ndarray, k: int) -> StiefelBasis:
    """Eigenvectors of the k largest eigenvalues of a symmetric matrix."""
    eig = symmetric_eig(matrix)
    d = eig.eigenvectors.shape[0]
    if not 1 <= k < d:
        raise DimensionError(f"need 1 <= k < d, got k={k}, d={d}")
    _warn_if_degenerate(eig.eigenvalues, k)
    return StiefelBasis(eig.eigenvectors[:, :k])


def qf(matrix: np.ndarray) -> StiefelBasis:
    """Orthonormal Q factor of the thin QR decomposition.

    The R diagonal is made nonnegative so the result is deterministic.
    Raises RankDeficientError when the columns are not independent.
    """
    arr = np.asarray(matrix, dtype=np.float64)
    q, r = np.linalg.qr(arr)
    diag = np.diagonal(r)
    if np.abs(diag).min() <= RANK_TOL * max(1.0, float(np.abs(diag).max())):
        raise RankDeficientError(
            f"matrix of shape {arr.shape} is rank deficient (|R_ii| min "
            f"{np.abs(diag).min():.3e})"
        )
    signs = np.where(diag < 0, -1.0, 1.0)
    return StiefelBasis(q * signs[None, :])


def pf(matrix: np.ndarray) -> StiefelBasis:
    """Orthonormal factor of the polar decomposition, via thin SVD."""
    arr = np.asarray(matrix, dtype=np.float64)
    w, s, zt = np.linalg.svd(arr, full_matrices=False)
    if s.min() <= RANK_TOL * max(1.0, float(s.max())):
        raise RankDeficientError(
            f"matrix of shape {arr.shape} is rank deficient (sigma_min {s.min():.3e})"
        )
    return StiefelBasis(w @ zt)


def pca(data: DataMatrix, k: int, center_data: bool = True) -> tuple[StiefelBasis, float]:
    """Top-k eigenvectors of the covariance (1/n) X X' and its largest eigenvalue.

    Computed through the thin SVD of X, which is equivalent and avoids the
    (d, d) covariance when n < d. Falls back to the dense eigendecomposition
    when k exceeds the number of singular vectors.
    """
    if not 1 <= k < data.d:
        raise DimensionError(f"need 1 <= k < d, got k={k}, d={data.d}")
    x = center(data).values if center_data else data.values
    n = data.n
    if k <= min(data.d, n):
        left, sing, _ = np.linalg.svd(x, full_matrices=False)
        eigenvalues = sing**2 / n
        _warn_if_degenerate(np.concatenate([eigenvalues, [0.0]])[: data.d], k)
        basis = StiefelBasis(_fix_column_signs(left[:, :k]))
        return basis, float(eigenvalues[0])
    eig = symmetric_eig(x @ x.T / n)
    _warn_if_degenerate(eig.eigenvalues, k)
    return StiefelBasis(eig.eigenvectors[:, :k]), float(eig.eigenvalues[0])


def principal_angles(a: StiefelBasis, b: StiefelBasis) -> np.ndarray:
    """Canonical angles between span(a) and span(b), ascending, in [0, pi/2].

    Angles below 45 degrees come from the sine-based formula, which stays
    accurate where arccos of a near-one cosine loses half the digits.
    """
    if a.d != b.d or a.k != b.k:
        raise DimensionError(
            f"bases have mismatched shapes ({a.d}, {a.k}) vs ({b.d}, {b.k})"
        )
    cross = a.values.T @ b.values
    cosines = np.linalg.svd(cross, compute_uv=False)  # descending
    residual = b.values - a.values @ cross  # (I - AA')B
    sines = np.linalg.svd(residual, compute_uv=False)[::-1]  # ascending
    from_cos = np.arccos(np.clip(cosines, 0.0, 1.0))
    from_sin = np.arcsin(np.clip(sines, 0.0, 1.0))
    return np.sort(np.where(cosines**2 > 0.5, from_sin, from_cos))


def projector_distance(a: StiefelBasis, b: StiefelBasis) -> float:
    """Frobenius distance ||AA' - BB'||_F without forming the projectors."""
    if a.d != b.d or a.k != b.k:
        raise DimensionError(
            f"bases have mismatched shapes ({a.d}, {a.k}) vs ({b.d}, {b.k})"
        )
    cross = float(np.linalg.norm(a.values.T @ b.values, "fro") ** 2)
    return float(np.sqrt(max(2.0 * a.k - 2.0 * cross, 0.0)))
