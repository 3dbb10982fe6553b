import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ewca import (
    DataMatrix,
    DegenerateSpectrumWarning,
    DimensionError,
    NotSymmetricError,
    RankDeficientError,
    StiefelBasis,
    pca,
    pf,
    principal_angles,
    projector_distance,
    qf,
    symmetric_eig,
    top_k_eigvecs,
)

from conftest import rng_for


class TestTopKEigvecs:
    def test_diagonal_matrix(self):
        basis = top_k_eigvecs(np.diag([3.0, 2.0, 1.0]), 2)
        np.testing.assert_allclose(basis.values, np.eye(3)[:, :2], atol=1e-14)

    def test_identity_degenerate(self):
        with pytest.warns(DegenerateSpectrumWarning):
            basis = top_k_eigvecs(np.eye(3), 1)
        # any unit vector is valid; only orthonormality and the residual count
        v = basis.values[:, 0]
        np.testing.assert_allclose(v @ v, 1.0)
        np.testing.assert_allclose(np.eye(3) @ v, v, atol=1e-12)

    def test_2x2_closed_form(self):
        # [[2,1],[1,2]] has eigenpairs (3, (1,1)/sqrt 2) and (1, (1,-1)/sqrt 2)
        basis = top_k_eigvecs(np.array([[2.0, 1.0], [1.0, 2.0]]), 1)
        np.testing.assert_allclose(basis.values[:, 0], [1 / np.sqrt(2)] * 2, atol=1e-14)

    def test_eigen_residual_invariant(self, rng):
        a = rng.standard_normal((6, 6))
        sym = (a + a.T) / 2
        eig = symmetric_eig(sym)
        scale = np.abs(eig.eigenvalues).max()
        for i in range(6):
            residual = sym @ eig.eigenvectors[:, i] - eig.eigenvalues[i] * eig.eigenvectors[:, i]
            assert np.abs(residual).max() <= 1e-8 * max(scale, 1.0)
        assert np.all(np.diff(eig.eigenvalues) <= 0)

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricError):
            top_k_eigvecs(np.array([[0.0, 1.0], [0.0, 0.0]]), 1)

    def test_deterministic_for_simple_spectrum(self, rng):
        a = rng.standard_normal((5, 5))
        sym = a @ a.T + np.diag(np.arange(5.0))
        first = top_k_eigvecs(sym, 2)
        second = top_k_eigvecs(sym.copy(), 2)
        assert np.array_equal(first.values, second.values)


class TestQfPf:
    def test_orthonormal_input_projector_preserved(self, rng):
        basis = np.linalg.qr(rng.standard_normal((5, 2)))[0]
        out = qf(basis)
        np.testing.assert_allclose(
            out.values @ out.values.T, basis @ basis.T, atol=1e-12
        )

    def test_right_multiplication_invariance(self, rng):
        basis = np.linalg.qr(rng.standard_normal((6, 3)))[0]
        mix = rng.standard_normal((3, 3)) + 4 * np.eye(3)
        left = qf(basis @ mix)
        right = qf(basis)
        np.testing.assert_allclose(
            left.values @ left.values.T, right.values @ right.values.T, atol=1e-10
        )

    def test_hand_gram_schmidt(self):
        q = qf(np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]))
        np.testing.assert_allclose(q.values, [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], atol=1e-14)

    def test_pf_of_orthonormal_is_itself(self, rng):
        basis = np.linalg.qr(rng.standard_normal((5, 2)))[0]
        np.testing.assert_allclose(pf(basis).values, basis, atol=1e-12)

    def test_pf_positive_scaling_invariance(self, rng):
        basis = np.linalg.qr(rng.standard_normal((4, 2)))[0]
        np.testing.assert_allclose(pf(2.0 * basis).values, basis, atol=1e-12)

    def test_rank_deficient_raises(self):
        with pytest.raises(RankDeficientError):
            qf(np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]))
        with pytest.raises(RankDeficientError):
            pf(np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_qf_pf_share_the_column_space(self, seed):
        rng = rng_for(seed)
        d, k = int(rng.integers(2, 8)), 1
        k = int(rng.integers(1, d))
        matrix = rng.standard_normal((d, k))
        assume(np.linalg.matrix_rank(matrix) == k)
        angles = principal_angles(qf(matrix), pf(matrix))
        assert angles.max() <= 1e-8


class TestPca:
    def test_two_point_line(self):
        basis, lam = pca(DataMatrix(np.array([[2.0, -2.0], [0.0, 0.0]])), 1)
        np.testing.assert_allclose(basis.values[:, 0], [1.0, 0.0], atol=1e-14)
        assert lam == pytest.approx(4.0)

    def test_isotropic_data(self, rng):
        # covariance c*I by construction: orthogonal columns of equal norm
        scale = 3.0
        x = np.linalg.qr(rng.standard_normal((5, 5)))[0] * scale
        with pytest.warns(DegenerateSpectrumWarning):
            basis, lam = pca(DataMatrix(x), 2, center_data=False)
        gram = basis.values.T @ basis.values
        np.testing.assert_allclose(gram, np.eye(2), atol=1e-12)
        assert lam == pytest.approx(scale**2 / 5)

    def test_single_direction_in_3d(self):
        coeffs = np.array([1.0, -2.0, 3.0, -2.0])
        x = np.outer([0.0, 0.0, 1.0], coeffs)
        basis, _ = pca(DataMatrix(x), 1, center_data=False)
        np.testing.assert_allclose(np.abs(basis.values[:, 0]), [0.0, 0.0, 1.0], atol=1e-12)

    def test_matches_covariance_eigendecomposition(self, rng):
        data = DataMatrix(rng.standard_normal((4, 30)))
        basis, lam = pca(data, 2)
        centered = data.values - data.values.mean(axis=1, keepdims=True)
        cov = centered @ centered.T / data.n
        oracle = top_k_eigvecs(cov, 2)
        assert principal_angles(basis, oracle).max() <= 1e-10
        assert lam == pytest.approx(np.linalg.eigvalsh(cov)[-1])


class TestPrincipalAngles:
    def test_identical_subspaces(self, rng):
        basis = qf(rng.standard_normal((5, 2)))
        np.testing.assert_allclose(principal_angles(basis, basis), 0.0, atol=1e-7)

    def test_orthogonal_lines(self):
        e1 = StiefelBasis(np.array([[1.0], [0.0]]))
        e2 = StiefelBasis(np.array([[0.0], [1.0]]))
        np.testing.assert_allclose(principal_angles(e1, e2), [np.pi / 2])

    def test_45_degrees(self):
        e1 = StiefelBasis(np.array([[1.0], [0.0]]))
        diag = StiefelBasis(np.array([[1.0], [1.0]]) / np.sqrt(2))
        np.testing.assert_allclose(principal_angles(e1, diag), [np.pi / 4], atol=1e-12)

    def test_dimension_mismatch(self):
        a = StiefelBasis(np.array([[1.0], [0.0]]))
        b = StiefelBasis(np.array([[1.0], [0.0], [0.0]]))
        with pytest.raises(DimensionError):
            principal_angles(a, b)

    def test_projector_distance_matches_dense(self, rng):
        a = qf(rng.standard_normal((6, 2)))
        b = qf(rng.standard_normal((6, 2)))
        dense = np.linalg.norm(a.projector() - b.projector(), "fro")
        assert projector_distance(a, b) == pytest.approx(dense, abs=1e-12)
