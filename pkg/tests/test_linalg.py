import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from acca.errors import ContractViolation
from acca.linalg import pinv_gram, rowspace_projector, sym_eig


class TestPinvGram:
    def test_identity(self):
        np.testing.assert_array_equal(pinv_gram(np.eye(3)), np.eye(3))

    def test_singular_diagonal(self):
        np.testing.assert_allclose(pinv_gram(np.diag([2.0, 0.0]), 1e-12), np.diag([0.5, 0.0]))

    def test_rank_two_projector_identity(self, rng):
        # X has rank 2 with 15 rows, so X X^T is singular
        X = rng.standard_normal((15, 2)) @ rng.standard_normal((2, 20))
        G = X @ X.T
        Gp, rank = pinv_gram(G, return_rank=True)
        assert rank == 2
        np.testing.assert_allclose(X @ (X.T @ Gp @ X), X, atol=1e-8 * np.abs(X).max())

    def test_penrose_condition(self, rng):
        A = rng.standard_normal((6, 3))
        G = A @ A.T
        Gp = pinv_gram(G)
        np.testing.assert_allclose(G @ Gp @ G, G, atol=1e-8 * np.linalg.norm(G))
        np.testing.assert_allclose(Gp, Gp.T)

    def test_double_inverse(self, rng):
        A = rng.standard_normal((5, 5))
        G = A @ A.T
        back = pinv_gram(pinv_gram(G))
        assert np.linalg.norm(back - G) <= 1e-6 * np.linalg.norm(G)

    def test_zero_matrix_flags_rank_zero(self):
        Gp, rank = pinv_gram(np.zeros((3, 3)), return_rank=True)
        assert rank == 0
        np.testing.assert_array_equal(Gp, np.zeros((3, 3)))

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractViolation):
            pinv_gram(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ContractViolation):
            pinv_gram(np.ones((2, 3)))


class TestSymEig:
    def test_diagonal_ordering(self):
        res = sym_eig(np.diag([1.0, 3.0, 2.0]))
        np.testing.assert_allclose(res.eigenvalues, [3.0, 2.0, 1.0])
        np.testing.assert_allclose(res.eigenvectors, np.eye(3)[:, [1, 2, 0]])

    def test_degenerate_identity(self):
        res = sym_eig(np.eye(2))
        np.testing.assert_allclose(res.eigenvalues, [1.0, 1.0])
        np.testing.assert_allclose(res.eigenvectors, np.eye(2))

    def test_reconstruction(self, rng):
        B = rng.standard_normal((5, 5))
        A = B + B.T
        w, V = sym_eig(A)
        np.testing.assert_allclose(V @ np.diag(w) @ V.T, A, atol=1e-8 * max(1, np.linalg.norm(A)))

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractViolation):
            sym_eig(np.array([[0.0, 1.0], [0.5, 0.0]]))

    def test_bitwise_deterministic(self, rng):
        B = rng.standard_normal((7, 7))
        A = B @ B.T
        r1, r2 = sym_eig(A), sym_eig(A.copy())
        assert np.array_equal(r1.eigenvalues, r2.eigenvalues)
        assert np.array_equal(r1.eigenvectors, r2.eigenvectors)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)))
    def test_invariants(self, B):
        A = B + B.T
        w, V = sym_eig(A)
        assert np.all(np.diff(w) <= 1e-12)
        np.testing.assert_allclose(np.linalg.norm(V, axis=0), 1.0, atol=1e-12)
        idx = np.argmax(np.abs(V), axis=0)
        assert np.all(V[idx, np.arange(6)] > 0)
        assert np.linalg.norm(A - V @ np.diag(w) @ V.T) <= 1e-8 * max(1.0, np.linalg.norm(A))


class TestRowspaceProjector:
    def test_full_rank_square(self):
        np.testing.assert_allclose(rowspace_projector(np.eye(2)), np.eye(2))

    def test_single_row(self):
        X = np.array([[1.0, 1.0]]) / np.sqrt(2)
        np.testing.assert_allclose(rowspace_projector(X), [[0.5, 0.5], [0.5, 0.5]])

    def test_row_space_invariance(self, rng):
        X = rng.standard_normal((4, 12))
        A = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        n = X.shape[1]
        diff = rowspace_projector(A @ X) - rowspace_projector(X)
        assert np.linalg.norm(diff) <= 1e-6 * n

    def test_projector_properties_rank_deficient(self, rng):
        X = rng.standard_normal((15, 2)) @ rng.standard_normal((2, 20))
        Pi = rowspace_projector(X)
        np.testing.assert_allclose(Pi, Pi.T, atol=1e-12)
        np.testing.assert_allclose(Pi @ Pi, Pi, atol=1e-8)
        w = np.linalg.eigvalsh(Pi)
        assert np.all(np.minimum(np.abs(w), np.abs(w - 1)) <= 1e-6)
        assert round(w.sum()) == 2

    def test_zero_input(self):
        Pi, rank = rowspace_projector(np.zeros((3, 4)), return_rank=True)
        assert rank == 0
        np.testing.assert_array_equal(Pi, np.zeros((4, 4)))
