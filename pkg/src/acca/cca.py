"""Two-view CCA in regression form, solved in closed form.

The problem is::

    min_{U, V, S}  ||U X - S||_F^2 + ||V Y - S||_F^2   s.t.  S S^T = I

whose solution takes the rows of ``S`` as the top eigenvectors of the sum
of the two row-space projectors, and ``U``, ``V`` as least-squares fits.
The ``update_*`` functions are also the block updates used by the ACCA
alternating loop, where ``Y`` is replaced by ``Y P``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ParameterError
from .linalg import DEFAULT_RANK_RTOL, as_matrix, pinv_gram, rowspace_projector, sym_eig

CENTER_TOL = 1e-8


@dataclass(frozen=True)
class DatasetPair:
    """Two views with samples in columns: ``X`` is (D_x, N), ``Y`` is (D_y, N)."""

    X: np.ndarray
    Y: np.ndarray
    centered: bool = True

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        Y = as_matrix(self.Y, "Y")
        if X.shape[1] != Y.shape[1]:
            raise ParameterError(
                f"views must share the sample count: X is {X.shape}, Y is {Y.shape}"
            )
        if X.shape[1] < 2:
            raise ParameterError("need at least 2 samples")
        n = X.shape[1]
        if self.centered:
            for name, M in (("X", X), ("Y", Y)):
                worst = float(np.max(np.abs(M.sum(axis=1)), initial=0.0))
                if worst > CENTER_TOL * n * max(1.0, float(np.max(np.abs(M)))):
                    raise ContractViolation(f"{name} is flagged centered but rows sum to {worst:.3e}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n_samples(self):
        return self.X.shape[1]

    @classmethod
    def from_raw(cls, X, Y):
        """Center both views and wrap them."""
        return cls(center_columns(X), center_columns(Y), centered=True)


@dataclass(frozen=True)
class CcaModel:
    U: np.ndarray
    V: np.ndarray
    S: np.ndarray

    @property
    def d(self):
        return self.S.shape[0]


def center_columns(X):
    """Subtract the mean sample (row means) from every column of ``X``."""
    X = as_matrix(X, "X")
    return X - X.mean(axis=1, keepdims=True)


def update_S(X, Y_aligned, d, rank_rtol=DEFAULT_RANK_RTOL):
    """Shared embedding: top-``d`` eigenvectors of ``Pi_X + Pi_Y`` as rows.

    ``Y_aligned`` is ``Y @ P`` inside ACCA, or plain ``Y`` for classical CCA.
    """
    X = as_matrix(X, "X")
    Y_aligned = as_matrix(Y_aligned, "Y_aligned")
    n = X.shape[1]
    if Y_aligned.shape[1] != n:
        raise ContractViolation(
            f"column mismatch: X is {X.shape}, Y_aligned is {Y_aligned.shape}"
        )
    if not 1 <= d <= n:
        raise ParameterError(f"d must satisfy 1 <= d <= N={n}, got {d}")
    M = rowspace_projector(X, rank_rtol) + rowspace_projector(Y_aligned, rank_rtol)
    return sym_eig(M).eigenvectors[:, :d].T.copy()


def update_U(X, S, rank_rtol=DEFAULT_RANK_RTOL):
    """Least-squares projection ``U = S X^T (X X^T)^+``."""
    X = as_matrix(X, "X")
    S = as_matrix(S, "S")
    if S.shape[1] != X.shape[1]:
        raise ContractViolation(f"column mismatch: X is {X.shape}, S is {S.shape}")
    return S @ X.T @ pinv_gram(X @ X.T, rank_rtol)


def update_V(Y, P, S, rank_rtol=DEFAULT_RANK_RTOL):
    """Least-squares projection for the aligned view, ``V = S (YP)^T (YP (YP)^T)^+``."""
    YP = as_matrix(Y, "Y") @ as_matrix(P, "P")
    return update_U(YP, S, rank_rtol)


def cca_objective(model, X, Y_aligned):
    """``||U X - S||_F^2 + ||V Y_aligned - S||_F^2``."""
    rx = model.U @ X - model.S
    ry = model.V @ Y_aligned - model.S
    return float(np.sum(rx * rx) + np.sum(ry * ry))


def classical_cca(data, d, rank_rtol=DEFAULT_RANK_RTOL):
    """Globally optimal CCA fit for aligned, centered views."""
    if not data.centered:
        raise ContractViolation("classical_cca expects centered views")
    S = update_S(data.X, data.Y, d, rank_rtol)
    U = update_U(data.X, S, rank_rtol)
    V = update_V(data.Y, np.eye(data.n_samples), S, rank_rtol)
    return CcaModel(U=U, V=V, S=S)
