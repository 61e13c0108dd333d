"""Dense linear-algebra kernels with fixed numerical conventions.

Everything downstream goes through these three functions so that the
ordering and sign of eigenvectors, and the treatment of rank-deficient
Gram matrices, are decided in exactly one place.
"""

from typing import NamedTuple

import numpy as np

from .errors import ContractViolation

DEFAULT_RANK_RTOL = 1e-10
SYMMETRY_RTOL = 1e-10


class EigenResult(NamedTuple):
    """Eigenpairs sorted by descending eigenvalue.

    ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(A, name="matrix"):
    """Return ``A`` as a finite 2-D float64 array, or raise."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ContractViolation(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    return A


def _check_symmetric(A, name):
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    asym = float(np.max(np.abs(A - A.T), initial=0.0))
    if asym > SYMMETRY_RTOL * scale:
        raise ContractViolation(
            f"{name} is not symmetric (max |A - A^T| = {asym:.3e})"
        )
    return 0.5 * (A + A.T)


def _fix_signs(vectors):
    # largest-magnitude entry of each column made positive; argmax picks
    # the lowest index on exact ties
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(A):
    """Eigendecomposition of a symmetric matrix with deterministic output.

    Eigenvalues are sorted in descending order, ties keeping the order
    returned by LAPACK. Each eigenvector is scaled so that its entry of
    largest absolute value is positive.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetric matrix (checked to 1e-10 relative).

    Returns
    -------
    EigenResult
    """
    A = _check_symmetric(A, "A")
    w, V = np.linalg.eigh(A)
    order = np.argsort(-w, kind="stable")
    return EigenResult(w[order], _fix_signs(V[:, order]))


def pinv_gram(G, rank_rtol=DEFAULT_RANK_RTOL, return_rank=False):
    """Moore-Penrose pseudo-inverse of a symmetric PSD Gram matrix.

    Only eigenvalues above ``rank_rtol * lambda_max`` are inverted. An
    all-zero input yields the zero matrix with rank 0.

    Parameters
    ----------
    G : array_like, shape (n, n)
    rank_rtol : float in (0, 1)
    return_rank : bool
        If True, also return the numerical rank that was kept.
    """
    if not 0.0 < rank_rtol < 1.0:
        raise ContractViolation(f"rank_rtol must lie in (0, 1), got {rank_rtol}")
    G = _check_symmetric(G, "G")
    w, V = np.linalg.eigh(G)
    lam_max = w[-1] if w.size else 0.0
    if lam_max <= 0.0:
        Gp, rank = np.zeros_like(G), 0
    else:
        keep = w > rank_rtol * lam_max
        rank = int(np.count_nonzero(keep))
        Vk = V[:, keep]
        Gp = (Vk / w[keep]) @ Vk.T
        Gp = 0.5 * (Gp + Gp.T)
    if return_rank:
        return Gp, rank
    return Gp


def rowspace_projector(X, rank_rtol=DEFAULT_RANK_RTOL, return_rank=False):
    """Orthogonal projector ``X^T (X X^T)^+ X`` onto the row space of ``X``.

    The result is N x N for a D x N input. A zero ``X`` gives the zero
    projector (rank 0).
    """
    X = as_matrix(X, "X")
    Gp, rank = pinv_gram(X @ X.T, rank_rtol, return_rank=True)
    Pi = X.T @ Gp @ X
    Pi = 0.5 * (Pi + Pi.T)
    if return_rank:
        return Pi, rank
    return Pi
