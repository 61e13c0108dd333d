"""Synthetic two-view data with a planted column permutation.

A latent ``Z`` (dbar x N, standard normal columns) is mapped through two
independent Gaussian projections ``W`` (D_x x dbar) and ``Q`` (D_y x dbar).
The second view's columns are then shuffled by a random permutation.

``P_true`` is stored as the alignment to be recovered, i.e. the matrix
with ``Y @ P_true == Q @ Z``. Row ``i`` of ``P_true`` marks the column of
``X`` that sample ``i`` of ``Y`` corresponds to.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .cca import DatasetPair, center_columns
from .errors import ParameterError


@dataclass(frozen=True)
class GenConfig:
    n: int = 20
    dbar: int = 2
    dx: int = 15
    dy: int = 10
    seed: int = 0
    noise: float = 0.0  # additive Gaussian noise std; 0 reproduces the noiseless setup

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"need N >= 2, got n={self.n}")
        if self.dbar < 1 or self.dbar > min(self.dx, self.dy):
            raise ParameterError(
                f"need 1 <= dbar <= min(dx, dy): dbar={self.dbar}, dx={self.dx}, dy={self.dy}"
            )
        if self.noise < 0:
            raise ParameterError(f"noise must be nonnegative, got {self.noise}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SyntheticInstance:
    Z: np.ndarray
    W: np.ndarray
    Q: np.ndarray
    P_true: np.ndarray
    data: DatasetPair
    config: GenConfig

    @property
    def seed(self):
        return self.config.seed


def random_permutation_matrix(n, rng):
    """Uniform random permutation via Fisher-Yates, as an n x n 0/1 matrix."""
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    P = np.zeros((n, n))
    P[np.arange(n), perm] = 1.0
    return P


def _build(config, permute):
    rng = np.random.default_rng(config.seed)
    Z = rng.standard_normal((config.dbar, config.n))
    W = rng.standard_normal((config.dx, config.dbar))
    Q = rng.standard_normal((config.dy, config.dbar))
    P_true = random_permutation_matrix(config.n, rng) if permute else np.eye(config.n)
    X = W @ Z
    Y = (Q @ Z) @ P_true.T
    if config.noise > 0:
        X = X + config.noise * rng.standard_normal(X.shape)
        Y = Y + config.noise * rng.standard_normal(Y.shape)
    data = DatasetPair(center_columns(X), center_columns(Y), centered=True)
    return SyntheticInstance(Z=Z, W=W, Q=Q, P_true=P_true, data=data, config=config)


def generate(config):
    """Draw a fully seeded instance with a uniformly random planted permutation."""
    return _build(config, permute=True)


def plant_identity(config):
    """Same draw as :func:`generate` but with the views left aligned."""
    return _build(config, permute=False)
