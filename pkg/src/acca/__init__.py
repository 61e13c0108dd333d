"""Aligned canonical correlation analysis.

Jointly estimates a shared CCA embedding of two data views and the
unknown column correspondence between them.
"""

from .align import (
    AlignmentMatrix,
    PStepProblem,
    initialize_alignment,
    p_gradient,
    p_objective,
    project_row_feasible,
    round_to_permutation,
    row_entropy,
    solve_p_step,
)
from .cca import CcaModel, DatasetPair, center_columns, classical_cca, update_S, update_U, update_V
from .driver import FitResult, HyperParams, acca_loss, fit_acca
from .errors import ContractViolation, NumericalAbort, ParameterError
from .linalg import EigenResult, pinv_gram, rowspace_projector, sym_eig
from .metrics import TopKReport, baseline_accuracy, monte_carlo, topk_accuracy
from .synth import GenConfig, SyntheticInstance, generate, plant_identity

__version__ = "0.1.0"

__all__ = [
    "AlignmentMatrix",
    "CcaModel",
    "ContractViolation",
    "DatasetPair",
    "EigenResult",
    "FitResult",
    "GenConfig",
    "HyperParams",
    "NumericalAbort",
    "PStepProblem",
    "ParameterError",
    "SyntheticInstance",
    "TopKReport",
    "acca_loss",
    "baseline_accuracy",
    "center_columns",
    "classical_cca",
    "fit_acca",
    "generate",
    "initialize_alignment",
    "monte_carlo",
    "p_gradient",
    "p_objective",
    "pinv_gram",
    "plant_identity",
    "project_row_feasible",
    "round_to_permutation",
    "row_entropy",
    "rowspace_projector",
    "solve_p_step",
    "sym_eig",
    "topk_accuracy",
    "update_S",
    "update_U",
    "update_V",
]
