"""Alternating minimization for aligned CCA.

Each outer iteration performs, in order: the eigen update of ``S`` using
the current ``Y P``, the least-squares updates of ``U`` and ``V``, and a
warm-started P-step. The full loss is recorded after the P-step.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .align import (
    AlignmentMatrix,
    PStepProblem,
    _check_lambda,
    solve_p_step,
)
from .cca import CcaModel, update_S, update_U, update_V
from .errors import ContractViolation, NumericalAbort, ParameterError
from .linalg import DEFAULT_RANK_RTOL

log = logging.getLogger(__name__)

STALL_WINDOW = 3


@dataclass(frozen=True)
class HyperParams:
    d: int = 7
    gamma1: float = 1e-4
    gamma2: float = 1e-4
    lam: float = 0.1
    outer_max_iters: int = 100
    loss_threshold: float = 1e-8
    loss_rel_tol: float = 1e-6
    rank_rtol: float = DEFAULT_RANK_RTOL
    inner_max_iters: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError(f"d must be >= 1, got {self.d}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ParameterError("gamma1 and gamma2 must be nonnegative")
        if not self.lam > 0:
            raise ParameterError(f"lambda must be positive, got {self.lam}")
        if self.outer_max_iters < 1:
            raise ParameterError("outer_max_iters must be >= 1")
        if not 0 < self.rank_rtol < 1:
            raise ParameterError("rank_rtol must lie in (0, 1)")

    def check_against(self, n):
        if self.d > n:
            raise ParameterError(f"d={self.d} exceeds N={n}")
        _check_lambda(self.lam, n)

    def to_dict(self):
        return asdict(self)


@dataclass
class FitResult:
    model: CcaModel
    alignment: AlignmentMatrix
    loss_trace: list
    iterations_run: int
    stop_reason: str  # "threshold" | "max_iters" | "stalled"
    history: list = field(default_factory=list, repr=False)


def acca_loss(model, P, data, gamma1, gamma2):
    """Full four-term objective for a model and alignment."""
    P = P.P if isinstance(P, AlignmentMatrix) else P
    n = P.shape[0]
    I = np.eye(n)
    rx = model.U @ data.X - model.S
    ry = model.V @ data.Y @ P - model.S
    E1 = P @ P.T - I
    E2 = P.T @ P - I
    return float(
        np.sum(rx * rx)
        + np.sum(ry * ry)
        + gamma1 * np.sum(E1 * E1)
        + gamma2 * np.sum(E2 * E2)
    )


def fit_acca(data, hp, P_init, keep_history=False):
    """Run the alternating loop from ``P_init`` until a stopping rule fires.

    Stops when the loss drops below ``hp.loss_threshold``, after
    ``hp.outer_max_iters`` iterations, or when the relative improvement
    stays below ``hp.loss_rel_tol`` for three consecutive iterations.

    With ``keep_history=True`` the ``(S, P)`` pair after each iteration is
    kept on the result for constraint auditing.
    """
    if not data.centered:
        raise ContractViolation("fit_acca expects centered views")
    n = data.n_samples
    hp.check_against(n)
    P_init.require_feasible("P_init")
    X, Y = data.X, data.Y
    alignment = AlignmentMatrix(P_init.P, hp.lam)
    trace = []
    history = []
    small_steps = 0
    stop_reason = "max_iters"
    model = None
    for it in range(1, hp.outer_max_iters + 1):
        P = alignment.P
        YP = Y @ P
        S = update_S(X, YP, hp.d, hp.rank_rtol)
        U = update_U(X, S, hp.rank_rtol)
        V = update_V(Y, P, S, hp.rank_rtol)
        model = CcaModel(U=U, V=V, S=S)
        prob = PStepProblem(
            A=V @ Y, S=S, gamma1=hp.gamma1, gamma2=hp.gamma2, lam=hp.lam,
            max_iter=hp.inner_max_iters,
        )
        alignment = solve_p_step(alignment, prob)
        loss = acca_loss(model, alignment, data, hp.gamma1, hp.gamma2)
        if not np.isfinite(loss):
            raise NumericalAbort(f"non-finite loss at outer iteration {it}", iteration=it)
        if keep_history:
            history.append((S, alignment.P))
        log.debug("iteration %d: loss %.10g", it, loss)
        prev = trace[-1] if trace else None
        trace.append(loss)
        if loss < hp.loss_threshold:
            stop_reason = "threshold"
            break
        if prev is not None:
            rel = (prev - loss) / max(abs(prev), np.finfo(float).tiny)
            small_steps = small_steps + 1 if rel < hp.loss_rel_tol else 0
            if small_steps >= STALL_WINDOW:
                stop_reason = "stalled"
                break
    return FitResult(
        model=model,
        alignment=alignment,
        loss_trace=trace,
        iterations_run=len(trace),
        stop_reason=stop_reason,
        history=history,
    )


def parallel_map(fn, items, max_workers=None):
    """Apply ``fn`` to ``items`` concurrently, returning results in input order."""
    items = list(items)
    if max_workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))
