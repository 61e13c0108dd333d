"""Top-k matching accuracy and Monte Carlo aggregation."""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .align import _entropies, initialize_alignment
from .driver import fit_acca, parallel_map
from .errors import ContractViolation, NumericalAbort, ParameterError
from .linalg import as_matrix
from .synth import generate

log = logging.getLogger(__name__)

DEFAULT_K = (1, 2, 3, 4, 5)


def check_permutation(P, name="P_true"):
    P = as_matrix(P, name)
    n = P.shape[0]
    if P.shape != (n, n):
        raise ContractViolation(f"{name} must be square, got {P.shape}")
    binary = np.all((P == 0) | (P == 1))
    if not (binary and np.all(P.sum(axis=0) == 1) and np.all(P.sum(axis=1) == 1)):
        raise ContractViolation(f"{name} is not a permutation matrix")
    return P


def topk_accuracy(P, P_true, k):
    """Fraction of rows whose ``k`` largest entries include the true column.

    Ties among entries of ``P`` are resolved toward the lower column index.
    """
    P_true = check_permutation(P_true)
    P = as_matrix(P, "P")
    n = P_true.shape[0]
    if P.shape != (n, n):
        raise ContractViolation(f"P is {P.shape}, P_true is {P_true.shape}")
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= N={n}, got {k}")
    top = np.argsort(-P, axis=1, kind="stable")[:, :k]
    truth = np.argmax(P_true, axis=1)
    return float(np.mean(np.any(top == truth[:, None], axis=1)))


def baseline_accuracy(n, k):
    """Expected top-k accuracy of a uniformly random guess."""
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= N={n}, got {k}")
    return k / n


@dataclass
class TopKReport:
    k_values: list
    accuracy_mean: list
    accuracy_std: list
    baseline: list
    replicates: int

    def rows(self):
        return list(zip(self.k_values, self.accuracy_mean, self.accuracy_std, self.baseline))

    def to_dict(self):
        return {
            "k_values": list(self.k_values),
            "accuracy_mean": list(self.accuracy_mean),
            "accuracy_std": list(self.accuracy_std),
            "baseline": list(self.baseline),
            "replicates": self.replicates,
        }


@dataclass
class LossStats:
    mean: list
    std: list
    lengths: list

    def to_dict(self):
        return {"mean": list(self.mean), "std": list(self.std), "lengths": list(self.lengths)}


@dataclass
class ReplicateResult:
    seed: int
    P_est: np.ndarray
    P_true: np.ndarray
    loss_trace: list
    accuracy: dict
    mean_row_entropy: float
    stop_reason: str
    timings: dict = field(default_factory=dict)


@dataclass
class MonteCarloResult:
    topk: TopKReport
    loss: LossStats
    replicates: list
    failures: list
    mean_row_entropy: float
    timings: dict


def loss_statistics(traces):
    """Per-iteration mean/std after right-padding each trace with its last value."""
    if not traces:
        return LossStats([], [], [])
    length = max(len(t) for t in traces)
    padded = np.array([list(t) + [t[-1]] * (length - len(t)) for t in traces], dtype=float)
    return LossStats(
        mean=padded.mean(axis=0).tolist(),
        std=padded.std(axis=0).tolist(),
        lengths=[len(t) for t in traces],
    )


def run_replicate(hp, config, k_values=DEFAULT_K, init=None):
    """Generate, initialize, fit and score one seeded instance.

    ``init`` holds extra keyword arguments for :func:`initialize_alignment`
    (``stages``, ``frame``, ``refine``).
    """
    timings = {}
    t0 = time.perf_counter()
    inst = generate(config)
    t1 = time.perf_counter()
    P0 = initialize_alignment(
        inst.data, hp.gamma1, hp.gamma2, hp.lam, hp.rank_rtol,
        max_iter=hp.inner_max_iters, **(init or {}),
    )
    t2 = time.perf_counter()
    fit = fit_acca(inst.data, hp, P0)
    t3 = time.perf_counter()
    timings.update(generate=t1 - t0, initialize=t2 - t1, fit=t3 - t2)
    P = fit.alignment.P
    return ReplicateResult(
        seed=config.seed,
        P_est=P,
        P_true=inst.P_true,
        loss_trace=list(fit.loss_trace),
        accuracy={k: topk_accuracy(P, inst.P_true, k) for k in k_values},
        mean_row_entropy=float(_entropies(np.clip(P, 0.0, None)).mean()),
        stop_reason=fit.stop_reason,
        timings=timings,
    )


def monte_carlo(hp, config, replicates, k_values=DEFAULT_K, max_workers=None, init=None):
    """Run ``replicates`` seeded fits and aggregate accuracies and loss traces.

    Replicate ``r`` uses seed ``config.seed + r``. Replicates that abort
    numerically are excluded from the statistics and listed in
    ``failures``.
    """
    if replicates < 1:
        raise ParameterError(f"replicates must be >= 1, got {replicates}")
    k_values = list(k_values)
    for k in k_values:
        baseline_accuracy(config.n, k)
    hp.check_against(config.n)

    def one(r):
        cfg = replace(config, seed=config.seed + r)
        try:
            return run_replicate(hp, cfg, k_values, init)
        except NumericalAbort as exc:
            log.warning("replicate seed=%d aborted: %s", cfg.seed, exc)
            return (cfg.seed, str(exc))

    t0 = time.perf_counter()
    outcomes = parallel_map(one, range(replicates), max_workers=max_workers)
    elapsed = time.perf_counter() - t0
    done = [o for o in outcomes if isinstance(o, ReplicateResult)]
    failures = [o for o in outcomes if not isinstance(o, ReplicateResult)]
    if not done:
        raise NumericalAbort(f"all {replicates} replicates aborted")

    acc = np.array([[rep.accuracy[k] for k in k_values] for rep in done])
    topk = TopKReport(
        k_values=k_values,
        accuracy_mean=acc.mean(axis=0).tolist(),
        accuracy_std=acc.std(axis=0).tolist(),
        baseline=[baseline_accuracy(config.n, k) for k in k_values],
        replicates=len(done),
    )
    timings = {
        phase: float(sum(rep.timings[phase] for rep in done))
        for phase in ("generate", "initialize", "fit")
    }
    timings["wall"] = elapsed
    return MonteCarloResult(
        topk=topk,
        loss=loss_statistics([rep.loss_trace for rep in done]),
        replicates=done,
        failures=failures,
        mean_row_entropy=float(np.mean([rep.mean_row_entropy for rep in done])),
        timings=timings,
    )
