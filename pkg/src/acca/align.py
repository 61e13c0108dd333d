"""Optimization over the relaxed permutation matrix ``P``.

``P`` is N x N with rows on the probability simplex and each row's
Shannon entropy capped at ``lam``. Row ``i`` of ``P`` is a distribution
over which column of the first view sample ``i`` of the second view is
matched to, so ``Y @ P`` re-orders the second view onto the first.

Two problems are solved here, both by projected gradient descent:

* the P-step of the alternating loop, ``min ||A P - S||^2 + penalties``
  with ``A = V Y`` and ``S`` held fixed;
* the CCA-free initializer, ``min ||X - Y P||^2 + penalties``.

The penalties ``g1 ||P P^T - I||^2 + g2 ||P^T P - I||^2`` vanish exactly
on permutation matrices.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, ParameterError
from .linalg import DEFAULT_RANK_RTOL, as_matrix, sym_eig

ENTRY_TOL = 1e-8
ROW_SUM_TOL = 1e-6
ENTROPY_TOL = 1e-4
SHARPEN_TOL = 1e-6
_MAX_SHARPNESS = 1e15


def row_entropy(p):
    """Shannon entropy in nats of a probability vector (``0 ln 0 = 0``)."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ContractViolation(f"expected a vector, got shape {p.shape}")
    if np.any(p < -ENTRY_TOL):
        raise ContractViolation("probability vector has negative entries")
    if abs(p.sum() - 1.0) > ROW_SUM_TOL:
        raise ContractViolation(f"probability vector sums to {p.sum():.9f}")
    return float(_entropies(np.clip(p, 0.0, None)[None, :])[0])


def _entropies(P):
    # row-wise entropy, no validation
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P), 0.0)
    return -terms.sum(axis=1)


def max_entropy(n):
    return float(np.log(n))


def _check_lambda(lam, n):
    if not lam > 0:
        raise ParameterError(f"entropy bound must be positive, got {lam}")
    # the uniform row is the most entropic feasible point
    if lam > max_entropy(n) + 1e-12:
        raise ParameterError(
            f"entropy bound {lam} exceeds ln(N) = {max_entropy(n):.4f} for N={n}"
        )


@dataclass(frozen=True)
class AlignmentMatrix:
    """A relaxed permutation together with the entropy bound it must satisfy."""

    P: np.ndarray
    lam: float

    @property
    def n(self):
        return self.P.shape[0]

    @property
    def feasibility_report(self):
        P = self.P
        return {
            "min_entry": float(P.min()),
            "max_entry": float(P.max()),
            "max_row_sum_dev": float(np.max(np.abs(P.sum(axis=1) - 1.0))),
            "max_row_entropy": float(_entropies(np.clip(P, 0.0, None)).max()),
            "lam": float(self.lam),
        }

    def violations(self):
        r = self.feasibility_report
        out = []
        if r["min_entry"] < -ENTRY_TOL or r["max_entry"] > 1 + ENTRY_TOL:
            out.append(f"entries outside [0, 1]: [{r['min_entry']:.3e}, {r['max_entry']:.3e}]")
        if r["max_row_sum_dev"] > ROW_SUM_TOL:
            out.append(f"row sums off by {r['max_row_sum_dev']:.3e}")
        if r["max_row_entropy"] > self.lam + ENTROPY_TOL:
            out.append(f"row entropy {r['max_row_entropy']:.4f} > lambda {self.lam}")
        return out

    def is_feasible(self):
        return not self.violations()

    def require_feasible(self, what="P"):
        bad = self.violations()
        if bad:
            raise ContractViolation(f"{what} is infeasible: " + "; ".join(bad))
        return self


@dataclass
class PStepProblem:
    """``min_P ||A P - S||^2 + g1 ||P P^T - I||^2 + g2 ||P^T P - I||^2``.

    ``A`` is (d, N), ``S`` is (d, N). The same container also carries the
    initializer problem with ``A = Y~`` and ``S = X~``.
    """

    A: np.ndarray
    S: np.ndarray
    gamma1: float
    gamma2: float
    lam: float
    grad_tol: float = 1e-6
    ftol: float = 1e-8
    max_iter: int = 500
    step0: float = 1.0
    trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.A = as_matrix(self.A, "A")
        self.S = as_matrix(self.S, "S")
        if self.A.shape[1] != self.S.shape[1] or self.A.shape[0] != self.S.shape[0]:
            raise ContractViolation(f"A is {self.A.shape} but S is {self.S.shape}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ParameterError("gamma1 and gamma2 must be nonnegative")
        _check_lambda(self.lam, self.n)

    @property
    def n(self):
        return self.S.shape[1]


def p_objective(P, prob):
    R = prob.A @ P - prob.S
    n = P.shape[0]
    I = np.eye(n)
    E1 = P @ P.T - I
    E2 = P.T @ P - I
    return float(
        np.sum(R * R) + prob.gamma1 * np.sum(E1 * E1) + prob.gamma2 * np.sum(E2 * E2)
    )


def p_gradient(P, prob):
    n = P.shape[0]
    I = np.eye(n)
    G = 2.0 * prob.A.T @ (prob.A @ P - prob.S)
    if prob.gamma1:
        G += 4.0 * prob.gamma1 * (P @ P.T - I) @ P
    if prob.gamma2:
        G += 4.0 * prob.gamma2 * P @ (P.T @ P - I)
    return G


def project_simplex_rows(V):
    """Euclidean projection of every row of ``V`` onto the probability simplex."""
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    n = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    rho = np.count_nonzero(U - css / ind > 0, axis=1)
    theta = css[np.arange(V.shape[0]), rho - 1] / rho
    return np.maximum(V - theta[:, None], 0.0)


def _escort_stats(logp, u):
    """Escort rows ``p**s / sum(p**s)`` at ``s = exp(u)`` with entropy and slope.

    Returns ``(q, H, dH/du)``; the slope is ``-s**2 Var_q(log p)``.
    """
    s = np.exp(u)[:, None]
    finite = np.isfinite(logp)
    lp = np.where(finite, logp, 0.0)
    z = np.where(finite, s * lp, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    q = np.exp(z)
    total = q.sum(axis=1, keepdims=True)
    q /= total
    zq = (q * np.where(q > 0, z, 0.0)).sum(axis=1)
    H = np.log(total[:, 0]) - zq
    mean = (q * lp).sum(axis=1)
    var = (q * (lp - mean[:, None]) ** 2).sum(axis=1)
    return q, np.maximum(H, 0.0), -(s[:, 0] ** 2) * var


def _sharpen_rows(P, lam):
    """Power-sharpen rows whose entropy exceeds ``lam``.

    Row ``p`` becomes ``p**s / sum(p**s)`` with ``s >= 1`` chosen so the
    entropy lands in ``[lam - 1e-6, lam]``; ``log s`` is found by Newton
    steps kept inside a bisection bracket (at most 60 iterations). Rows
    whose maximum is tied fall back to a one-hot vector on the lowest
    tied index.
    """
    P = P.copy()
    H = _entropies(P)
    rows = np.nonzero(H > lam)[0]
    if rows.size == 0:
        return P
    with np.errstate(divide="ignore"):
        logp = np.log(P[rows])
    m = rows.size
    lo = np.zeros(m)
    hi = np.full(m, np.log(_MAX_SHARPNESS))
    Q, H_hi, _ = _escort_stats(logp, hi)
    hard = H_hi > lam
    done = hard.copy()
    u = np.zeros(m)
    target = lam - 0.5 * SHARPEN_TOL
    for _ in range(60):
        if done.all():
            break
        q, Hu, dH = _escort_stats(logp, u)
        feasible = Hu <= lam
        hi = np.where(feasible, np.minimum(hi, u), hi)
        lo = np.where(feasible, lo, np.maximum(lo, u))
        hit = feasible & (Hu >= lam - SHARPEN_TOL) & ~done
        Q[hit] = q[hit]
        done |= hit
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = u - (Hu - target) / dH
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        u = np.where(bad, 0.5 * (lo + hi), step)
    if not done.all():
        rest = ~done
        Q[rest] = _escort_stats(logp[rest], hi[rest])[0]
    if np.any(hard):
        onehot = np.zeros((int(hard.sum()), P.shape[1]))
        onehot[np.arange(onehot.shape[0]), np.argmax(P[rows[hard]], axis=1)] = 1.0
        Q[hard] = onehot
    P[rows] = Q
    return P


def project_rows_feasible(V, lam):
    """Row-wise feasibility restoration: simplex projection, then sharpening."""
    if not lam > 0:
        raise ParameterError(f"entropy bound must be positive, got {lam}")
    return _sharpen_rows(project_simplex_rows(V), lam)


def project_row_feasible(v, lam):
    """Single-vector form of :func:`project_rows_feasible`."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or not np.all(np.isfinite(v)):
        raise ContractViolation("v must be a finite vector")
    return project_rows_feasible(v[None, :], lam)[0]


def solve_p_step(P0, prob):
    """Projected gradient descent with Armijo backtracking.

    Each iteration starts from step ``prob.step0`` and halves it until the
    sufficient-decrease test passes, so the objective never increases.
    Objective values are appended to ``prob.trace``.
    """
    P0.require_feasible("starting P")
    if P0.P.shape != (prob.n, prob.n):
        raise ContractViolation(f"P0 is {P0.P.shape}, expected {(prob.n, prob.n)}")
    lam = prob.lam
    P = P0.P
    f = p_objective(P, prob)
    prob.trace[:] = [f]
    sigma = 1e-4
    for _ in range(prob.max_iter):
        G = p_gradient(P, prob)
        t = prob.step0
        accepted = False
        for _ in range(50):
            Pn = project_rows_feasible(P - t * G, lam)
            D = Pn - P
            dd = float(np.sum(D * D))
            if dd == 0.0:
                break
            fn = p_objective(Pn, prob)
            if fn <= f - sigma / t * dd:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        decrease = f - fn
        P, f = Pn, fn
        prob.trace.append(f)
        if np.sqrt(dd) / t <= prob.grad_tol or decrease <= prob.ftol * max(abs(f), 1e-300):
            break
    return AlignmentMatrix(P, lam)


def swap_refine(P0, prob, max_sweeps=50):
    """Entropy-preserving discrete moves that lower the objective.

    Two kinds of move are tried, first-improvement, until a full sweep
    finds nothing: exchanging two rows of ``P``, and exchanging a row's
    largest entry with another entry of the same row. Both permute
    entries, so every row keeps its sum and entropy; they reach
    assignments that gradient steps cannot cross to under a tight bound.
    """
    P = P0.P.copy()
    f = p_objective(P, prob)
    n = P.shape[0]

    def better(fn):
        return fn < f - 1e-12 * max(1.0, abs(f))

    for _ in range(max_sweeps):
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                if np.array_equal(P[i], P[j]):
                    continue
                P[[i, j]] = P[[j, i]]
                fn = p_objective(P, prob)
                if better(fn):
                    f, improved = fn, True
                else:
                    P[[i, j]] = P[[j, i]]
        for i in range(n):
            c = int(np.argmax(P[i]))
            for k in range(n):
                if k == c:
                    continue
                P[i, [c, k]] = P[i, [k, c]]
                fn = p_objective(P, prob)
                if better(fn):
                    f, improved = fn, True
                    c = k
                else:
                    P[i, [c, k]] = P[i, [k, c]]
        if not improved:
            break
    return AlignmentMatrix(P, P0.lam)


def uniform_start(n, lam):
    """The 1/N matrix, sharpened (lowest-index tie-break) to satisfy ``lam``."""
    return AlignmentMatrix(project_rows_feasible(np.full((n, n), 1.0 / n), lam), lam)


def _numerical_rank(s, rank_rtol):
    # rank_rtol is a cutoff on Gram eigenvalues, i.e. on squared singular values
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.count_nonzero(s * s > rank_rtol * s[0] * s[0]))


def canonical_coordinates(Vt):
    """Rotate whitened sample coordinates into a data-defined frame.

    ``Vt`` is (r, N) with orthonormal rows spanning the view's row space.
    The rows are scaled to unit sample variance, rotated onto the
    eigenvectors of the fourth-moment matrix ``mean(|z|^2 z z^T)`` and
    sign-flipped so each coordinate has nonnegative skewness. Any two
    orthonormal bases of the same row space, with columns permuted
    consistently, map to the same coordinates.
    """
    r, n = Vt.shape
    Zw = np.sqrt(n) * Vt
    K = (Zw * np.sum(Zw * Zw, axis=0)) @ Zw.T / n
    C = sym_eig(0.5 * (K + K.T)).eigenvectors.T @ Zw
    skew = np.mean(C ** 3, axis=1)
    C[skew < 0] *= -1.0
    return C


def reconcile_views(X, Y, rank_rtol=DEFAULT_RANK_RTOL, frame="canonical"):
    """Bring two views of different dimension into a common r x N form.

    Both views are reduced to their top ``r = min(rank X, rank Y)``
    right-singular directions. With ``frame="canonical"`` the coordinates
    are whitened and put in the frame of :func:`canonical_coordinates`;
    with ``frame="svd"`` they are the plain ``Sigma_r V_r^T`` of each view,
    whose bases generally disagree between views. Returns ``(X~, Y~)``.
    """
    if frame not in ("canonical", "svd"):
        raise ParameterError(f"unknown frame {frame!r}")
    svds = [np.linalg.svd(M, full_matrices=False) for M in (X, Y)]
    r = max(1, min(_numerical_rank(s, rank_rtol) for _, s, _ in svds))
    if frame == "svd":
        return tuple(s[:r, None] * Vt[:r] for _, s, Vt in svds)
    Xt, Yt = (canonical_coordinates(Vt[:r]) for _, _, Vt in svds)
    return Xt, Yt


def entropy_schedule(n, lam, stages):
    """Geometric sequence of entropy bounds from ``ln N`` down to ``lam``."""
    top = max_entropy(n)
    if stages <= 1 or lam >= top:
        return [lam]
    return [float(top * (lam / top) ** (s / (stages - 1))) for s in range(stages)]


def initialize_alignment(data, gamma1, gamma2, lam, rank_rtol=DEFAULT_RANK_RTOL,
                         raw=False, max_iter=500, stages=8, frame="canonical",
                         refine=True):
    """Match the views directly, ignoring the embedding.

    Solves ``min ||X~ - Y~ P||^2 + penalties`` under the row constraints,
    where ``X~, Y~`` come from :func:`reconcile_views` (``frame`` selects
    the canonical or the plain singular-value frame). With ``raw=True``
    (requires D_x == D_y) the views are matched as given.

    The entropy bound is tightened over ``stages`` solves from ``ln N``
    (where the uniform matrix is feasible) to ``lam``, each warm-started
    from the previous one; ``stages=1`` solves at ``lam`` directly from
    the sharpened uniform matrix. With ``refine`` the result is polished
    by :func:`swap_refine` and one more gradient solve.
    """
    if raw:
        if data.X.shape[0] != data.Y.shape[0]:
            raise ParameterError(
                f"raw matching needs D_x == D_y, got {data.X.shape} and {data.Y.shape}"
            )
        Xt, Yt = data.X, data.Y
    else:
        Xt, Yt = reconcile_views(data.X, data.Y, rank_rtol, frame=frame)
    n = data.n_samples
    _check_lambda(lam, n)
    schedule = entropy_schedule(n, lam, stages)
    current = uniform_start(n, schedule[0])
    for bound in schedule:
        current = AlignmentMatrix(project_rows_feasible(current.P, bound), bound)
        prob = PStepProblem(A=Yt, S=Xt, gamma1=gamma1, gamma2=gamma2, lam=bound,
                            max_iter=max_iter)
        current = solve_p_step(current, prob)
    if refine:
        current = solve_p_step(swap_refine(current, prob), prob)
    return current


def round_to_permutation(P):
    """Greedy hard assignment: repeatedly take the largest remaining entry.

    The chosen row and column are then excluded. Ties go to the lowest
    flat (row-major) index.
    """
    P = P.P if isinstance(P, AlignmentMatrix) else as_matrix(P, "P")
    n = P.shape[0]
    W = P.astype(np.float64).copy()
    out = np.zeros((n, n))
    for _ in range(n):
        k = int(np.argmax(W))
        i, j = divmod(k, n)
        out[i, j] = 1.0
        W[i, :] = -np.inf
        W[:, j] = -np.inf
    return out
