import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from acca.align import (
    AlignmentMatrix,
    PStepProblem,
    entropy_schedule,
    initialize_alignment,
    p_gradient,
    p_objective,
    project_row_feasible,
    project_simplex_rows,
    reconcile_views,
    round_to_permutation,
    row_entropy,
    solve_p_step,
    swap_refine,
    uniform_start,
)
from acca.cca import DatasetPair, center_columns
from acca.errors import ContractViolation, ParameterError
from acca.synth import GenConfig, generate

from conftest import all_permutation_matrices


def naive_objective(P, A, S, g1, g2):
    d, n = S.shape
    total = 0.0
    for a in range(d):
        for j in range(n):
            r = sum(A[a, i] * P[i, j] for i in range(n)) - S[a, j]
            total += r * r
    for i in range(n):
        for j in range(n):
            pp = sum(P[i, k] * P[j, k] for k in range(n)) - (i == j)
            ptp = sum(P[k, i] * P[k, j] for k in range(n)) - (i == j)
            total += g1 * pp * pp + g2 * ptp * ptp
    return total


def central_differences(f, P, h=1e-5):
    G = np.zeros_like(P)
    for idx in np.ndindex(P.shape):
        E = np.zeros_like(P)
        E[idx] = h
        G[idx] = (f(P + E) - f(P - E)) / (2 * h)
    return G


def sharpen_oracle(p, lam):
    """Plain bisection on the temperature t in (0, 1] of p**(1/t)."""

    def H(t):
        q = p ** (1.0 / t)
        q = q / q.sum()
        q = q[q > 0]
        return -(q * np.log(q)).sum()

    lo, hi = 1e-3, 1.0  # H(lo) < lam < H(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if H(mid) > lam:
            hi = mid
        else:
            lo = mid
    q = p ** (1.0 / lo)
    return q / q.sum()


class TestRowEntropy:
    def test_one_hot(self):
        assert row_entropy([1.0] + [0.0] * 19) == 0.0

    def test_uniform(self):
        assert row_entropy(np.full(20, 0.05)) == pytest.approx(np.log(20), abs=1e-12)
        assert np.log(20) == pytest.approx(2.9957, abs=1e-4)

    def test_two_point(self):
        assert row_entropy([0.5, 0.5, 0.0, 0.0]) == pytest.approx(np.log(2), abs=1e-12)

    @pytest.mark.parametrize("p", [[-0.1, 1.1], [0.5, 0.4]])
    def test_rejects_bad_vectors(self, p):
        with pytest.raises(ContractViolation):
            row_entropy(p)


class TestObjective:
    def test_zero_at_identity(self, rng):
        S = rng.standard_normal((3, 5))
        prob = PStepProblem(A=S, S=S, gamma1=0.3, gamma2=0.7, lam=np.log(5))
        assert p_objective(np.eye(5), prob) == pytest.approx(0.0, abs=1e-24)

    def test_zero_matrix(self, rng):
        S = rng.standard_normal((3, 5))
        prob = PStepProblem(A=rng.standard_normal((3, 5)), S=S, gamma1=0.3, gamma2=0.7, lam=1.0)
        expected = np.sum(S * S) + (0.3 + 0.7) * 5
        assert p_objective(np.zeros((5, 5)), prob) == pytest.approx(expected, rel=1e-12)

    def test_matches_naive_loops(self, rng):
        A, S = rng.standard_normal((2, 3)), rng.standard_normal((2, 3))
        P = rng.uniform(size=(3, 3))
        prob = PStepProblem(A=A, S=S, gamma1=0.2, gamma2=0.05, lam=1.0)
        assert p_objective(P, prob) == pytest.approx(naive_objective(P, A, S, 0.2, 0.05), rel=1e-12)

    def test_penalties_vanish_on_permutations(self, rng):
        A = rng.standard_normal((2, 5))
        prob = PStepProblem(A=A, S=np.zeros((2, 5)), gamma1=1.0, gamma2=1.0, lam=1.0)
        for P in list(all_permutation_matrices(5))[::17]:
            assert p_objective(P, prob) == pytest.approx(np.sum((A @ P) ** 2), abs=1e-12)


class TestGradient:
    def test_zero_at_global_minimum(self, rng):
        S = rng.standard_normal((2, 4))
        prob = PStepProblem(A=S, S=S, gamma1=5.0, gamma2=2.0, lam=1.0)
        np.testing.assert_allclose(p_gradient(np.eye(4), prob), 0.0, atol=1e-12)

    def test_penalty_gradient_vanishes_on_permutations(self, rng):
        prob = PStepProblem(A=np.zeros((2, 6)), S=np.zeros((2, 6)), gamma1=1.0, gamma2=1.0, lam=1.0)
        P = np.eye(6)[rng.permutation(6)]
        np.testing.assert_allclose(p_gradient(P, prob), 0.0, atol=1e-12)

    def test_finite_differences(self, rng):
        A, S = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
        prob = PStepProblem(A=A, S=S, gamma1=0.4, gamma2=0.9, lam=1.0)
        P = rng.uniform(size=(4, 4))
        fd = central_differences(lambda Q: p_objective(Q, prob), P)
        g = p_gradient(P, prob)
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(g)))


class TestProjection:
    def test_simplex_projection_reference(self):
        np.testing.assert_allclose(project_simplex_rows([[0.5, 0.5, 1.0]]), [[1 / 6, 1 / 6, 2 / 3]])

    def test_one_hot_unchanged(self):
        v = np.array([0.0, 1.0, 0.0, 0.0])
        for lam in (1e-3, 0.5, np.log(4)):
            np.testing.assert_array_equal(project_row_feasible(v, lam), v)

    def test_uniform_at_max_entropy_unchanged(self):
        v = np.full(4, 0.25)
        np.testing.assert_allclose(project_row_feasible(v, np.log(4)), v, atol=1e-15)

    def test_simplex_step_alone_can_satisfy_bound(self):
        # projecting (2, 1, 0, 0) onto the simplex already gives a vertex
        out = project_row_feasible([2.0, 1.0, 0.0, 0.0], 0.3)
        np.testing.assert_array_equal(out, [1.0, 0.0, 0.0, 0.0])
        assert row_entropy(out) == 0.0

    def test_sharpening_lands_on_bound(self):
        v = np.array([0.5, 0.3, 0.2, 0.0])
        out = project_row_feasible(v, 0.3)
        assert 0.3 - 1e-6 <= row_entropy(out) <= 0.3
        assert np.argmax(out) == 0
        np.testing.assert_allclose(out, sharpen_oracle(v, 0.3), atol=1e-5)

    def test_tied_uniform_breaks_to_lowest_index(self):
        np.testing.assert_array_equal(project_row_feasible(np.full(5, 0.2), 0.5), [1, 0, 0, 0, 0])

    def test_rejects_nonpositive_bound(self):
        with pytest.raises(ParameterError):
            project_row_feasible([1.0, 0.0], 0.0)

    @settings(max_examples=100, deadline=None)
    @given(
        arrays(np.float64, 8, elements=st.floats(-5, 5)),
        st.floats(0.01, float(np.log(8))),
    )
    def test_feasible_and_argmax_preserving(self, v, lam):
        p = project_simplex_rows(v)[0]
        top = np.sort(p)[::-1]
        out = project_row_feasible(v, lam)
        assert np.all(out >= -1e-8) and np.all(out <= 1 + 1e-8)
        assert abs(out.sum() - 1) <= 1e-6
        assert row_entropy(out) <= lam + 1e-6
        assume(top[0] - top[1] > 1e-9)
        assert np.argmax(out) == np.argmax(p)


class TestSolvePStep:
    def test_optimal_start_is_kept(self, rng):
        S = rng.standard_normal((3, 5))
        prob = PStepProblem(A=S, S=S, gamma1=1e-4, gamma2=1e-4, lam=0.1)
        out = solve_p_step(AlignmentMatrix(np.eye(5), 0.1), prob)
        np.testing.assert_array_equal(out.P, np.eye(5))

    def test_planted_four_sample_instance(self):
        A = np.array([[0.0, 3.0, 0.0, -3.0], [3.0, 0.0, -3.0, 0.5]])
        P_bar = np.eye(4)[[2, 0, 3, 1]]
        S = A @ P_bar
        prob = PStepProblem(A=A, S=S, gamma1=1e-4, gamma2=1e-4, lam=np.log(4))
        values = [p_objective(P, prob) for P in all_permutation_matrices(4)]
        brute = list(all_permutation_matrices(4))[int(np.argmin(values))]
        np.testing.assert_array_equal(brute, P_bar)
        assert sorted(values)[1] > 1.0
        out = solve_p_step(uniform_start(4, np.log(4)), prob)
        np.testing.assert_array_equal(round_to_permutation(out), P_bar)

    def test_objective_trace_non_increasing(self, rng):
        A, S = rng.standard_normal((3, 10)), rng.standard_normal((3, 10))
        prob = PStepProblem(A=A, S=S, gamma1=1e-4, gamma2=1e-4, lam=0.5)
        P0 = uniform_start(10, 0.5)
        out = solve_p_step(P0, prob)
        assert np.all(np.diff(prob.trace) <= 1e-9)
        assert p_objective(out.P, prob) <= p_objective(P0.P, prob) + 1e-9
        assert out.is_feasible()

    def test_rejects_infeasible_start(self, rng):
        prob = PStepProblem(A=np.eye(3), S=np.eye(3), gamma1=0, gamma2=0, lam=0.1)
        with pytest.raises(ContractViolation):
            solve_p_step(AlignmentMatrix(np.full((3, 3), 1 / 3), 0.1), prob)

    def test_rejects_lambda_above_log_n(self):
        with pytest.raises(ParameterError):
            PStepProblem(A=np.eye(3), S=np.eye(3), gamma1=0, gamma2=0, lam=1.2)


class TestSwapRefine:
    def test_monotone_and_feasible(self, rng):
        A, S = rng.standard_normal((2, 7)), rng.standard_normal((2, 7))
        prob = PStepProblem(A=A, S=S, gamma1=1e-4, gamma2=1e-4, lam=0.2)
        P0 = AlignmentMatrix(project_simplex_rows(rng.standard_normal((7, 7)) * 5), 0.2)
        P0 = AlignmentMatrix(np.eye(7)[rng.integers(0, 7, 7)], 0.2)
        out = swap_refine(P0, prob)
        assert p_objective(out.P, prob) <= p_objective(P0.P, prob)
        assert out.is_feasible()

    def test_resolves_collision(self):
        # both rows sit on column 0; the planted match needs one of them on column 1
        A = np.array([[1.0, -1.0, 0.0], [0.0, 0.0, 2.0]])
        prob = PStepProblem(A=A, S=A.copy(), gamma1=1e-4, gamma2=1e-4, lam=0.1)
        P0 = AlignmentMatrix(np.array([[1.0, 0, 0], [1.0, 0, 0], [0, 0, 1.0]]), 0.1)
        np.testing.assert_array_equal(swap_refine(P0, prob).P, np.eye(3))


class TestInitializeAlignment:
    @pytest.mark.parametrize("seed", range(5))
    def test_identical_views_recover_identity(self, seed):
        rng = np.random.default_rng(seed)
        n = 6
        X = center_columns(rng.standard_normal((3, n)) * 3)
        data = DatasetPair(X, X.copy())
        values = [
            p_objective(P, PStepProblem(A=X, S=X, gamma1=1e-4, gamma2=1e-4, lam=0.1))
            for P in all_permutation_matrices(n)
        ]
        assert np.argmin(values) == 0  # identity comes first in enumeration
        out = initialize_alignment(data, 1e-4, 1e-4, 0.1, raw=True)
        np.testing.assert_array_equal(round_to_permutation(out), np.eye(n))

    def test_planted_permutation_top1(self):
        inst = generate(GenConfig(n=5, dbar=2, dx=4, dy=4, seed=11))
        data = DatasetPair(inst.data.X, inst.data.X @ inst.P_true.T)
        out = initialize_alignment(data, 1e-4, 1e-4, 0.1, raw=True)
        from acca.metrics import topk_accuracy

        assert topk_accuracy(out.P, inst.P_true, 1) == 1.0

    def test_feasibility_report(self):
        inst = generate(GenConfig(seed=2))
        out = initialize_alignment(inst.data, 1e-4, 1e-4, 0.1)
        r = out.feasibility_report
        assert r["min_entry"] >= -1e-8 and r["max_entry"] <= 1 + 1e-8
        assert r["max_row_sum_dev"] <= 1e-6
        assert r["max_row_entropy"] <= 0.1 + 1e-4

    def test_raw_requires_equal_dims(self):
        inst = generate(GenConfig(seed=2))
        with pytest.raises(ParameterError):
            initialize_alignment(inst.data, 1e-4, 1e-4, 0.1, raw=True)

    def test_deterministic(self):
        inst = generate(GenConfig(seed=4))
        a = initialize_alignment(inst.data, 1e-4, 1e-4, 0.5)
        b = initialize_alignment(inst.data, 1e-4, 1e-4, 0.5)
        assert np.array_equal(a.P, b.P)

    def test_entropy_schedule(self):
        sched = entropy_schedule(20, 0.1, 8)
        assert sched[0] == pytest.approx(np.log(20)) and sched[-1] == pytest.approx(0.1)
        assert np.all(np.diff(sched) < 0)
        assert entropy_schedule(20, 0.1, 1) == [0.1]


class TestReconcileViews:
    def test_canonical_frame_matches_planted_alignment(self):
        inst = generate(GenConfig(seed=5))
        Xt, Yt = reconcile_views(inst.data.X, inst.data.Y)
        assert Xt.shape == Yt.shape == (2, 20)
        np.testing.assert_allclose(Yt @ inst.P_true, Xt, atol=1e-8)

    def test_svd_frame_shapes(self):
        inst = generate(GenConfig(seed=5))
        Xt, Yt = reconcile_views(inst.data.X, inst.data.Y, frame="svd")
        assert Xt.shape == Yt.shape == (2, 20)

    def test_unknown_frame(self):
        with pytest.raises(ParameterError):
            reconcile_views(np.eye(2), np.eye(2), frame="nope")


class TestRounding:
    def test_permutation_unchanged(self, rng):
        P = np.eye(5)[rng.permutation(5)]
        np.testing.assert_array_equal(round_to_permutation(P), P)

    def test_uniform_gives_identity(self):
        np.testing.assert_array_equal(round_to_permutation(np.full((4, 4), 0.25)), np.eye(4))

    def test_greedy_trace(self):
        P = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.1, 0.2, 0.7]])
        np.testing.assert_array_equal(round_to_permutation(P), np.eye(3))
