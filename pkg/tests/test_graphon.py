import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphperc import graphon
from graphperc.graphon import KernelError, StepKernel

from oracles import brute_cut_norm, brute_irreducible, eig2_top

DIAG = StepKernel.equal_blocks([[1, 0], [0, 1]])


def random_kernel(rng, m, lo=0.0, hi=4.0, signed=False):
    mu = rng.dirichlet(np.ones(m))
    mu = mu / mu.sum()
    mu[-1] = 1.0 - mu[:-1].sum()
    V = rng.uniform(lo, hi, size=(m, m))
    if signed:
        V = V - hi / 2
    V = (V + V.T) / 2
    return StepKernel(mu, V)


@st.composite
def kernels(draw, max_m=5, signed=False):
    m = draw(st.integers(1, max_m))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_kernel(np.random.default_rng(seed), m, signed=signed)


class TestStepKernel:
    def test_rejects_asymmetric(self):
        with pytest.raises(KernelError):
            StepKernel([0.5, 0.5], [[1, 2], [3, 1]])

    def test_rejects_bad_measures(self):
        with pytest.raises(KernelError):
            StepKernel([0.5, 0.4], [[1, 0], [0, 1]])
        with pytest.raises(KernelError):
            StepKernel([1.0, 0.0], [[1, 0], [0, 1]])

    def test_nonnegative_flag(self):
        assert DIAG.nonnegative
        assert not StepKernel.equal_blocks([[1, -1], [-1, 1]]).nonnegative

    def test_sup_norm(self):
        assert StepKernel.equal_blocks([[1, -3], [-3, 2]]).sup_norm == 3

    def test_immutable(self):
        with pytest.raises(ValueError):
            DIAG.values[0, 0] = 5.0

    def test_json_roundtrip(self):
        W = StepKernel([0.25, 0.75], [[4, 1], [1, 0]])
        assert StepKernel.from_json(W.to_json()) == W
        assert json.loads(W.to_json()) == {"block_measures": [0.25, 0.75],
                                           "values": [[4.0, 1.0], [1.0, 0.0]]}

    def test_json_loader_rejects_asymmetry(self):
        text = json.dumps({"block_measures": [0.5, 0.5], "values": [[0, 1], [1.1, 0]]})
        with pytest.raises(KernelError):
            StepKernel.from_json(text)


class TestEval:
    def test_constant(self):
        W = StepKernel.constant(0.7)
        assert graphon.eval(W, 0.0, 1.0) == 0.7
        assert graphon.eval(W, 0.3, 0.9) == 0.7

    def test_off_diagonal_block(self):
        assert graphon.eval(DIAG, 0.25, 0.75) == 0

    def test_half_open_boundary(self):
        assert graphon.eval(DIAG, 0.5, 0.75) == 1

    def test_last_block_closed(self):
        assert graphon.eval(DIAG, 1.0, 1.0) == 1

    @pytest.mark.parametrize("x,y", [(-0.1, 0.5), (0.5, 1.01)])
    def test_domain(self, x, y):
        with pytest.raises(KernelError):
            graphon.eval(DIAG, x, y)

    @given(kernels(), st.floats(0, 1), st.floats(0, 1))
    def test_symmetric(self, W, x, y):
        assert graphon.eval(W, x, y) == graphon.eval(W, y, x)


class TestDegreeAndOperator:
    def test_constant_degree(self):
        assert np.allclose(graphon.degree_function(StepKernel.constant(3.0)), [3.0])

    def test_bipartite_degree(self):
        W = StepKernel.equal_blocks([[0, 2], [2, 0]])
        assert np.allclose(graphon.degree_function(W), [1, 1])

    def test_unequal_blocks(self):
        W = StepKernel([0.25, 0.75], [[4, 0], [0, 4]])
        # hand computation: 0.25*4 and 0.75*4
        assert np.allclose(graphon.degree_function(W), [1, 3])

    def test_unequal_blocks_mc_offspring(self):
        from graphperc.branching import simulate_many
        W = StepKernel([0.25, 0.75], [[4, 0], [0, 4]])
        for block, lam in [(0, 1.0), (1, 3.0)]:
            tot, _ = simulate_many(W, 20000, 11 + block, cap=2, root_block=block)
            # with cap 2 we only learn P(no child) = exp(-lambda)
            p0 = np.mean(tot == 1)
            se = np.sqrt(np.exp(-lam) * (1 - np.exp(-lam)) / 20000)
            assert abs(p0 - np.exp(-lam)) < 4 * se

    def test_degree_rejects_signed(self):
        with pytest.raises(KernelError):
            graphon.degree_function(StepKernel.equal_blocks([[1, -1], [-1, 1]]))

    def test_apply_T_ones_is_degree(self):
        W = StepKernel([0.2, 0.3, 0.5], [[1, 2, 0], [2, 0, 1], [0, 1, 3]])
        assert np.allclose(graphon.apply_T(W, np.ones(3)), graphon.degree_function(W))

    def test_apply_T_zero_kernel(self):
        W = StepKernel.equal_blocks(np.zeros((3, 3)))
        assert np.all(graphon.apply_T(W, [1.0, -2.0, 3.0]) == 0)

    def test_apply_T_constant(self):
        assert np.allclose(graphon.apply_T(StepKernel.constant(2.5), [1.0]), [2.5])

    def test_apply_T_dimension_mismatch(self):
        with pytest.raises(KernelError):
            graphon.apply_T(DIAG, [1.0, 2.0, 3.0])

    @given(kernels(signed=True), st.floats(-3, 3), st.integers(0, 2**31))
    def test_apply_T_linear(self, W, alpha, seed):
        rng = np.random.default_rng(seed)
        f, g = rng.normal(size=W.m), rng.normal(size=W.m)
        lhs = graphon.apply_T(W, alpha * f + g)
        rhs = alpha * graphon.apply_T(W, f) + graphon.apply_T(W, g)
        assert np.allclose(lhs, rhs, atol=1e-12, rtol=0)


class TestOperatorNorm:
    def test_constant(self):
        assert graphon.operator_norm(StepKernel.constant(1.7)) == pytest.approx(1.7, rel=1e-10)

    @pytest.mark.parametrize("a,b", [(3, 1), (0, 2), (1, 0), (2.5, 0.3), (0.1, 4)])
    def test_two_equal_blocks(self, a, b):
        # 0.5*[[a,b],[b,a]] has eigenvalues (a +- b)/2
        expected = eig2_top(a / 2, b / 2, a / 2)
        assert expected == pytest.approx((a + b) / 2)
        assert graphon.operator_norm(StepKernel.equal_blocks([[a, b], [b, a]])) == \
            pytest.approx(expected, rel=1e-9)

    def test_bipartite_kernel_not_fooled_by_negative_eigenvalue(self):
        W = StepKernel.equal_blocks([[0, 2], [2, 0]])
        assert graphon.operator_norm(W) == pytest.approx(1.0, rel=1e-9)

    def test_rejects_signed(self):
        with pytest.raises(KernelError):
            graphon.operator_norm(StepKernel.equal_blocks([[1, -1], [-1, 1]]))

    @settings(max_examples=50)
    @given(kernels(), st.floats(0.01, 10))
    def test_homogeneous(self, W, c):
        assert graphon.operator_norm(graphon.scale(W, c)) == \
            pytest.approx(c * graphon.operator_norm(W), rel=1e-8, abs=1e-12)

    @settings(max_examples=50)
    @given(kernels())
    def test_bounded_by_sup_norm(self, W):
        assert graphon.operator_norm(W) <= W.sup_norm * (1 + 1e-9)

    @settings(max_examples=50)
    @given(kernels())
    def test_matches_dense_eigensolver(self, W):
        top = np.linalg.eigvalsh(graphon.symmetrized_matrix(W))[-1]
        assert graphon.operator_norm(W) == pytest.approx(top, rel=1e-8, abs=1e-12)

    def test_scale_by_two(self):
        W = StepKernel([0.3, 0.7], [[1, 2], [2, 0.5]])
        assert graphon.operator_norm(graphon.scale(W, 2)) == \
            pytest.approx(2 * graphon.operator_norm(W), rel=1e-9)


class TestIrreducible:
    def test_block_diagonal(self):
        assert not graphon.is_irreducible(DIAG)

    def test_positive(self):
        assert graphon.is_irreducible(StepKernel.equal_blocks(np.ones((4, 4))))

    def test_bipartite(self):
        V = [[0, 1], [1, 0]]
        assert brute_irreducible(V)
        assert graphon.is_irreducible(StepKernel.equal_blocks(V))

    @settings(max_examples=100)
    @given(st.integers(1, 8), st.integers(0, 2**31), st.floats(0.2, 0.9))
    def test_agrees_with_brute_force(self, m, seed, density):
        rng = np.random.default_rng(seed)
        mask = rng.random((m, m)) < density
        mask = np.triu(mask) | np.triu(mask).T
        V = np.where(mask, rng.uniform(0.1, 2, (m, m)), 0.0)
        V = (V + V.T) / 2
        assert graphon.is_irreducible(StepKernel.equal_blocks(V)) == brute_irreducible(V)

    def test_irreducible_parts(self):
        W = StepKernel([0.25, 0.25, 0.5], [[4, 0, 0], [0, 0, 2], [0, 2, 1]])
        parts = graphon.irreducible_parts(W)
        assert [list(idx) for idx, _ in parts] == [[0], [1, 2]]
        _, p2 = parts[1]
        assert np.allclose(p2.block_measures, [1 / 3, 2 / 3])
        assert np.allclose(p2.values, 0.75 * np.array([[0, 2], [2, 1]]))


class TestCutNorm:
    def test_nonnegative_is_total_mass(self):
        W = StepKernel([0.2, 0.8], [[1, 3], [3, 0.5]])
        total = sum(W.block_measures[i] * W.block_measures[j] * W.values[i, j]
                    for i in range(2) for j in range(2))
        assert graphon.cut_norm(W) == pytest.approx(total)

    def test_zero(self):
        assert graphon.cut_norm(StepKernel.equal_blocks(np.zeros((3, 3)))) == 0

    def test_checkerboard(self):
        V = [[1, -1], [-1, 1]]
        assert brute_cut_norm([0.5, 0.5], V) == pytest.approx(0.25)
        assert graphon.cut_norm(StepKernel.equal_blocks(V)) == pytest.approx(0.25)

    @settings(max_examples=40)
    @given(kernels(max_m=4, signed=True))
    def test_matches_brute_force(self, K):
        assert graphon.cut_norm(K) == pytest.approx(
            brute_cut_norm(K.block_measures, K.values), rel=1e-12, abs=1e-14)

    @settings(max_examples=40)
    @given(st.integers(0, 2**31))
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 7))
        mu = np.full(m, 1.0 / m)
        ks = []
        for _ in range(2):
            V = rng.normal(size=(m, m))
            ks.append(StepKernel(mu, (V + V.T) / 2))
        s = StepKernel(mu, ks[0].values + ks[1].values)
        assert graphon.cut_norm(s) <= graphon.cut_norm(ks[0]) + graphon.cut_norm(ks[1]) + 1e-12

    @settings(max_examples=30)
    @given(kernels(max_m=6, signed=True))
    def test_positive_for_nonzero_kernel(self, K):
        if np.any(K.values != 0):
            assert graphon.cut_norm(K) > 0

    def test_scale_zero(self):
        assert graphon.cut_norm(graphon.scale(DIAG, 0)) == 0

    def test_heuristic_regime_is_lower_bound(self):
        rng = np.random.default_rng(5)
        m = 22
        V = rng.normal(size=(m, m))
        K = StepKernel(np.full(m, 1 / m), (V + V.T) / 2)
        assert not graphon.cut_norm_is_exact(K)
        heuristic = graphon.cut_norm(K)
        exact = graphon._cut_norm_exact(
            K.block_measures[:, None] * K.values * K.block_measures[None, :])
        assert heuristic <= exact + 1e-12
        assert heuristic >= 0.9 * exact


class TestCutDistance:
    def test_identity(self):
        W = StepKernel([0.25, 0.75], [[1, 2], [2, 0]])
        assert graphon.cut_distance(W, W).value == 0

    @pytest.mark.parametrize("perm", [(1, 0, 2), (2, 1, 0), (1, 2, 0)])
    def test_rearrangement(self, perm):
        W = StepKernel.equal_blocks([[1, 2, 0], [2, 0, 3], [0, 3, 1]])
        d = graphon.cut_distance(W, graphon.permute(W, perm))
        assert d.exact and d.value == pytest.approx(0, abs=1e-15)

    @pytest.mark.parametrize("a,b", [(1.0, 0.3), (0.2, 2.0), (1.5, 1.5)])
    def test_constants(self, a, b):
        diff = StepKernel.constant(a - b)
        assert graphon.cut_norm(diff) == pytest.approx(abs(a - b))
        d = graphon.cut_distance(StepKernel.constant(a), StepKernel.constant(b))
        assert d.value == pytest.approx(abs(a - b))

    def test_refinement_of_unequal_blocks(self):
        W1 = StepKernel([0.25, 0.75], [[1, 0], [0, 1]])
        W2 = StepKernel([0.5, 0.5], [[1, 0], [0, 1]])
        d = graphon.cut_distance(W1, W2)
        assert d.exact
        assert d.value <= graphon.cut_norm(W1 - W2) + 1e-15

    def test_incommensurable(self):
        W1 = StepKernel([1 / np.pi, 1 - 1 / np.pi], [[1, 0], [0, 1]])
        with pytest.raises(KernelError):
            graphon.cut_distance(W1, DIAG)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31))
    def test_bounded_by_identity_alignment(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 5))
        U, V = rng.uniform(0, 2, (2, m, m))
        W1 = StepKernel.equal_blocks(U + U.T)
        W2 = StepKernel.equal_blocks(V + V.T)
        assert graphon.cut_distance(W1, W2).value <= graphon.cut_norm(W1 - W2) + 1e-12

    def test_heuristic_above_eight_blocks(self):
        W = StepKernel.equal_blocks(np.eye(10))
        perm = [3, 1, 4, 0, 5, 9, 2, 6, 8, 7]
        d = graphon.cut_distance(W, graphon.permute(W, perm), anneal_steps=200)
        assert not d.exact
        assert d.value <= graphon.cut_norm(W - graphon.permute(W, perm)) + 1e-15


class TestScale:
    def test_identity(self):
        assert graphon.scale(DIAG, 1) == DIAG

    def test_measures_kept(self):
        W = StepKernel([0.1, 0.9], [[1, 1], [1, 1]])
        assert np.array_equal(graphon.scale(W, 3).block_measures, W.block_measures)

    def test_negative_rejected(self):
        with pytest.raises(KernelError):
            graphon.scale(DIAG, -1)


def test_coarsen_preserves_mass():
    W = StepKernel([0.3, 0.7], [[2, 1], [1, 0]])
    C = graphon.coarsen(W, 4)
    assert C.m == 4
    assert graphon.cut_norm(C) == pytest.approx(graphon.cut_norm(W))
