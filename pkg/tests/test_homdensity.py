import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphperc.branching import point_mass
from graphperc.graphon import StepKernel
from graphperc.homdensity import (
    EDGE, PATH3, TRIANGLE, BudgetError, PatternGraph, binomial_expansion_lhs,
    binomial_expansion_rhs, convergence_diagnostic, double_star, expected_n2_limit,
    joint_moment, parse_pattern, t_graph, t_kernel,
)
from graphperc.weighted_graph import (WeightedGraph, blowup, complete_graph, empirical_graphon,
                                      sample_dense)

from oracles import brute_hom_density

TWO_BLOCK = StepKernel([0.4, 0.6], [[3.0, 0.5], [0.5, 1.0]])
C4 = PatternGraph(4, ((0, 1), (1, 2), (2, 3), (0, 3)))
PATTERNS = [EDGE, PATH3, TRIANGLE, C4, double_star(1, 2), PatternGraph(3, ()),
            PatternGraph(4, ((0, 1),))]


def random_graph(rng, n):
    B = np.triu(rng.uniform(0, 2, (n, n)), 1)
    return WeightedGraph(B + B.T)


class TestPatterns:
    def test_validation(self):
        with pytest.raises(ValueError):
            PatternGraph(2, ((0, 0),))
        with pytest.raises(ValueError):
            PatternGraph(2, ((0, 1), (1, 0)))
        with pytest.raises(ValueError):
            PatternGraph(11, ())

    def test_forest(self):
        assert PATH3.is_forest() and not TRIANGLE.is_forest()

    def test_parse(self):
        assert parse_pattern("triangle") == TRIANGLE
        assert parse_pattern("S12") == double_star(1, 2)
        assert parse_pattern("S_1_2") == double_star(1, 2)
        assert parse_pattern([[0, 1], [1, 2]]) == PATH3
        with pytest.raises(ValueError):
            parse_pattern("hexagon")

    def test_double_star_shape(self):
        S = double_star(2, 1)
        assert S.k == 5 and len(S.edges) == 4
        with pytest.raises(ValueError):
            double_star(5, 4)


class TestGraphDensity:
    def test_complete_graph(self):
        n = 6
        G = complete_graph(n)
        assert t_graph(EDGE, G) == pytest.approx((n - 1) / n)
        assert t_graph(TRIANGLE, G) == pytest.approx((n - 1) * (n - 2) / n ** 2)
        assert t_graph(PATH3, G) == pytest.approx((n - 1) ** 2 / n ** 2)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**31), st.sampled_from(range(len(PATTERNS))))
    def test_brute_force(self, n, seed, idx):
        F = PATTERNS[idx]
        G = random_graph(np.random.default_rng(seed), n)
        ref = brute_hom_density(F.k, F.edges, G.beta, np.full(n, 1 / n))
        assert t_graph(F, G) == pytest.approx(ref, rel=1e-10, abs=1e-14)

    @pytest.mark.parametrize("F", PATTERNS, ids=lambda F: F.name)
    def test_empirical_graphon(self, F):
        G = sample_dense(TWO_BLOCK, 12, 3)
        assert t_graph(F, G) == pytest.approx(t_kernel(F, empirical_graphon(G)), rel=1e-12)

    def test_multiplicative_over_disjoint_union(self):
        G = sample_dense(TWO_BLOCK, 10, 1)
        F = TRIANGLE.disjoint_union(PATH3)
        assert t_graph(F, G) == pytest.approx(t_graph(TRIANGLE, G) * t_graph(PATH3, G))

    def test_budget(self):
        G = complete_graph(40)
        big = PatternGraph(6, ((0, 1), (1, 2), (2, 0), (3, 4), (4, 5)))
        with pytest.raises(BudgetError):
            t_graph(big, G)


class TestKernelDensity:
    def test_constant(self):
        W = StepKernel.constant(0.5)
        assert t_kernel(EDGE, W) == pytest.approx(0.5)
        assert t_kernel(TRIANGLE, W) == pytest.approx(0.125)
        assert t_kernel(double_star(2, 2), W) == pytest.approx(0.5 ** 5)

    def test_block_diagonal_triangle(self):
        W = StepKernel.equal_blocks([[1, 0], [0, 1]])
        assert t_kernel(TRIANGLE, W) == pytest.approx(0.25)

    @pytest.mark.parametrize("F", PATTERNS, ids=lambda F: F.name)
    def test_brute_force(self, F):
        W = StepKernel([0.2, 0.3, 0.5], [[0, 2, 1], [2, 0.5, 0], [1, 0, 3]])
        ref = brute_hom_density(F.k, F.edges, W.values, W.block_measures)
        assert t_kernel(F, W) == pytest.approx(ref, rel=1e-12)

    def test_bounded_for_graphons(self):
        W = StepKernel([0.3, 0.7], [[0.2, 0.9], [0.9, 0.4]])
        for F in PATTERNS:
            assert 0 <= t_kernel(F, W) <= 1

    def test_blowup_converges(self):
        devs = [abs(t_graph(TRIANGLE, blowup(TWO_BLOCK, n)) - t_kernel(TRIANGLE, TWO_BLOCK))
                for n in (20, 80, 320)]
        assert devs[0] > devs[1] > devs[2]


class TestMoments:
    @pytest.mark.parametrize("t1,t2", [(0, 0), (1, 0), (2, 1), (3, 3)])
    def test_joint_moment_is_double_star_density(self, t1, t2):
        G = sample_dense(TWO_BLOCK, 15, 4)
        assert joint_moment(G, t1, t2) == pytest.approx(t_graph(double_star(t1, t2), G),
                                                         rel=1e-10)

    @pytest.mark.parametrize("t", range(0, 6))
    def test_binomial_expansion(self, t):
        G = sample_dense(TWO_BLOCK, 20, 2)
        assert binomial_expansion_lhs(G, t) == pytest.approx(binomial_expansion_rhs(G, t),
                                                              rel=1e-12)

    @pytest.mark.parametrize("W", [StepKernel.constant(1.3), TWO_BLOCK,
                                   StepKernel([0.2, 0.8], [[0, 4], [4, 0.5]])])
    def test_expected_n2(self, W):
        assert expected_n2_limit(W) == pytest.approx(point_mass(W, 2), abs=1e-12)

    @pytest.mark.parametrize("c", [0.5, 1.0, 2.5])
    def test_expected_n2_constant(self, c):
        assert expected_n2_limit(StepKernel.constant(c)) == pytest.approx(c * np.exp(-2 * c),
                                                                          rel=1e-13)

    def test_expected_n2_double_star_series(self):
        # sum over t1, t2 of (-1)^(t1+t2) / (t1! t2!) t(S_{t1,t2}, W)
        W = StepKernel([0.3, 0.7], [[0.6, 0.3], [0.3, 0.2]])
        total = sum((-1) ** (a + b) / (math.factorial(a) * math.factorial(b))
                    * t_kernel(double_star(a, b), W)
                    for a in range(8) for b in range(8 - a))
        # degrees are below 0.4, so the truncated tail is far below 1e-6
        assert total == pytest.approx(expected_n2_limit(W), abs=1e-6)

    def test_negative_power(self):
        with pytest.raises(ValueError):
            joint_moment(complete_graph(3), -1, 0)


class TestConvergenceDiagnostic:
    def test_rows_and_cut(self):
        graphs = [blowup(TWO_BLOCK, n) for n in (10, 40)]
        out = convergence_diagnostic(graphs, TWO_BLOCK, ["edge", "triangle"], anneal_steps=50)
        assert len(out["rows"]) == 4
        assert {r["pattern"] for r in out["rows"]} == {EDGE.name, TRIANGLE.name}
        for r in out["rows"]:
            assert r["abs_dev"] == pytest.approx(abs(r["t_graph"] - r["t_kernel"]))
        assert [c["n"] for c in out["cut"]] == [10, 40]
        assert all(c["cut_distance"] >= 0 for c in out["cut"])

    def test_no_cut(self):
        out = convergence_diagnostic([complete_graph(5)], StepKernel.constant(1.0), ["edge"],
                                     cut_proxy=False)
        assert out["cut"] == []
        assert out["rows"][0]["abs_dev"] == pytest.approx(0.2)
