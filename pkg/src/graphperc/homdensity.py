"""Homomorphism densities of small patterns in weighted graphs and step kernels.

Graph and kernel densities are the same computation: a sum over all maps
of the pattern's vertices into a weighted "vertex space" (``n`` vertices of
weight ``1/n``, or ``m`` blocks of weight ``mu_i``) of the product of edge
weights. Forest patterns are evaluated by leaf-to-root message passing;
anything else goes through ``numpy.einsum`` under an operation budget.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass

import numpy as np

from graphperc import graphon
from graphperc.graphon import StepKernel
from graphperc.weighted_graph import AnyGraph, empirical_graphon

MAX_PATTERN_SIZE = 10
OP_BUDGET = 10**9
COARSE_BLOCKS = 60


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class PatternGraph:
    k: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not 1 <= self.k <= MAX_PATTERN_SIZE:
            raise ValueError(f"pattern size must be in 1..{MAX_PATTERN_SIZE}")
        seen = set()
        norm = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError("patterns may not have loops")
            if not (0 <= i < self.k and 0 <= j < self.k):
                raise ValueError(f"edge ({i}, {j}) out of range")
            e = (min(i, j), max(i, j))
            if e in seen:
                raise ValueError(f"repeated edge {e}")
            seen.add(e)
            norm.append(e)
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def name(self) -> str:
        return ",".join(f"{i}-{j}" for i, j in self.edges) or f"empty{self.k}"

    def is_forest(self) -> bool:
        parent = list(range(self.k))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in self.edges:
            ri, rj = find(i), find(j)
            if ri == rj:
                return False
            parent[ri] = rj
        return True

    def disjoint_union(self, other: "PatternGraph") -> "PatternGraph":
        shift = self.k
        return PatternGraph(self.k + other.k,
                            self.edges + tuple((i + shift, j + shift) for i, j in other.edges))


EDGE = PatternGraph(2, ((0, 1),))
PATH3 = PatternGraph(3, ((0, 1), (1, 2)))
TRIANGLE = PatternGraph(3, ((0, 1), (1, 2), (0, 2)))

NAMED_PATTERNS = {"edge": EDGE, "path3": PATH3, "triangle": TRIANGLE}


def double_star(t1: int, t2: int) -> PatternGraph:
    """An edge ``0-1`` with ``t1`` pendant edges at 0 and ``t2`` at 1."""
    if t1 < 0 or t2 < 0:
        raise ValueError("t1, t2 must be nonnegative")
    k = t1 + t2 + 2
    if k > MAX_PATTERN_SIZE:
        raise ValueError(f"double star on {k} vertices exceeds {MAX_PATTERN_SIZE}")
    edges = [(0, 1)]
    edges += [(0, 2 + i) for i in range(t1)]
    edges += [(1, 2 + t1 + i) for i in range(t2)]
    return PatternGraph(k, tuple(edges))


def parse_pattern(spec) -> PatternGraph:
    """Pattern from a name (``edge``, ``path3``, ``triangle``, ``S<t1><t2>``
    or ``S_<t1>_<t2>``) or an edge list like ``[[0, 1], [1, 2]]``."""
    if isinstance(spec, PatternGraph):
        return spec
    if isinstance(spec, str):
        if spec in NAMED_PATTERNS:
            return NAMED_PATTERNS[spec]
        if spec.startswith("S"):
            parts = spec[1:].strip("_").split("_")
            if len(parts) == 2:
                return double_star(int(parts[0]), int(parts[1]))
            if len(parts) == 1 and len(parts[0]) == 2 and parts[0].isdigit():
                return double_star(int(parts[0][0]), int(parts[0][1]))
        raise ValueError(f"unknown pattern {spec!r}")
    edges = [tuple(e) for e in spec]
    k = 1 + max(max(e) for e in edges) if edges else 1
    return PatternGraph(k, tuple(edges))


def _forest_density(F: PatternGraph, A: np.ndarray, w: np.ndarray) -> float:
    adj: list[list[int]] = [[] for _ in range(F.k)]
    for i, j in F.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * F.k
    total = 1.0
    for root in range(F.k):
        if seen[root]:
            continue
        order, parent = [], {root: -1}
        stack = [root]
        seen[root] = True
        while stack:
            v = stack.pop()
            order.append(v)
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    parent[u] = v
                    stack.append(u)
        msg: dict[int, np.ndarray] = {}
        for v in reversed(order):
            f = np.ones(A.shape[0])
            for u in adj[v]:
                if parent.get(u) == v:
                    f = f * (A @ (w * msg[u]))
            msg[v] = f
        total *= float(w @ msg[root])
    return total


def _einsum_density(F: PatternGraph, A: np.ndarray, w: np.ndarray) -> float:
    letters = string.ascii_letters
    used = sorted({v for e in F.edges for v in e})
    terms, ops = [], []
    for i, j in F.edges:
        terms.append(letters[i] + letters[j])
        ops.append(A)
    for v in used:
        terms.append(letters[v])
        ops.append(w)
    expr = ",".join(terms) + "->"
    # isolated pattern vertices contribute sum(w) each
    iso = F.k - len(used)
    return float(np.einsum(expr, *ops, optimize="greedy")) * float(w.sum()) ** iso


def _density(F: PatternGraph, A: np.ndarray, w: np.ndarray) -> float:
    if not F.edges:
        return float(w.sum()) ** F.k
    if F.is_forest():
        return _forest_density(F, A, w)
    cost = A.shape[0] ** F.k
    if cost > OP_BUDGET:
        raise BudgetError(
            f"exact density of a non-forest {F.k}-vertex pattern on {A.shape[0]} points "
            f"needs {cost:.3g} operations, above the budget of {OP_BUDGET:.0e}")
    return _einsum_density(F, A, w)


def t_graph(F: PatternGraph, G: AnyGraph) -> float:
    """``t(F, G) = n^{-k} sum over all maps [k] -> V of prod_{ij in F} beta``."""
    G = G.dense()
    n = G.n
    return _density(F, G.beta, np.full(n, 1.0 / n))


def t_kernel(F: PatternGraph, W: StepKernel) -> float:
    return _density(F, W.values, W.block_measures)


def joint_moment(G: AnyGraph, t1: int, t2: int) -> float:
    """``n^{-(t1+t2+2)} sum_{v,w} d_v^{t1} d_w^{t2} beta_vw``, from degrees."""
    if t1 < 0 or t2 < 0:
        raise ValueError("t1, t2 must be nonnegative")
    G = G.dense()
    n = G.n
    x = G.degrees() / n
    return float((x ** t1) @ G.beta @ (x ** t2)) / (n * n)


def expected_n2_limit(W: StepKernel) -> float:
    """Limit of ``E N_2 / n``: ``sum_ij mu_i mu_j W_ij e^{-lambda_i} e^{-lambda_j}``."""
    lam = graphon.degree_function(W)
    a = W.block_measures * np.exp(-lam)
    return float(a @ W.values @ a)


def convergence_diagnostic(G_seq, W: StepKernel, patterns, cut_proxy: bool = True,
                           anneal_steps: int = 300) -> dict:
    """Deviations ``|t(F, G_n) - t(F, W)|`` for every graph and pattern.

    Returns ``{"rows": [...], "cut": [...]}``. Each row has ``n``,
    ``pattern``, ``t_graph``, ``t_kernel`` and ``abs_dev``. The ``cut`` list
    holds a heuristic cut-distance estimate per graph, computed after
    averaging the empirical graphon onto at most 60 blocks.
    """
    patterns = [parse_pattern(p) for p in patterns]
    ref = {F.name: t_kernel(F, W) for F in patterns}
    rows, cuts = [], []
    for G in G_seq:
        G = G.dense()
        for F in patterns:
            tg = t_graph(F, G)
            rows.append({"n": G.n, "pattern": F.name, "t_graph": tg,
                         "t_kernel": ref[F.name], "abs_dev": abs(tg - ref[F.name])})
        if cut_proxy:
            emp = empirical_graphon(G)
            coarse = graphon.coarsen(emp, min(G.n, COARSE_BLOCKS))
            d = graphon.cut_distance(coarse, W, anneal_steps=anneal_steps)
            cuts.append({"n": G.n, "cut_distance": d.value, "exact": d.exact,
                         "label": "exact" if d.exact else "heuristic"})
    return {"rows": rows, "cut": cuts}


def binomial_expansion_lhs(G: AnyGraph, t: int) -> float:
    """``E_vw(beta_vw D_vw^t)`` with ``D_vw = (d_v + d_w)/n``, by direct
    summation over all ordered pairs."""
    G = G.dense()
    n = G.n
    x = G.degrees() / n
    D = x[:, None] + x[None, :]
    return float((G.beta * D ** t).sum()) / (n * n)


def binomial_expansion_rhs(G: AnyGraph, t: int) -> float:
    return math.fsum(math.comb(t, t1) * joint_moment(G, t1, t - t1) for t1 in range(t + 1))
