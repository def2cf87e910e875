"""Weighted graphs (symmetric nonnegative edge weights, zero diagonal).

:class:`WeightedGraph` stores the full ``n x n`` weight matrix.
:class:`BlockWeightedGraph` stores only a block structure (a vertex type per
vertex plus an ``m x m`` value table) and is what the percolation samplers
use at sizes where the dense matrix would not fit in memory.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from graphperc import graphon
from graphperc.graphon import StepKernel
from graphperc.seeding import make_rng
from graphperc.spectral import power_iteration, top_eigenvalue_dense

EXACT_CUT_MAX_VERTICES = 24


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    beta: np.ndarray
    types: np.ndarray | None = None
    beta_max: float = field(init=False)

    def __post_init__(self):
        b = np.array(self.beta, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise GraphError("beta must be a square matrix")
        if b.size and b.min() < 0:
            raise GraphError("edge weights must be nonnegative")
        if not np.array_equal(b, b.T):
            raise GraphError("beta must be symmetric")
        if np.any(np.diag(b) != 0):
            raise GraphError("beta must have zero diagonal")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "beta_max", float(b.max()) if b.size else 0.0)

    @property
    def n(self) -> int:
        return self.beta.shape[0]

    def degrees(self) -> np.ndarray:
        return self.beta.sum(axis=1)

    def dense(self) -> "WeightedGraph":
        return self

    def relabel(self, perm) -> "WeightedGraph":
        perm = np.asarray(perm)
        return WeightedGraph(self.beta[np.ix_(perm, perm)])


@dataclass(frozen=True, eq=False)
class BlockWeightedGraph:
    """Graph with ``beta_ij = values[t_i, t_j]`` for ``i != j``.

    ``types`` must be sorted so each block occupies a contiguous range of
    vertex labels; ``block_sizes`` is derived from it.
    """

    types: np.ndarray
    values: np.ndarray
    block_sizes: np.ndarray = field(init=False)

    def __post_init__(self):
        t = np.asarray(self.types, dtype=np.int64)
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or not np.array_equal(v, v.T):
            raise GraphError("values must be a symmetric square matrix")
        if v.size and v.min() < 0:
            raise GraphError("edge weights must be nonnegative")
        if t.size and (np.any(np.diff(t) < 0) or t[0] < 0 or t[-1] >= v.shape[0]):
            raise GraphError("types must be sorted block indices")
        t.setflags(write=False)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "types", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "block_sizes", np.bincount(t, minlength=v.shape[0]))

    @property
    def n(self) -> int:
        return self.types.size

    @property
    def beta_max(self) -> float:
        s = self.block_sizes
        present = s > 0
        off = self.values[np.ix_(present, present)].copy()
        # a block of one vertex has no internal pair
        lone = np.flatnonzero(s[present] == 1)
        off[lone, lone] = 0.0
        return float(off.max()) if off.size else 0.0

    def degrees(self) -> np.ndarray:
        s = self.block_sizes
        per_block = self.values @ s - np.diag(self.values)
        return per_block[self.types]

    def dense(self) -> WeightedGraph:
        b = self.values[np.ix_(self.types, self.types)].copy()
        np.fill_diagonal(b, 0.0)
        return WeightedGraph(b)


AnyGraph = WeightedGraph | BlockWeightedGraph


# -- generators -------------------------------------------------------------

def complete_graph(n: int) -> WeightedGraph:
    if n < 1:
        raise GraphError("n must be positive")
    b = np.ones((n, n))
    np.fill_diagonal(b, 0.0)
    return WeightedGraph(b)


def blowup_types(W: StepKernel, n: int) -> np.ndarray:
    mids = (np.arange(1, n + 1) - 0.5) / n
    return graphon.block_index(W, mids)


def blowup(W: StepKernel, n: int, lazy: bool = False) -> AnyGraph:
    """Deterministic graph with ``beta_ij = W((i-1/2)/n, (j-1/2)/n)``.

    ``lazy=True`` returns the block representation instead of an ``n x n``
    matrix; both describe the same weights.
    """
    if n < 1:
        raise GraphError("n must be positive")
    if not W.nonnegative:
        raise GraphError("blowup requires a nonnegative kernel")
    g = BlockWeightedGraph(blowup_types(W, n), W.values)
    return g if lazy else g.dense()


def sample_dense(W: StepKernel, n: int, rng_seed) -> WeightedGraph:
    """Weights ``W(X_i, X_j)`` at independent uniform types ``X_i``.

    The block index of every vertex is kept in ``types``.
    """
    if n < 1:
        raise GraphError("n must be positive")
    if not W.nonnegative:
        raise GraphError("sample_dense requires a nonnegative kernel")
    rng = make_rng(rng_seed)
    x = rng.random(n)
    t = graphon.block_index(W, x)
    t = np.atleast_1d(t)
    b = W.values[np.ix_(t, t)].copy()
    np.fill_diagonal(b, 0.0)
    return WeightedGraph(b, types=t)


# -- queries -----------------------------------------------------------------

def weighted_degree(G: AnyGraph, v: int) -> float:
    if not 0 <= v < G.n:
        raise GraphError(f"vertex {v} out of range for n={G.n}")
    if isinstance(G, BlockWeightedGraph):
        return float(G.degrees()[v])
    return float(G.beta[v].sum())


def top_eigenvalue(G: AnyGraph, rtol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest eigenvalue of the weight matrix (power iteration).

    For a block graph only block-constant eigenvectors can carry a positive
    eigenvalue; the remaining ones (zero-sum inside a block ``a``) have
    eigenvalue ``-values[a, a]``. So it suffices to iterate on the
    ``m x m`` matrix ``sqrt(s_a s_b) V_ab - delta_ab V_aa``.
    """
    if G.n < 1:
        raise GraphError("empty graph")
    if isinstance(G, WeightedGraph):
        return top_eigenvalue_dense(G.beta, rtol, max_iter)
    s = G.block_sizes.astype(float)
    present = s > 0
    s = s[present]
    V = G.values[np.ix_(present, present)]
    r = np.sqrt(s)
    S = r[:, None] * V * r[None, :] - np.diag(np.diag(V))
    shift = float(np.abs(S).sum(axis=1).max())
    top = power_iteration(S.__matmul__, S.shape[0], shift, rtol, max_iter)
    inner = -np.diag(V)[s >= 2]
    return float(max(top, inner.max())) if inner.size else float(top)


def _indicator(n: int, A) -> np.ndarray:
    x = np.zeros(n)
    x[np.fromiter(A, dtype=np.int64)] = 1.0
    return x


def cut_weight(G: WeightedGraph, A, B) -> float:
    """``e(A, B) = sum_{v in A} sum_{w in B} beta_vw`` (sets may overlap)."""
    G = G.dense()
    a = _indicator(G.n, A)
    b = _indicator(G.n, B)
    return float(a @ G.beta @ b)


class ABCut(NamedTuple):
    witness: frozenset | None
    exact: bool
    cut_weight: float | None


def _abcut_exact(beta: np.ndarray, lo: int, hi: int, bound: float):
    n = beta.shape[0]
    d = beta.sum(axis=1)
    # vertex n-1 always on the complement side: X and X^c play symmetric roles
    free = n - 1
    h1 = free // 2
    h2 = free - h1
    L = np.arange(h1)
    H = np.arange(h1, free)
    SL = _bits(h1)
    SH = _bits(h2)
    qL = d[L] @ SL.T - np.einsum("ci,ij,cj->c", SL, beta[np.ix_(L, L)], SL)
    qH = d[H] @ SH.T - np.einsum("ci,ij,cj->c", SH, beta[np.ix_(H, H)], SH)
    cross = 2 * SL @ beta[np.ix_(L, H)] @ SH.T
    cut = qL[:, None] + qH[None, :] - cross
    size = SL.sum(axis=1)[:, None] + SH.sum(axis=1)[None, :]
    feasible = (size >= lo) & (size <= hi)
    if not feasible.any():
        return None, None
    masked = np.where(feasible, cut, np.inf)
    i, j = np.unravel_index(np.argmin(masked), masked.shape)
    best = float(masked[i, j])
    if best > bound:
        return None, best
    X = [int(v) for v in L[SL[i] > 0]] + [int(v) for v in H[SH[j] > 0]]
    return frozenset(X), best


def _bits(k: int) -> np.ndarray:
    codes = np.arange(1 << k, dtype=np.int64)
    return ((codes[:, None] >> np.arange(k)) & 1).astype(float)


def _abcut_heuristic(beta: np.ndarray, lo: int, hi: int, seed: int = 0):
    n = beta.shape[0]
    d = beta.sum(axis=1)
    L = np.diag(d) - beta
    _, vecs = np.linalg.eigh(L)
    fiedler = vecs[:, 1] if n > 1 else np.zeros(n)
    order = np.argsort(fiedler, kind="stable")
    best_x, best_cut = None, np.inf
    for k in range(lo, hi + 1):
        x = np.zeros(n)
        x[order[:k]] = 1.0
        x, c = _kl_refine(beta, d, x, lo, hi)
        if c < best_cut:
            best_x, best_cut = x, c
    return frozenset(int(v) for v in np.flatnonzero(best_x)), float(best_cut)


def _kl_refine(beta, d, x, lo, hi, max_rounds: int = 50):
    """Greedy single-vertex moves and swaps while the cut decreases."""
    def cut_of(x):
        return float(x @ d - x @ beta @ x)

    cur = cut_of(x)
    for _ in range(max_rounds):
        # change in cut weight when v switches sides
        inner = beta @ x
        outer = d - inner
        gain_move = np.where(x > 0, inner - outer, outer - inner)
        size = int(x.sum())
        improved = False
        for v in np.argsort(gain_move):
            if gain_move[v] >= -1e-15:
                break
            new_size = size - 1 if x[v] > 0 else size + 1
            if lo <= new_size <= hi:
                x = x.copy()
                x[v] = 1.0 - x[v]
                cur = cut_of(x)
                improved = True
                break
        if improved:
            continue
        ins = np.flatnonzero(x > 0)
        outs = np.flatnonzero(x == 0)
        if ins.size == 0 or outs.size == 0:
            break
        g = (gain_move[ins][:, None] + gain_move[outs][None, :]
             + 2 * beta[np.ix_(ins, outs)])
        i, j = np.unravel_index(np.argmin(g), g.shape)
        if g[i, j] >= -1e-15:
            break
        x = x.copy()
        x[ins[i]], x[outs[j]] = 0.0, 1.0
        cur = cut_of(x)
    return x, cur


def find_ab_cut(G: AnyGraph, a: float, b: float) -> ABCut:
    """Look for ``X`` with ``an <= |X| <= (1-a)n`` and ``e(X, X^c) <= b n^2``.

    Exhaustive for ``n <= 24`` (so a ``None`` witness is a proof of absence);
    larger graphs use a spectral split refined by local moves, and a
    ``None`` witness there only means none was found.
    """
    if not 0 < a <= 0.5:
        raise GraphError("a must lie in (0, 0.5]")
    G = G.dense()
    n = G.n
    lo = int(np.ceil(a * n - 1e-12))
    hi = int(np.floor((1 - a) * n + 1e-12))
    lo = max(lo, 1)
    bound = b * n * n
    if lo > hi or n < 2:
        return ABCut(None, n <= EXACT_CUT_MAX_VERTICES, None)
    if n <= EXACT_CUT_MAX_VERTICES:
        X, best = _abcut_exact(G.beta, lo, hi, bound)
        return ABCut(X, True, best)
    X, best = _abcut_heuristic(G.beta, lo, hi)
    if best > bound:
        return ABCut(None, False, best)
    return ABCut(X, False, best)


def is_ab_cut(G: AnyGraph, X, a: float, b: float) -> bool:
    G = G.dense()
    n = G.n
    X = set(X)
    comp = set(range(n)) - X
    return (a * n - 1e-12 <= len(X) <= (1 - a) * n + 1e-12
            and cut_weight(G, X, comp) <= b * n * n)


def empirical_graphon(G: AnyGraph) -> StepKernel:
    G = G.dense()
    if G.n < 1:
        raise GraphError("empty graph")
    return StepKernel(np.full(G.n, 1.0 / G.n), G.beta)


# -- I/O -----------------------------------------------------------------------

def write_graph(G: AnyGraph, path) -> None:
    """Text format: ``n`` on the first line, then ``i j beta_ij`` for i < j."""
    G = G.dense()
    iu, ju = np.nonzero(np.triu(G.beta, 1))
    with open(path, "w") as fh:
        fh.write(f"{G.n}\n")
        for i, j in zip(iu, ju):
            fh.write(f"{i} {j} {float(G.beta[i, j])!r}\n")


def read_graph(path, density_warning: float = 0.01) -> WeightedGraph:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise GraphError(f"{path}: empty graph file")
    n = int(lines[0][0])
    b = np.zeros((n, n))
    for k, parts in enumerate(lines[1:], start=2):
        if len(parts) != 3:
            raise GraphError(f"{path}:{k}: expected 'i j weight'")
        i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise GraphError(f"{path}:{k}: bad vertex pair ({i}, {j})")
        b[i, j] = b[j, i] = w
    G = WeightedGraph(b)
    if n and G.degrees().mean() < density_warning * n:
        warnings.warn(f"{path}: average weighted degree below {density_warning}*n; "
                      "graph is not in the dense regime", stacklevel=2)
    return G


def graph_from_config(cfg: dict, lazy: bool = False) -> AnyGraph:
    """Build a graph from ``{"kind": ..., "n": ..., "kernel": ..., "seed": ...}``."""
    kind = cfg.get("kind")
    n = int(cfg["n"])
    if kind == "complete":
        if lazy:
            return BlockWeightedGraph(np.zeros(n, dtype=np.int64), [[1.0]])
        return complete_graph(n)
    W = cfg["kernel"]
    if not isinstance(W, StepKernel):
        W = StepKernel.from_dict(W)
    if kind == "blowup":
        return blowup(W, n, lazy=lazy)
    if kind == "sample_dense":
        return sample_dense(W, n, cfg.get("seed", 0))
    raise GraphError(f"unknown generator kind {kind!r}")


def load_generator_config(text: str) -> dict:
    return json.loads(text)

