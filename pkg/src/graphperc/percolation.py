"""Random subgraphs G(p) of weighted graphs and their component census.

Randomness contract: a sample is a pure function of its inputs and a
64-bit seed (see :mod:`graphperc.seeding`). For dense graphs the edge
decisions consume uniforms in row-major upper-triangle pair order, one per
pair. Block-structured inputs are sampled per block pair instead: a
binomial edge count followed by uniform placement of that many distinct
pairs. The two routes have the same law but different random streams.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from graphperc import graphon
from graphperc.graphon import StepKernel
from graphperc.seeding import make_rng, mix
from graphperc.weighted_graph import (AnyGraph, BlockWeightedGraph, WeightedGraph,
                                      graph_from_config)

MODES = ("bernoulli", "poisson")
CENSUS_KMAX = 20


class PercolationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PercolationSample:
    n: int
    edges: np.ndarray  # shape (E, 2), rows (i, j) with i < j
    p: float
    mode: str
    seed: int
    types: np.ndarray | None = None

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}


def _edge_probability(weights, p: float, mode: str) -> np.ndarray:
    w = p * np.asarray(weights, dtype=float)
    if mode == "bernoulli":
        return np.minimum(w, 1.0)
    if mode == "poisson":
        return -np.expm1(-w)
    raise PercolationError(f"unknown mode {mode!r}; expected one of {MODES}")


def _canonical(edges: np.ndarray) -> np.ndarray:
    if edges.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.sort(edges.astype(np.int64), axis=1)
    order = np.lexsort((e[:, 1], e[:, 0]))
    return e[order]


# -- block-pair placement -------------------------------------------------

def _distinct_indices(rng, total: int, k: int, exclude: np.ndarray | None = None,
                      same_block: int | None = None) -> np.ndarray:
    """``k`` distinct pair indices drawn uniformly, avoiding ``exclude``.

    For a block paired with itself (``same_block = s``) the index space is
    ``s*s`` ordered pairs and only ``i < j`` is accepted, which is uniform
    over unordered pairs.
    """
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    chosen = np.zeros(0, dtype=np.int64)
    excl = exclude if exclude is not None else np.zeros(0, dtype=np.int64)
    while chosen.size < k:
        need = k - chosen.size
        draw = rng.integers(0, total, size=max(2 * need, 16), dtype=np.int64)
        if same_block is not None:
            s = same_block
            draw = draw[(draw // s) < (draw % s)]
        draw = draw[~np.isin(draw, excl)]
        # keep first occurrences so the draw order stays the tie-breaker
        _, first = np.unique(draw, return_index=True)
        draw = draw[np.sort(first)]
        draw = draw[~np.isin(draw, chosen)]
        chosen = np.concatenate([chosen, draw[:need]])
    return chosen


def _pair_space(sa: int, sb: int, same: bool) -> tuple[int, int]:
    """(index-space size, number of admissible pairs) for a block pair."""
    if same:
        return sa * sa, sa * (sa - 1) // 2
    return sa * sb, sa * sb


def _decode(idx: np.ndarray, va: np.ndarray, vb: np.ndarray, same: bool) -> np.ndarray:
    if same:
        s = va.size
        return np.stack([va[idx // s], va[idx % s]], axis=1)
    return np.stack([va[idx // vb.size], vb[idx % vb.size]], axis=1)


def _block_pairs(members: list[np.ndarray]):
    m = len(members)
    for a in range(m):
        for b in range(a, m):
            sa, sb = members[a].size, members[b].size
            if sa == 0 or sb == 0 or (a == b and sa < 2):
                continue
            yield a, b


def _sample_blocks(members: list[np.ndarray], values: np.ndarray, p: float,
                   mode: str, rng) -> np.ndarray:
    out = []
    for a, b in _block_pairs(members):
        q = float(_edge_probability(values[a, b], p, mode))
        if q <= 0.0:
            continue
        same = a == b
        space, npairs = _pair_space(members[a].size, members[b].size, same)
        k = int(rng.binomial(npairs, q))
        idx = _distinct_indices(rng, space, k, same_block=members[a].size if same else None)
        out.append(_decode(idx, members[a], members[b], same))
    if not out:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(out)


def _members(types: np.ndarray, m: int) -> list[np.ndarray]:
    order = np.argsort(types, kind="stable")
    bounds = np.searchsorted(types[order], np.arange(m + 1))
    return [order[bounds[a]:bounds[a + 1]] for a in range(m)]


# -- public samplers -------------------------------------------------------

def sample(G: AnyGraph, p: float, mode: str = "bernoulli", seed: int = 0) -> PercolationSample:
    """Keep each pair ``ij`` independently with probability ``min(p*beta_ij, 1)``
    (``bernoulli``) or ``1 - exp(-p*beta_ij)`` (``poisson``)."""
    if p < 0:
        raise PercolationError("p must be nonnegative")
    if mode not in MODES:
        raise PercolationError(f"unknown mode {mode!r}")
    rng = make_rng(seed)
    if isinstance(G, BlockWeightedGraph):
        members = _members(G.types, G.values.shape[0])
        edges = _sample_blocks(members, G.values, p, mode, rng)
        return PercolationSample(G.n, _canonical(edges), float(p), mode, int(seed), G.types)
    n = G.n
    iu, ju = np.triu_indices(n, 1)
    q = _edge_probability(G.beta[iu, ju], p, mode)
    u = rng.random(iu.size)
    keep = u < q
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    return PercolationSample(n, edges.astype(np.int64), float(p), mode, int(seed), G.types)


def sample_gnw(W: StepKernel, n: int, c: float, seed: int = 0) -> PercolationSample:
    """``G(n, cW)``: uniform types, then each pair joined w.p. ``c W(X_i, X_j) / n``.

    Never materialises the ``n x n`` weights: types are grouped by block and
    each block pair gets a binomial edge count placed on uniform distinct
    pairs.
    """
    if not W.nonnegative:
        raise PercolationError("sample_gnw requires a nonnegative kernel")
    if n < 1:
        raise PercolationError("n must be positive")
    if c * W.sup_norm > n:
        raise PercolationError(f"c*||W||_inf = {c * W.sup_norm} exceeds n = {n}")
    rng = make_rng(seed)
    types = np.atleast_1d(graphon.block_index(W, rng.random(n)))
    members = _members(types, W.m)
    edges = _sample_blocks(members, W.values, c / n, "bernoulli", rng)
    return PercolationSample(n, _canonical(edges), c / n, "bernoulli", int(seed), types)


def two_phase_sample(G: AnyGraph, p: float, delta: float, seed: int = 0
                     ) -> tuple[PercolationSample, PercolationSample]:
    """Sprinkled coupling: ``base ~ G((1-delta)p)`` and ``combined ~ G(p)``
    with ``base`` a subgraph of ``combined``.

    Each non-edge of ``base`` is added with probability
    ``s = delta*p*beta / (1 - (1-delta)*p*beta)``, which makes the marginal of
    ``combined`` exact.
    """
    if not 0 < delta < 1:
        raise PercolationError("delta must lie in (0, 1)")
    if p < 0:
        raise PercolationError("p must be nonnegative")
    if p * G.beta_max > 1:
        raise PercolationError("two-phase coupling needs p*beta_max <= 1")
    rng = make_rng(seed)
    q0_of = lambda w: (1 - delta) * p * w
    s_of = lambda w: np.where(q0_of(w) < 1, delta * p * w / np.maximum(1 - q0_of(w), 1e-300), 0.0)

    if isinstance(G, BlockWeightedGraph):
        members = _members(G.types, G.values.shape[0])
        base_parts, add_parts = [], []
        for a, b in _block_pairs(members):
            w = float(G.values[a, b])
            if w <= 0:
                continue
            same = a == b
            space, npairs = _pair_space(members[a].size, members[b].size, same)
            sb = members[a].size if same else None
            k0 = int(rng.binomial(npairs, q0_of(w)))
            idx0 = _distinct_indices(rng, space, k0, same_block=sb)
            k1 = int(rng.binomial(npairs - k0, float(s_of(w))))
            idx1 = _distinct_indices(rng, space, k1, exclude=idx0, same_block=sb)
            base_parts.append(_decode(idx0, members[a], members[b], same))
            add_parts.append(_decode(idx1, members[a], members[b], same))
        empty = np.zeros((0, 2), dtype=np.int64)
        base_e = np.concatenate(base_parts) if base_parts else empty
        add_e = np.concatenate(add_parts) if add_parts else empty
        base_e = _canonical(base_e)
        comb_e = _canonical(np.concatenate([base_e, add_e]))
    else:
        n = G.n
        iu, ju = np.triu_indices(n, 1)
        w = G.beta[iu, ju]
        u0 = rng.random(iu.size)
        u1 = rng.random(iu.size)
        in_base = u0 < q0_of(w)
        in_comb = in_base | (u1 < s_of(w))
        base_e = np.stack([iu[in_base], ju[in_base]], axis=1).astype(np.int64)
        comb_e = np.stack([iu[in_comb], ju[in_comb]], axis=1).astype(np.int64)
    types = G.types
    base = PercolationSample(G.n, base_e, (1 - delta) * p, "bernoulli", int(seed), types)
    comb = PercolationSample(G.n, comb_e, p, "bernoulli", int(seed), types)
    return base, comb


# -- components --------------------------------------------------------------

class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def component_sizes(self) -> list[int]:
        return [self.size[v] for v in range(len(self.parent)) if self.parent[v] == v]


@dataclass(frozen=True)
class ComponentStats:
    sizes: tuple[int, ...]
    n: int
    nk: dict[int, int] = field(compare=False)

    @classmethod
    def from_sizes(cls, sizes, n: int) -> "ComponentStats":
        sizes = tuple(sorted((int(s) for s in sizes), reverse=True))
        nk: dict[int, int] = {}
        for s in sizes:
            nk[s] = nk.get(s, 0) + s
        return cls(sizes, n, dict(sorted(nk.items())))

    @property
    def C1(self) -> int:
        return self.sizes[0] if self.sizes else 0

    @property
    def C2(self) -> int:
        return self.sizes[1] if len(self.sizes) > 1 else 0

    def N(self, k: int) -> int:
        return self.nk.get(k, 0)


def components(s: PercolationSample) -> ComponentStats:
    uf = UnionFind(s.n)
    union = uf.union
    for i, j in s.edges.tolist():
        union(i, j)
    return ComponentStats.from_sizes(uf.component_sizes(), s.n)


def nontree_census(s: PercolationSample, kmax: int) -> dict[int, int]:
    """Vertices in components of size ``k <= kmax`` that contain a cycle."""
    uf = UnionFind(s.n)
    for i, j in s.edges.tolist():
        uf.union(i, j)
    edge_count: dict[int, int] = {}
    for i, _ in s.edges.tolist():
        r = uf.find(i)
        edge_count[r] = edge_count.get(r, 0) + 1
    out = {k: 0 for k in range(1, kmax + 1)}
    for r, e in edge_count.items():
        size = uf.size[r]
        if size <= kmax and e >= size:
            out[size] += size
    return out


def n_geq_k(stats: ComponentStats, k: int) -> int:
    if k < 1:
        raise PercolationError("k must be at least 1")
    return sum(v for j, v in stats.nk.items() if j >= k)


def n_gt(stats: ComponentStats, omega: int) -> int:
    """Vertices in components of size strictly greater than ``omega``."""
    return n_geq_k(stats, int(omega) + 1)


def omega_rule(n: int, rule: str = "log2") -> int:
    """Cutoff between small and large components.

    ``log`` is ceil(ln n), ``log2`` is ceil((ln n)^2), ``quarter`` is
    ceil(n^(1/4)).
    """
    if rule == "log":
        return math.ceil(math.log(n))
    if rule == "log2":
        return math.ceil(math.log(n) ** 2)
    if rule == "quarter":
        return math.ceil(n ** 0.25)
    raise PercolationError(f"unknown omega rule {rule!r}")


# -- replication ----------------------------------------------------------------

def make_sampler(spec: dict, c: float | None = None, p: float | None = None):
    """Return ``seed -> PercolationSample`` for a generator spec.

    ``{"kind": "gnw", "kernel": {...}, "n": n}`` draws ``G(n, cW)``; the
    weighted-graph kinds (``complete``, ``blowup``, ``sample_dense``) build
    the graph once and percolate it at ``p`` (default ``c/n``).
    """
    kind = spec.get("kind")
    n = int(spec["n"])
    mode = spec.get("mode", "bernoulli")
    if kind == "gnw":
        W = spec["kernel"]
        W = W if isinstance(W, StepKernel) else StepKernel.from_dict(W)
        if c is None:
            raise PercolationError("gnw sampler needs c")
        return _GnwSampler(W, n, float(c))
    G = graph_from_config(spec, lazy=True)
    if p is None:
        if c is None:
            raise PercolationError("need p or c")
        p = c / n
    return _GraphSampler(G, float(p), mode)


class _GnwSampler:
    def __init__(self, W, n, c):
        self.W, self.n, self.c = W, n, c

    def __call__(self, seed):
        return sample_gnw(self.W, self.n, self.c, seed)


class _GraphSampler:
    def __init__(self, G, p, mode):
        self.G, self.p, self.mode = G, p, mode

    def __call__(self, seed):
        return sample(self.G, self.p, self.mode, seed)


def _one_rep(args):
    sampler, r, seed = args
    st = components(sampler(seed))
    return r, seed, st


@dataclass
class ReplicateTable:
    n: int
    rows: list[dict]
    kmax: int = CENSUS_KMAX

    @property
    def columns(self) -> list[str]:
        return ["rep", "seed", "C1", "C2"] + [f"N{k}" for k in range(1, self.kmax + 1)]

    def fraction(self, key: str) -> np.ndarray:
        return np.array([row[key] for row in self.rows], dtype=float) / self.n

    def summary(self) -> dict:
        out = {"n": self.n, "reps": len(self.rows)}
        for key in self.columns[2:]:
            x = self.fraction(key)
            se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
            out[key] = {"mean": float(x.mean()), "stderr": se,
                        "min": float(x.min()), "max": float(x.max())}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([row[c] for c in self.columns])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=False)


def replicate(sampler, reps: int, base_seed: int = 0, kmax: int = CENSUS_KMAX,
              workers: int = 1, keep_stats: bool = False) -> ReplicateTable:
    """Run ``reps`` independent samples with seeds ``mix(base_seed, r)``.

    ``sampler`` is a generator spec dict (see :func:`make_sampler`, with the
    scale under ``"c"`` or ``"p"``) or a callable ``seed -> sample``.
    Rows are ordered by replica index whatever the worker count.
    """
    if reps < 1:
        raise PercolationError("reps must be at least 1")
    if isinstance(sampler, dict):
        sampler = make_sampler(sampler, sampler.get("c"), sampler.get("p"))
    jobs = [(sampler, r, mix(base_seed, r)) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one_rep, jobs))
    else:
        results = [_one_rep(j) for j in jobs]
    rows = []
    n = None
    for r, seed, st in results:
        n = st.n
        row = {"rep": r, "seed": seed, "C1": st.C1, "C2": st.C2}
        for k in range(1, kmax + 1):
            row[f"N{k}"] = st.N(k)
        if keep_stats:
            row["stats"] = st
        rows.append(row)
    return ReplicateTable(n, rows, kmax)
