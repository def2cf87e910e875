"""Step graphons: piecewise-constant symmetric kernels on the unit square.

A :class:`StepKernel` is described by a partition of ``[0, 1]`` into ``m``
consecutive intervals ("blocks") of Lebesgue measure ``mu_i`` and an
``m x m`` symmetric matrix of values. Functions of one type variable that
are constant on blocks are plain length-``m`` numpy arrays.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from graphperc.spectral import power_iteration

SYM_TOL = 1e-12
MEASURE_TOL = 1e-12
EXACT_CUT_MAX_BLOCKS = 20
EXACT_PERM_MAX_BLOCKS = 8


class KernelError(ValueError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StepKernel:
    block_measures: np.ndarray
    values: np.ndarray
    nonnegative: bool = field(init=False)

    def __post_init__(self):
        mu = np.array(self.block_measures, dtype=float).reshape(-1)
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 0:
            vals = vals.reshape(1, 1)
        m = mu.size
        if m == 0:
            raise KernelError("kernel needs at least one block")
        if vals.shape != (m, m):
            raise KernelError(f"values must be {m}x{m}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise KernelError("kernel values must be finite")
        if np.any(mu <= 0):
            raise KernelError("block measures must be strictly positive")
        if abs(mu.sum() - 1.0) > MEASURE_TOL:
            raise KernelError(f"block measures sum to {mu.sum()!r}, not 1")
        if np.max(np.abs(vals - vals.T)) > SYM_TOL:
            raise KernelError("values matrix is not symmetric")
        # exact symmetry from here on
        vals = (vals + vals.T) / 2
        object.__setattr__(self, "block_measures", _readonly(mu))
        object.__setattr__(self, "values", _readonly(vals))
        object.__setattr__(self, "nonnegative", bool(vals.min() >= 0))

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> "StepKernel":
        return cls([1.0], [[c]])

    @classmethod
    def equal_blocks(cls, values) -> "StepKernel":
        vals = np.asarray(values, dtype=float)
        m = vals.shape[0]
        return cls(np.full(m, 1.0 / m), vals)

    @classmethod
    def from_dict(cls, d: dict) -> "StepKernel":
        return cls(d["block_measures"], d["values"])

    @classmethod
    def from_json(cls, text: str) -> "StepKernel":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {"block_measures": self.block_measures.tolist(),
                "values": self.values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    # -- basic properties -------------------------------------------------

    @property
    def m(self) -> int:
        return self.block_measures.size

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    @property
    def breakpoints(self) -> np.ndarray:
        """Right endpoints of the blocks; the last one is exactly 1."""
        b = np.cumsum(self.block_measures)
        b[-1] = 1.0
        return b

    def __sub__(self, other: "StepKernel") -> "StepKernel":
        a, b = common_refinement(self, other)
        return StepKernel(a.block_measures, a.values - b.values)

    def __eq__(self, other):
        if not isinstance(other, StepKernel):
            return NotImplemented
        return (np.array_equal(self.block_measures, other.block_measures)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.block_measures.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return (f"StepKernel(block_measures={self.block_measures.tolist()}, "
                f"values={self.values.tolist()})")


def _require_nonnegative(W: StepKernel, what: str):
    if not W.nonnegative:
        raise KernelError(f"{what} requires a nonnegative kernel")


def block_index(W: StepKernel, x) -> np.ndarray | int:
    """Block containing ``x``; blocks are half-open ``[a, b)``, the last closed."""
    xa = np.asarray(x, dtype=float)
    if np.any((xa < 0) | (xa > 1)) or np.any(np.isnan(xa)):
        raise KernelError("points must lie in [0, 1]")
    idx = np.searchsorted(W.breakpoints, xa, side="right")
    idx = np.minimum(idx, W.m - 1)
    return int(idx) if idx.ndim == 0 else idx


def eval(W: StepKernel, x, y):
    """Point evaluation ``W(x, y)``; vectorised over array arguments."""
    v = W.values[block_index(W, x), block_index(W, y)]
    return float(v) if np.ndim(v) == 0 else v


def degree_function(W: StepKernel) -> np.ndarray:
    """Expected offspring count per block, ``lambda_i = sum_j mu_j W_ij``."""
    _require_nonnegative(W, "degree_function")
    return W.values @ W.block_measures


def apply_T(W: StepKernel, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (W.m,):
        raise KernelError(f"block function has shape {f.shape}, kernel has {W.m} blocks")
    return W.values @ (W.block_measures * f)


def symmetrized_matrix(W: StepKernel) -> np.ndarray:
    """``sqrt(mu_i mu_j) W_ij``, whose spectrum is that of T_W on L^2."""
    s = np.sqrt(W.block_measures)
    return s[:, None] * W.values * s[None, :]


def operator_norm(W: StepKernel, rtol: float = 1e-10,
                  max_iter: int = 100_000) -> float:
    """L^2 operator norm of ``T_W`` for a nonnegative step kernel.

    For nonnegative kernels the norm equals the Perron eigenvalue of the
    symmetrised block matrix, found here by shifted power iteration.
    """
    _require_nonnegative(W, "operator_norm")
    M = symmetrized_matrix(W)
    shift = float(np.abs(M).sum(axis=1).max())
    return power_iteration(M.__matmul__, W.m, shift, rtol, max_iter)


def _support_components(values: np.ndarray) -> list[list[int]]:
    m = values.shape[0]
    seen = [False] * m
    comps = []
    for s in range(m):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in np.flatnonzero(values[i] > 0):
                if not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        comps.append(sorted(comp))
    return comps


def is_irreducible(W: StepKernel) -> bool:
    _require_nonnegative(W, "is_irreducible")
    return len(_support_components(W.values)) == 1


def irreducible_parts(W: StepKernel) -> list[tuple[np.ndarray, StepKernel]]:
    """Split a block-diagonal kernel into its irreducible parts.

    Returns ``(blocks, kernel)`` pairs, where ``kernel`` is the restriction
    to ``blocks`` rescaled to live on ``[0, 1]`` again. Restriction to a set
    of measure ``a`` and rescaling multiplies intensities by ``a``.
    """
    _require_nonnegative(W, "irreducible_parts")
    out = []
    for comp in _support_components(W.values):
        idx = np.array(comp)
        a = W.block_measures[idx].sum()
        sub = StepKernel(W.block_measures[idx] / a,
                         a * W.values[np.ix_(idx, idx)])
        out.append((idx, sub))
    return out


def scale(W: StepKernel, c: float) -> StepKernel:
    if c < 0:
        raise KernelError("scale factor must be nonnegative")
    return StepKernel(W.block_measures, c * W.values)


# -- cut norm -------------------------------------------------------------

def _subset_masks(m: int, start: int, stop: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m)) & 1).astype(float)


def _cut_norm_exact(M: np.ndarray) -> float:
    m = M.shape[0]
    best = 0.0
    chunk = 1 << 14
    for start in range(0, 1 << m, chunk):
        S = _subset_masks(m, start, min(start + chunk, 1 << m))
        R = S @ M
        pos = np.clip(R, 0, None).sum(axis=1).max()
        neg = np.clip(-R, 0, None).sum(axis=1).max()
        best = max(best, pos, neg)
    return float(best)


def _cut_norm_alternating(M: np.ndarray, restarts: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    m = M.shape[0]
    best = 0.0
    for _ in range(restarts):
        for sign in (1.0, -1.0):
            b = (rng.random(m) < 0.5).astype(float)
            prev = -np.inf
            while True:
                a = (sign * (M @ b) > 0).astype(float)
                b = (sign * (a @ M) > 0).astype(float)
                val = sign * float(a @ M @ b)
                if val <= prev + 1e-15:
                    break
                prev = val
            best = max(best, prev)
    return best


def cut_norm(K: StepKernel, restarts: int = 32, seed: int = 0) -> float:
    """Cut norm ``sup_{A,B} |int_{A x B} K|``.

    The optimum is attained at unions of blocks. Exact by enumeration of
    ``A`` for up to 20 blocks; beyond that, alternating maximisation with
    random restarts gives a lower bound (see :func:`cut_norm_is_exact`).
    """
    mu = K.block_measures
    M = mu[:, None] * K.values * mu[None, :]
    if K.nonnegative:
        return float(M.sum())
    if K.m <= EXACT_CUT_MAX_BLOCKS:
        return _cut_norm_exact(M)
    return _cut_norm_alternating(M, restarts, seed)


def cut_norm_is_exact(K: StepKernel) -> bool:
    return K.nonnegative or K.m <= EXACT_CUT_MAX_BLOCKS


# -- refinement and cut distance -----------------------------------------

def refine(W: StepKernel, breakpoints) -> StepKernel:
    """Re-express ``W`` on a finer partition given by its right endpoints."""
    bp = np.asarray(breakpoints, dtype=float)
    left = np.concatenate([[0.0], bp[:-1]])
    mids = (left + bp) / 2
    idx = block_index(W, mids)
    return StepKernel(np.diff(np.concatenate([[0.0], bp])),
                      W.values[np.ix_(idx, idx)])


def common_refinement(W1: StepKernel, W2: StepKernel,
                      tol: float = 1e-9) -> tuple[StepKernel, StepKernel]:
    bp = np.union1d(W1.breakpoints, W2.breakpoints)
    keep = np.concatenate([[True], np.diff(bp) > tol])
    bp = bp[keep]
    bp[-1] = 1.0
    return refine(W1, bp), refine(W2, bp)


def equal_grid_size(breakpoints, tol: float = 1e-9, max_blocks: int = 4096) -> int:
    """Smallest ``N`` such that every breakpoint is a multiple of ``1/N``."""
    bp = np.asarray(breakpoints, dtype=float)
    for N in range(1, max_blocks + 1):
        if np.all(np.abs(bp * N - np.round(bp * N)) <= tol * N):
            return N
    raise KernelError(
        f"block measures are not commensurable on a grid of <= {max_blocks} blocks")


def to_equal_blocks(W1: StepKernel, W2: StepKernel,
                    tol: float = 1e-9) -> tuple[StepKernel, StepKernel]:
    N = equal_grid_size(np.union1d(W1.breakpoints, W2.breakpoints), tol)
    grid = np.arange(1, N + 1) / N
    return refine(W1, grid), refine(W2, grid)


def permute(W: StepKernel, perm) -> StepKernel:
    """Rearrangement of an equal-block kernel by a block permutation."""
    perm = np.asarray(perm)
    return StepKernel(W.block_measures[perm], W.values[np.ix_(perm, perm)])


class CutDistance(NamedTuple):
    value: float
    exact: bool
    permutation: tuple


def _perm_objective(A: np.ndarray, B: np.ndarray, mu: np.ndarray, perm) -> float:
    D = A - B[np.ix_(perm, perm)]
    M = mu[:, None] * D * mu[None, :]
    if M.shape[0] <= EXACT_CUT_MAX_BLOCKS:
        return _cut_norm_exact(M)
    return _cut_norm_alternating(M, 8, 0)


def cut_distance(W1: StepKernel, W2: StepKernel, tol: float = 1e-9,
                 anneal_steps: int = 2000, seed: int = 0) -> CutDistance:
    """Minimum of ``||W1 - W2^phi||_cut`` over block permutations ``phi``.

    Both kernels are first refined to a common equal-measure grid. With at
    most 8 blocks all permutations are tried and the result is exact for
    the permutation-restricted problem; otherwise simulated annealing over
    transpositions is used and ``exact`` is False.
    """
    A, B = to_equal_blocks(W1, W2, tol)
    N = A.m
    mu = A.block_measures
    if N <= EXACT_PERM_MAX_BLOCKS:
        best, best_perm = math.inf, tuple(range(N))
        for perm in itertools.permutations(range(N)):
            val = _perm_objective(A.values, B.values, mu, list(perm))
            if val < best:
                best, best_perm = val, perm
                if best == 0.0:
                    break
        return CutDistance(float(best), True, tuple(int(i) for i in best_perm))

    rng = np.random.default_rng(seed)
    perm = np.arange(N)
    cur = _perm_objective(A.values, B.values, mu, perm)
    best, best_perm = cur, perm.copy()
    temp0 = max(cur, 1e-12) * 0.1
    for step in range(anneal_steps):
        temp = temp0 * (1 - step / anneal_steps) + 1e-15
        i, j = rng.choice(N, size=2, replace=False)
        cand = perm.copy()
        cand[i], cand[j] = cand[j], cand[i]
        val = _perm_objective(A.values, B.values, mu, cand)
        if val <= cur or rng.random() < math.exp(-(val - cur) / temp):
            perm, cur = cand, val
            if cur < best:
                best, best_perm = cur, perm.copy()
    return CutDistance(float(best), False, tuple(int(i) for i in best_perm))


def coarsen(W: StepKernel, blocks: int) -> StepKernel:
    """Average ``W`` onto an equal grid of ``blocks`` cells.

    Each cell value is the mean of ``W`` over the cell, so the result is the
    conditional expectation of ``W`` on the coarse partition.
    """
    grid = np.arange(blocks + 1) / blocks
    # measure of each (fine block, coarse cell) overlap
    lo = np.concatenate([[0.0], W.breakpoints[:-1]])
    hi = W.breakpoints
    overlap = np.clip(np.minimum(hi[:, None], grid[None, 1:])
                      - np.maximum(lo[:, None], grid[None, :-1]), 0, None)
    cell = np.full(blocks, 1.0 / blocks)
    P = overlap / cell[None, :]
    vals = P.T @ W.values @ P
    return StepKernel(cell, vals)
