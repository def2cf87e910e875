"""Multi-type Poisson branching process driven by a step kernel.

A particle of block ``i`` has, independently for every block ``j``, a
Poisson(``mu_j * W_ij``) number of children of block ``j``. Since sums of
independent Poissons are Poisson, a whole generation can be advanced at
once: the next generation's block-``j`` count is Poisson with mean
``sum_i count_i * mu_j * W_ij``. Total progeny and the escape event are
therefore simulated generation by generation, which is exact for them.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from graphperc import graphon
from graphperc.graphon import KernelError, StepKernel
from graphperc.seeding import make_rng
from graphperc.spectral import ConvergenceError
from graphperc.trees import RootedTree, enumerate_rooted_trees

DEFAULT_CAP = 100_000
SLOW_CONVERGENCE_ITERS = 1_000


class BranchingOutcome(NamedTuple):
    total: int
    escaped: bool


def _offspring_means(W: StepKernel) -> np.ndarray:
    if not W.nonnegative:
        raise KernelError("branching process requires a nonnegative kernel")
    return W.values * W.block_measures[None, :]


def simulate_many(W: StepKernel, reps: int, seed, cap: int = DEFAULT_CAP,
                  root_block: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run ``reps`` independent processes; returns ``(totals, escaped)``.

    A run stops once its total reaches ``cap``; it is then reported with
    ``total == cap`` and ``escaped`` set.
    """
    if cap < 1:
        raise ValueError("cap must be positive")
    rate = _offspring_means(W)
    rng = make_rng(seed)
    m = W.m
    if root_block is None:
        roots = rng.choice(m, size=reps, p=W.block_measures)
    else:
        if not 0 <= root_block < m:
            raise KernelError(f"block {root_block} out of range for {m} blocks")
        roots = np.full(reps, root_block)
    gen = np.zeros((reps, m), dtype=np.int64)
    gen[np.arange(reps), roots] = 1
    totals = np.ones(reps, dtype=np.int64)
    alive = np.flatnonzero(totals < cap)
    while alive.size:
        g = gen[alive]
        live = g.sum(axis=1) > 0
        alive = alive[live]
        if not alive.size:
            break
        kids = rng.poisson(gen[alive] @ rate)
        gen[alive] = kids
        totals[alive] += kids.sum(axis=1)
        alive = alive[totals[alive] < cap]
    escaped = totals >= cap
    totals = np.minimum(totals, cap)
    return totals, escaped


def simulate(W: StepKernel, seed, cap: int = DEFAULT_CAP) -> BranchingOutcome:
    t, e = simulate_many(W, 1, seed, cap)
    return BranchingOutcome(int(t[0]), bool(e[0]))


def simulate_from(W: StepKernel, block: int, seed, cap: int = DEFAULT_CAP) -> BranchingOutcome:
    t, e = simulate_many(W, 1, seed, cap, root_block=block)
    return BranchingOutcome(int(t[0]), bool(e[0]))


def escape_fraction(W: StepKernel, reps: int, seed, cap: int = DEFAULT_CAP,
                    root_block: int | None = None) -> tuple[float, float]:
    """Monte Carlo survival estimate (escape at ``cap``) with binomial stderr."""
    _, esc = simulate_many(W, reps, seed, cap, root_block)
    q = float(esc.mean())
    return q, math.sqrt(max(q * (1 - q), 0.0) / reps)


def tail_probability_mc(W: StepKernel, k: int, reps: int, seed) -> tuple[float, float]:
    """Estimate ``P(|X_W| >= k)``; only the first ``k`` particles matter."""
    if reps < 1:
        raise ValueError("reps must be positive")
    if k <= 1:
        return 1.0, 0.0
    totals, _ = simulate_many(W, reps, seed, cap=k)
    q = float((totals >= k).mean())
    return q, math.sqrt(q * (1 - q) / reps)


# -- survival probability ------------------------------------------------------

class SurvivalResult(NamedTuple):
    rho: float
    rho_fn: np.ndarray
    iterations: int
    residual: float


def survival_map(W: StepKernel, r: np.ndarray) -> np.ndarray:
    """One step of ``r -> 1 - exp(-T_W r)``."""
    return -np.expm1(-graphon.apply_T(W, r))


def survival_iterates(W: StepKernel, max_iter: int):
    """Yield the iterates of :func:`survival_map` starting from all ones."""
    r = np.ones(W.m)
    yield r
    for _ in range(max_iter):
        r = survival_map(W, r)
        yield r


def survival_probability(W: StepKernel, tol: float = 1e-12,
                         max_iter: int = 1_000_000) -> SurvivalResult:
    """Survival probability as the largest fixed point of ``r = 1 - exp(-T_W r)``.

    Iterating down from the all-ones function gives a monotonically
    decreasing sequence converging to the largest solution. When
    ``||T_W|| <= 1`` the process dies out a.s., and the (sublinearly
    convergent) iteration is skipped.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not W.nonnegative:
        raise KernelError("survival_probability requires a nonnegative kernel")
    if graphon.operator_norm(W) <= 1.0 + 1e-12:
        return SurvivalResult(0.0, np.zeros(W.m), 0, 0.0)
    A = W.values * W.block_measures[None, :]
    r = np.ones(W.m)
    for it in range(1, max_iter + 1):
        nxt = -np.expm1(-(A @ r))
        if np.max(np.abs(nxt - r)) < tol:
            r = nxt
            resid = float(np.max(np.abs(r - (-np.expm1(-(A @ r))))))
            return SurvivalResult(float(W.block_measures @ r), r, it, resid)
        r = nxt
    raise ConvergenceError(
        f"survival fixed point not within tol={tol} after {max_iter} iterations",
        estimate=r, iterations=max_iter)


class LowerBoundReport(NamedTuple):
    rho: float
    bound: float
    margin: float
    passed: bool


def check_lower_bound(W: StepKernel, slack: float = 1e-9) -> LowerBoundReport:
    """Compare ``rho(W)`` with ``(||T_W|| - 1) / ||W||_inf``.

    Only meaningful (and only accepted) for irreducible supercritical kernels.
    """
    if not graphon.is_irreducible(W):
        raise KernelError("lower bound only applies to irreducible kernels")
    norm = graphon.operator_norm(W)
    if norm <= 1:
        raise KernelError(f"kernel is not supercritical (||T_W|| = {norm})")
    rho = survival_probability(W).rho
    bound = (norm - 1) / W.sup_norm
    margin = rho - bound
    return LowerBoundReport(rho, bound, margin, margin >= -slack)


# -- exact small-tree probabilities ------------------------------------------

def tree_probability(W: StepKernel, T: RootedTree) -> float:
    """``P(X_W is isomorphic to T)`` as a rooted tree.

    The sum over all block assignments of the tree's vertices factorises
    along the tree, so it is evaluated leaf-to-root in ``O(k m^2)``.
    """
    if not W.nonnegative:
        raise KernelError("tree_probability requires a nonnegative kernel")
    lam = graphon.degree_function(W)
    weight = W.block_measures * np.exp(-lam)
    kids: list[list[int]] = [[] for _ in range(T.k)]
    for p, v in T.edges:
        kids[p].append(v)
    order, stack = [], [0]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(kids[v])
    msg = [None] * T.k
    for v in reversed(order):
        f = weight.copy()
        for c in kids[v]:
            f = f * (W.values @ msg[c])
        msg[v] = f
    return float(msg[0].sum()) / T.aut


def point_mass(W: StepKernel, k: int) -> float:
    """``P(|X_W| = k)`` summed over rooted tree shapes on ``k`` vertices."""
    return math.fsum(tree_probability(W, T) for T in enumerate_rooted_trees(k))


def borel_pmf(c: float, k: int) -> float:
    """Total progeny law of a Poisson(c) Galton-Watson tree."""
    if c == 0:
        return 1.0 if k == 1 else 0.0
    return math.exp(-c * k + (k - 1) * math.log(c * k) - math.lgamma(k + 1))


def scalar_survival(c: float, tol: float = 1e-15) -> float:
    """Largest root of ``r = 1 - exp(-c r)`` by bisection."""
    if c <= 1:
        return 0.0
    lo, hi = 1e-300, 1.0
    f = lambda r: r - (1 - math.exp(-c * r))
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2
