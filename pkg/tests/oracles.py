"""Independent reference computations used by the tests.

Nothing here calls into the code under test except to read plain data
(kernel values, tree edges); every quantity is recomputed by brute force or
a different algorithm.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def bisect_survival(c: float, tol: float = 1e-15) -> float:
    """Largest root of r = 1 - exp(-c r), found by bisection on (0, 1]."""
    if c <= 1:
        return 0.0
    lo, hi = 1e-12, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid < 1 - math.exp(-c * mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def borel(c: float, k: int) -> float:
    return math.exp(-c * k) * (c * k) ** (k - 1) / math.factorial(k)


def eig2_top(a: float, b: float, d: float) -> float:
    """Largest root of the characteristic polynomial of [[a, b], [b, d]]."""
    tr, det = a + d, a * d - b * b
    return tr / 2 + math.sqrt(tr * tr / 4 - det)


def brute_cut_norm(mu, values) -> float:
    """max over block subsets A, B of |sum_{i in A, j in B} mu_i mu_j K_ij|."""
    mu = np.asarray(mu, dtype=float)
    K = np.asarray(values, dtype=float)
    m = mu.size
    best = 0.0
    subsets = [s for r in range(m + 1) for s in itertools.combinations(range(m), r)]
    for A in subsets:
        for B in subsets:
            tot = sum(mu[i] * mu[j] * K[i, j] for i in A for j in B)
            best = max(best, abs(tot))
    return best


def brute_irreducible(values) -> bool:
    """No proper nonempty block set A with zero weight between A and its complement."""
    V = np.asarray(values)
    m = V.shape[0]
    for r in range(1, m):
        for A in itertools.combinations(range(m), r):
            Ac = [j for j in range(m) if j not in A]
            if np.all(V[np.ix_(list(A), Ac)] == 0):
                return False
    return True


def brute_hom_density(k: int, edges, A, w) -> float:
    """Sum over all maps [k] -> points of prod w * prod A over edges."""
    A = np.asarray(A, dtype=float)
    w = np.asarray(w, dtype=float)
    total = 0.0
    for phi in itertools.product(range(A.shape[0]), repeat=k):
        term = 1.0
        for v in phi:
            term *= w[v]
        for i, j in edges:
            term *= A[phi[i], phi[j]]
        total += term
    return total


def brute_tree_probability(mu, values, edges, k: int, aut: int) -> float:
    """(1/aut) sum over block assignments of prod mu e^{-lambda} prod W."""
    mu = np.asarray(mu, dtype=float)
    V = np.asarray(values, dtype=float)
    lam = [sum(mu[j] * V[i, j] for j in range(mu.size)) for i in range(mu.size)]
    total = 0.0
    for b in itertools.product(range(mu.size), repeat=k):
        term = 1.0
        for v in b:
            term *= mu[v] * math.exp(-lam[v])
        for i, j in edges:
            term *= V[b[i], b[j]]
        total += term
    return total / aut


def labelled_rooted_trees(k: int):
    """Yield parent arrays (root marked -1) of every labelled rooted tree on [k]."""
    for root in range(k):
        others = [v for v in range(k) if v != root]
        for parents in itertools.product(range(k), repeat=k - 1):
            par = [-1] * k
            ok = True
            for v, p in zip(others, parents):
                if p == v:
                    ok = False
                    break
                par[v] = p
            if not ok:
                continue
            # every vertex must reach the root without revisiting
            good = True
            for v in range(k):
                seen = set()
                x = v
                while x != root:
                    if x in seen:
                        good = False
                        break
                    seen.add(x)
                    x = par[x]
                if not good:
                    break
            if good:
                yield root, par


def rooted_code(root: int, par) -> str:
    kids = {v: [] for v in range(len(par))}
    for v, p in enumerate(par):
        if p >= 0:
            kids[p].append(v)

    def code(v):
        return "(" + "".join(sorted(code(c) for c in kids[v])) + ")"

    return code(root)


def brute_automorphisms(k: int, edges) -> int:
    """Permutations of [k] fixing vertex 0 that map the edge set onto itself."""
    E = {frozenset(e) for e in edges}
    count = 0
    for perm in itertools.permutations(range(1, k)):
        phi = (0,) + perm
        if {frozenset((phi[i], phi[j])) for i, j in edges} == E:
            count += 1
    return count


def components_bfs(n: int, edges) -> list[int]:
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    sizes = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        stack, size = [s], 0
        while stack:
            v = stack.pop()
            size += 1
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
        sizes.append(size)
    return sorted(sizes, reverse=True)
