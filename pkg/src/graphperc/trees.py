"""Rooted unlabelled trees: canonical codes, enumeration, automorphisms."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

MAX_TREE_SIZE = 12


class TreeError(ValueError):
    pass


def _children(parent_array) -> list[list[int]]:
    k = len(parent_array)
    kids: list[list[int]] = [[] for _ in range(k)]
    for v in range(1, k):
        p = parent_array[v]
        if not 0 <= p < k or p == v:
            raise TreeError(f"bad parent {p} for vertex {v}")
        kids[p].append(v)
    return kids


def _check_tree(parent_array):
    k = len(parent_array)
    if k == 0:
        raise TreeError("a tree needs at least one vertex")
    kids = _children(parent_array)
    seen = {0}
    stack = [0]
    while stack:
        for c in kids[stack.pop()]:
            if c in seen:
                raise TreeError("parent array contains a cycle")
            seen.add(c)
            stack.append(c)
    if len(seen) != k:
        raise TreeError("parent array does not connect every vertex to the root")
    return kids


def canonical_code(parent_array) -> str:
    """AHU code: ``(`` + sorted child codes + ``)``."""
    kids = _check_tree(parent_array)

    def code(v):
        return "(" + "".join(sorted(code(c) for c in kids[v])) + ")"

    return code(0)


def aut_from_code(code: str) -> int:
    """Rooted automorphism count via ``aut(T) = f * prod aut(T_i)``, where
    ``f`` multiplies in ``j!`` for every group of ``j`` identical branches."""
    return _aut(code)


@lru_cache(maxsize=None)
def _aut(code: str) -> int:
    branches = split_branches(code)
    total = 1
    for b, j in Counter(branches).items():
        total *= math.factorial(j) * _aut(b) ** j
    return total


def split_branches(code: str) -> list[str]:
    inner = code[1:-1]
    out, depth, start = [], 0, 0
    for i, ch in enumerate(inner):
        depth += 1 if ch == "(" else -1
        if depth == 0:
            out.append(inner[start:i + 1])
            start = i + 1
    return out


def parent_array_from_code(code: str) -> tuple[int, ...]:
    """Preorder labelling with the root as vertex 0."""
    parents: list[int] = []
    stack: list[int] = []
    for ch in code:
        if ch == "(":
            parents.append(stack[-1] if stack else -1)
            stack.append(len(parents) - 1)
        else:
            stack.pop()
    parents[0] = 0
    return tuple(parents)


@dataclass(frozen=True)
class RootedTree:
    parent_array: tuple[int, ...]
    canonical_code: str
    aut: int

    @classmethod
    def from_parents(cls, parent_array) -> "RootedTree":
        pa = tuple(int(p) for p in parent_array)
        if pa:
            pa = (0,) + pa[1:]
        code = canonical_code(pa)
        return cls(pa, code, aut_from_code(code))

    @classmethod
    def from_code(cls, code: str) -> "RootedTree":
        return cls(parent_array_from_code(code), code, aut_from_code(code))

    @property
    def k(self) -> int:
        return len(self.parent_array)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(self.parent_array[v], v) for v in range(1, self.k)]


@lru_cache(maxsize=None)
def _codes(k: int) -> tuple[str, ...]:
    """Canonical codes of all rooted trees with ``k`` vertices, sorted.

    A tree is a root plus a multiset of branches whose sizes sum to
    ``k - 1``; branches are emitted in nonincreasing (size, code) order so
    every multiset appears exactly once.
    """
    if k == 1:
        return ("()",)
    pool = [(s, c) for s in range(1, k) for c in _codes(s)]
    pool.sort(reverse=True)
    out = []

    def extend(remaining, start, acc):
        if remaining == 0:
            out.append("(" + "".join(sorted(acc)) + ")")
            return
        for idx in range(start, len(pool)):
            s, c = pool[idx]
            if s <= remaining:
                acc.append(c)
                extend(remaining - s, idx, acc)
                acc.pop()

    extend(k - 1, 0, [])
    return tuple(sorted(set(out)))


def enumerate_rooted_trees(k: int) -> list[RootedTree]:
    if k < 1:
        raise TreeError("k must be positive")
    if k > MAX_TREE_SIZE:
        raise TreeError(f"k = {k} exceeds the enumeration bound {MAX_TREE_SIZE}")
    return [RootedTree.from_code(c) for c in _codes(k)]
