"""Power iteration for the top eigenvalue of symmetric matrices."""

from __future__ import annotations

import numpy as np


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its budget.

    ``estimate`` carries the last iterate's value so callers can still
    report something useful.
    """

    def __init__(self, message: str, estimate, iterations: int):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations


def _start_vector(n: int) -> np.ndarray:
    x = np.ones(n)
    x[0] += 1e-3
    return x / np.linalg.norm(x)


def power_iteration(matvec, n: int, shift: float, rtol: float = 1e-10,
                    max_iter: int = 100_000) -> float:
    """Largest (algebraic) eigenvalue of a symmetric operator.

    ``matvec`` applies the operator; ``shift`` must be an upper bound on the
    spectral radius so that ``A + shift*I`` is positive semidefinite and the
    iteration picks the top eigenvalue rather than the largest in modulus
    (bipartite kernels have -lambda in the spectrum too).

    Stops when the residual ``||A x - theta x||`` drops below
    ``rtol * max(|theta|, shift)``.
    """
    if n == 0:
        raise ValueError("empty operator")
    shift = float(shift)
    if shift == 0.0:
        # every eigenvalue is bounded by a zero shift, so A == 0
        return 0.0
    x = _start_vector(n)
    theta = 0.0
    scale = shift
    for it in range(1, max_iter + 1):
        y = matvec(x)
        theta = float(x @ y)
        resid = float(np.linalg.norm(y - theta * x))
        if resid <= rtol * max(abs(theta), scale):
            return theta
        z = y + shift * x
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return theta
        x = z / nz
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        estimate=theta, iterations=max_iter)


def top_eigenvalue_dense(a: np.ndarray, rtol: float = 1e-10,
                         max_iter: int = 100_000) -> float:
    a = np.asarray(a, dtype=float)
    shift = float(np.abs(a).sum(axis=1).max()) if a.size else 0.0
    return power_iteration(a.__matmul__, a.shape[0], shift, rtol, max_iter)
