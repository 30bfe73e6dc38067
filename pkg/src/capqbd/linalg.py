"""Small dense linear algebra: LU with partial pivoting and residual checks.

Matrices are plain 2-D ``numpy`` float arrays; the factorisation itself is
written out here (row operations are vectorised, the pivot loop is not).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrix

PIVOT_FLOOR = 1e-300
REFINE_ABOVE_COND = 1e10


@dataclass(frozen=True)
class LUFactors:
    lu: np.ndarray  # unit-lower L below the diagonal, U on and above
    perm: np.ndarray
    a_norm: float

    @property
    def n(self) -> int:
        return self.lu.shape[0]


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def lu_factor(A) -> LUFactors:
    A = _as_square(A)
    n = A.shape[0]
    lu = A.copy()
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < PIVOT_FLOOR:
            raise SingularMatrix(f"pivot {k} is {lu[p, k]:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return LUFactors(lu, perm, inf_norm(A))


def substitute(f: LUFactors, b: np.ndarray) -> np.ndarray:
    """Forward and back substitution; ``b`` may hold several right-hand sides as columns."""
    y = b[f.perm].astype(float, copy=True)
    lu = f.lu
    n = f.n
    for i in range(1, n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - lu[i, i + 1:] @ y[i + 1:]) / lu[i, i]
    return y


def inf_norm(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    if A.ndim == 1:
        return float(np.max(np.abs(A)))
    return float(np.max(np.abs(A).sum(axis=1)))


def condition_estimate(f: LUFactors) -> float:
    """Infinity-norm condition number from an explicit inverse (systems here are small)."""
    inv = substitute(f, np.eye(f.n))
    return f.a_norm * inf_norm(inv)


def lu_solve(A, b, *, refine: bool | None = None) -> np.ndarray:
    """Solve ``A x = b`` (``b`` may be a vector or a matrix of right-hand sides).

    One step of iterative refinement is applied when the condition estimate
    exceeds 1e10, or always/never if ``refine`` is given.
    """
    A = _as_square(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b is {b.shape}")
    f = lu_factor(A)
    cols = b.reshape(A.shape[0], -1)
    x = substitute(f, cols)
    if refine is None:
        refine = f.n <= 400 and condition_estimate(f) > REFINE_ABOVE_COND
    if refine:
        r = cols - A @ x
        x = x + substitute(f, r)
    return x.reshape(b.shape)


def residual_inf_norm(A, x, b) -> float:
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[1] != x.shape[0] or A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A {A.shape}, x {x.shape}, b {b.shape}")
    return inf_norm(A @ x - b)


def matrix_rank(A, tol: float | None = None) -> int:
    """Numerical rank via singular values (used for consistency checks only)."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if tol is None:
        tol = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return int(np.sum(s > tol))
