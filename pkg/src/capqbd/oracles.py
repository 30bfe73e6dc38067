"""Independent reference computations used to audit the exact solution.

Two chain-level oracles: a stationary solve of the generator truncated at a
finite level, and functional iteration for the matrix-geometric rate matrix.
Below them sit brute-force linear-system counterparts of the clearing-model
closed forms.  None of these use the closed forms they are meant to check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .clearing import ClearingParams
from .errors import DomainError, NonConvergence
from .model import DEFAULT_STATE_CAP, ChainSpec, State, build_truncated_generator, truncated_state_count


@dataclass(frozen=True)
class TruncatedSolution:
    probs: dict[State, float]
    j_max: int
    top_mass: float

    def __getitem__(self, state: State) -> float:
        return self.probs[state]

    def get(self, state: State, default: float = 0.0) -> float:
        return self.probs.get(state, default)


def _solve_generator(Q: np.ndarray) -> np.ndarray:
    """Solve ``pi Q = 0`` with ``sum(pi) = 1`` by replacing one equation with ones."""
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    pi = linalg.lu_solve(A, b)
    return pi / pi.sum()


def truncated_stationary(spec: ChainSpec, j_max: int | None = None, tol: float = 1e-12, *,
                         state_cap: int = DEFAULT_STATE_CAP, adaptive: bool = True
                         ) -> TruncatedSolution:
    """Stationary distribution of the chain truncated at level ``j_max``.

    With ``adaptive`` set, ``j_max`` doubles (in distance from ``j0``) until the
    mass on the top two levels is below ``tol`` or the state cap is reached.
    """
    if j_max is None:
        j_max = spec.j0 + 64
    if j_max < spec.j0 + 2:
        raise ValueError(f"j_max={j_max} must be at least j0 + 2 = {spec.j0 + 2}")
    while True:
        gen = build_truncated_generator(spec, j_max, state_cap)
        pi = _solve_generator(gen.matrix)
        probs = dict(zip(gen.states, (float(p) for p in pi)))
        top = sum(probs[(m, j)] for m in range(spec.M + 1) for j in (j_max - 1, j_max))
        if not adaptive or top < tol:
            return TruncatedSolution(probs, j_max, top)
        bigger = spec.j0 + 2 * (j_max - spec.j0)
        if truncated_state_count(spec, bigger) > state_cap:
            return TruncatedSolution(probs, j_max, top)
        j_max = bigger


# ----------------------------------------------------------------- rate matrix


@dataclass(frozen=True)
class QbdBlocks:
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray


def extract_blocks(spec: ChainSpec) -> QbdBlocks:
    n = spec.M + 1
    a = spec.alpha
    A0 = np.diag(spec.lam) + a[:, :, 2]
    A2 = np.diag(spec.mu) + a[:, :, 0]
    A1 = a[:, :, 1].copy()
    A1[np.diag_indices(n)] = -(spec.lam + spec.mu + a.sum(axis=(1, 2)))
    return QbdBlocks(A0, A1, A2)


def iterate_rate_matrix(blocks: QbdBlocks, tol: float = 1e-13, max_iter: int = 100_000
                        ) -> np.ndarray:
    """Minimal nonnegative solution of ``A0 + R A1 + R^2 A2 = 0`` by functional iteration."""
    n = blocks.A1.shape[0]
    # X A1 = Y  <=>  A1^T X^T = Y^T; factor once and reuse for every iterate.
    factors = linalg.lu_factor(blocks.A1.T)
    R = np.zeros((n, n))
    for _ in range(max_iter):
        rhs = -(blocks.A0 + R @ R @ blocks.A2)
        new = linalg.substitute(factors, rhs.T).T
        change = float(np.max(np.abs(new - R)))
        R = new
        if change < tol:
            return R
    raise NonConvergence(f"rate-matrix iteration did not converge in {max_iter} steps")


# ------------------------------------------------------ clearing-model oracles


def _need_truncation(N: int, least: int):
    if N < least:
        raise DomainError(f"truncation level {N} must be at least {least}")


def _birth_death_generator(params: ClearingParams, N: int) -> np.ndarray:
    """Clearing queue on ``0..N`` (arrivals at ``N`` are lost)."""
    Q = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        if i < N:
            Q[i, i + 1] = params.lam
        if i > 0:
            Q[i, i - 1] += params.mu
            Q[i, 0] += params.alpha
        Q[i, i] = -Q[i].sum()
    return Q


def clearing_stationary_truncated(params: ClearingParams, N: int = 400) -> np.ndarray:
    _need_truncation(N, 2)
    return _solve_generator(_birth_death_generator(params, N))


def busy_period_transform_truncated(lam: float, mu: float, s: float, N: int = 400) -> float:
    """``E[exp(-s B)]`` as the probability of reaching 0 from 1 before an ``Exp(s)`` kill."""
    _need_truncation(N, 2)
    # h_i for i = 1..N; h_0 = 1
    A = np.zeros((N, N))
    b = np.zeros(N)
    for i in range(1, N + 1):
        k = i - 1
        up = lam if i < N else 0.0
        A[k, k] = up + mu + s
        if i < N:
            A[k, k + 1] = -up
        if i > 1:
            A[k, k - 1] = -mu
        else:
            b[k] = mu
    return float(linalg.lu_solve(A, b)[0])


def reach_probability_truncated(params: ClearingParams, j: int, N: int = 400) -> np.ndarray:
    """``out[ell]`` = P(hit ``j`` before 0 from ``ell``); clearings count as hitting 0."""
    _need_truncation(N, j + 2)
    lam, mu, alpha = params.lam, params.mu, params.alpha
    states = [i for i in range(1, N + 1) if i != j]
    idx = {s: k for k, s in enumerate(states)}
    A = np.zeros((len(states), len(states)))
    b = np.zeros(len(states))
    for i in states:
        k = idx[i]
        up = lam if i < N else 0.0
        A[k, k] = up + mu + alpha
        for t, rate in ((i + 1, up), (i - 1, mu)):
            if rate == 0.0:
                continue
            if t == j:
                b[k] += rate
            elif t in idx:
                A[k, idx[t]] -= rate
    h = linalg.lu_solve(A, b)
    out = np.zeros(N + 1)
    out[j] = 1.0
    for i in states:
        out[i] = h[idx[i]]
    return out


def expected_busy_period_truncated(params: ClearingParams, N: int = 400) -> float:
    """Mean time from 1 until the clearing queue first empties."""
    _need_truncation(N, 2)
    Q = _birth_death_generator(params, N)
    T = -Q[1:, 1:]
    return float(linalg.lu_solve(T, np.ones(N))[0])


def occupancy_times_truncated(params: ClearingParams, j0: int, j: int, N: int) -> dict[int, float]:
    """``out[ell]``: expected time at level ``j`` before leaving ``{l > j0}`` from ``ell``.

    Leaving means a step down to ``j0`` or a clearing at rate ``alpha``;
    levels above ``N`` are cut off (arrivals at ``N`` are lost).
    """
    _need_truncation(N, j + 2)
    lam, mu, alpha = params.lam, params.mu, params.alpha
    levels = list(range(j0 + 1, N + 1))
    n = len(levels)
    T = np.zeros((n, n))
    for k, ell in enumerate(levels):
        up = lam if ell < N else 0.0
        T[k, k] = up + mu + alpha
        if k + 1 < n:
            T[k, k + 1] = -up
        if k > 0:
            T[k, k - 1] = -mu
    e = np.zeros(n)
    e[j - (j0 + 1)] = 1.0
    # expected time in j from each start = column j of T^{-1}
    col = linalg.lu_solve(T, e)
    return {ell: float(col[k]) for k, ell in enumerate(levels)}


__all__ = [
    "TruncatedSolution", "truncated_stationary", "QbdBlocks", "extract_blocks",
    "iterate_rate_matrix", "clearing_stationary_truncated", "busy_period_transform_truncated",
    "reach_probability_truncated", "expected_busy_period_truncated", "occupancy_times_truncated",
]
