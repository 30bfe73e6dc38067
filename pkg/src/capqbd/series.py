"""Negative-binomial series identities and weighted occupancy-time sums.

Repeated base terms make the stationary probabilities of a phase a sum of
``C(j - j0 - 1 + k, k) * r**(j - j0)`` terms.  Pushing those through the
occupancy times of the next phase produces series whose closed forms are
collected here.  The closed forms are paired with :func:`brute_force_sum`,
a direct summation used to audit them.
"""

from __future__ import annotations

import math
from typing import Callable

from .clearing import ClearingParams, derive
from .errors import DomainError

DEFAULT_BASE_TOL = 1e-9

# A "kernel" is the closed form of a weighted sum, as a function of the target
# level j: rm_coeff * rM**(j-j0) + sum_k coeffs[k] * C(j-j0-1+k, k) * r0**(j-j0).
Kernel = tuple[float, dict[int, float]]


def binom(x: float, k: int) -> float:
    """``C(x, k)`` as a degree-``k`` polynomial in ``x`` (so ``C(k-1, k) = 0`` for ``k >= 1``)."""
    if k < 0:
        return 0.0
    out = 1.0
    for i in range(k):
        out *= (x - i) / (i + 1)
    return out


def _check_open_unit(beta: float):
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")


def _check_degree(n: int):
    if n < 0 or int(n) != n:
        raise DomainError(f"degree must be a nonnegative integer, got {n}")


def negbin_tail_sum(beta: float, n: int) -> float:
    """``sum_{l >= j0} C(l - j0 + n, n) beta**(l - j0 + 1) = beta / (1 - beta)**(n + 1)``."""
    _check_open_unit(beta)
    _check_degree(n)
    return beta / (1.0 - beta) ** (n + 1)


def negbin_truncated_sum(beta: float, n: int, j: int, j0: int) -> float:
    """``sum_{l = j0}^{j - 1} C(l - j0 + n, n) beta**(l - j0 + 1)`` in closed form."""
    if beta <= 0.0 or beta == 1.0:
        raise DomainError(f"beta must be positive and != 1, got {beta}")
    _check_degree(n)
    if j <= j0:
        raise DomainError("requires j > j0")
    d = j - j0
    top = beta ** (d + 1)
    total = (beta - top) / (1.0 - beta) ** (n + 1)
    for k in range(1, n + 1):
        total -= (binom(d + k, k) - binom(d + k - 1, k - 1)) * top / (1.0 - beta) ** (n + 1 - k)
    return total


def negbin_upper_sum(beta: float, n: int, j: int, j0: int) -> float:
    """``sum_{l >= j} C(l - j0 + n, n) beta**(l - j)`` in closed form."""
    _check_open_unit(beta)
    _check_degree(n)
    if j < j0:
        raise DomainError("requires j >= j0")
    d = j - j0
    total = 1.0 / (1.0 - beta) ** (n + 1)
    for k in range(1, n + 1):
        total += (binom(d + k, k) - binom(d + k - 1, k - 1)) / (1.0 - beta) ** (n + 1 - k)
    return total


def brute_force_sum(term: Callable[[int], float], start: int, *, rel_tol: float = 1e-17,
                    max_terms: int = 2_000_000) -> float:
    """Sum ``term(start) + term(start + 1) + ...`` directly.

    Stops once 16 consecutive terms are negligible relative to the running
    total (the series handled here are eventually geometric).
    """
    total = 0.0
    quiet = 0
    for ell in range(start, start + max_terms):
        t = term(ell)
        total += t
        if ell - start >= 64 and abs(t) <= rel_tol * abs(total):
            quiet += 1
            if quiet >= 16:
                return total
        else:
            quiet = 0
    raise DomainError("series did not converge within max_terms")


# ------------------------------------------------------------- occupancy kernels


def equal_base_kernels(params: ClearingParams, u: int) -> tuple[dict[int, float], ...]:
    """Degree coefficients of the three weighted sums when the source base equals ``r_m``.

    Returns ``(minus, zero, plus)``: for shift ``s`` the weighted sum
    ``sum_l C(l - (j0+1) + u, u) r0**(l - j0) E_(m, l+s)[T_(m, j)]``
    equals ``sum_k coeffs[k] * C(j - (j0+1) + k, k) * r0**(j - j0)``.
    The ``minus`` sum starts at ``l = j0 + 2``, the others at ``l = j0 + 1``.
    """
    _check_degree(u)
    if not (params.lam > 0 and params.mu > 0):
        raise DomainError("equal-base sums need lam > 0 and mu > 0")
    d = derive(params)
    r0, phi, omega = d.r, d.phi_at_alpha, d.omega
    g = 1.0 - r0 * phi
    minus = {k: omega * r0 / g ** (u + 1 - k) for k in range(1, u + 2)}
    zero = {k: omega * r0 * phi / g ** (u + 1 - k) for k in range(1, u + 1)}
    zero[u + 1] = omega
    plus = {k: omega * r0 * phi**2 / g ** (u + 1 - k) for k in range(1, u + 1)}
    plus[u + 1] = omega / r0
    plus[u] = plus.get(u, 0.0) - 1.0 / params.lam
    return minus, zero, plus


def split_base_kernels(params: ClearingParams, r0: float, u: int) -> tuple[Kernel, ...]:
    """Kernels of the three weighted sums for the final phase when its base differs from ``r0``.

    ``params`` must describe the final phase (``alpha = 0``).  Each entry is
    ``(rM_coeff, {k: coeff})``.
    """
    _check_degree(u)
    if not (params.lam > 0 and params.mu > 0):
        raise DomainError("split-base sums need lam > 0 and mu > 0")
    if params.alpha != 0.0:
        raise DomainError("split-base sums apply to the final phase (alpha = 0)")
    d = derive(params)
    rM, omega = d.r, d.omega
    if abs(r0 - rM) <= DEFAULT_BASE_TOL * max(abs(r0), abs(rM)):
        raise DomainError(f"bases coincide (r0={r0}, rM={rM}); use the equal-base sums")
    if not (0.0 < r0 < 1.0):
        raise DomainError(f"r0 must lie in (0, 1), got {r0}")
    kernels = []
    for shift in (-1, 0, 1):
        power = shift + 1

        def g(e: int) -> float:
            return omega * r0 * (1.0 / (1.0 - r0) ** e - 1.0 / (rM**power * (1.0 - r0 / rM) ** e))

        coeffs = {k: g(u + 1 - k) for k in range(u + 1)}
        if shift == 1:
            coeffs[u] -= 1.0 / params.lam
        kernels.append((-g(u + 1), coeffs))
    return tuple(kernels)


def evaluate_kernel(coeffs: dict[int, float], r0: float, j: int, j0: int,
                    rm_coeff: float = 0.0, rm: float = 0.0) -> float:
    n = j - j0
    total = sum(c * binom(n - 1 + k, k) for k, c in coeffs.items()) * r0**n
    return total + rm_coeff * rm**n


def _check_same_base(params: ClearingParams, r0: float, tol: float):
    r = derive(params).r
    if abs(r - r0) > tol * max(abs(r), abs(r0)):
        raise DomainError(f"phase base {r} differs from r0={r0}")


def weighted_occupancy_sums_equal(params: ClearingParams, r0: float, u: int, j: int, j0: int,
                                  tol: float = DEFAULT_BASE_TOL) -> tuple[float, float, float]:
    """Level-shift ``-1, 0, +1`` weighted occupancy sums when every base equals ``r0``."""
    if j < j0 + 1:
        raise DomainError("requires j >= j0 + 1")
    _check_same_base(params, r0, tol)
    r = derive(params).r
    return tuple(evaluate_kernel(c, r, j, j0) for c in equal_base_kernels(params, u))


def weighted_occupancy_sums_split(params: ClearingParams, r0: float, u: int, j: int, j0: int
                                  ) -> tuple[float, float, float]:
    """Weighted occupancy sums for the final phase when its base differs from ``r0``."""
    if j < j0 + 1:
        raise DomainError("requires j >= j0 + 1")
    rM = derive(params).r
    return tuple(evaluate_kernel(c, r0, j, j0, rm_coeff, rM)
                 for rm_coeff, c in split_base_kernels(params, r0, u))
