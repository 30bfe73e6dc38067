"""Closed forms for the M/M/1/clearing model.

Every phase of a class-M chain, observed above level ``j0`` and stopped at
its first jump to another phase, behaves like an M/M/1 queue whose
population is wiped out at rate ``alpha``.  The quantities here (busy-period
transform, base term, occupancy times) are the building blocks of the
phase-by-phase solution in :mod:`capqbd.core`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


def _nonneg(**kw):
    for name, value in kw.items():
        if not (value >= 0.0) or not math.isfinite(value):
            raise DomainError(f"{name} must be finite and nonnegative, got {value}")


def busy_period_transform(lam: float, mu: float, s: float) -> float:
    """Laplace transform at ``s`` of an M/M/1 busy period with rates ``(lam, mu)``.

    ``phi(s) = (s + lam + mu - sqrt((s + lam + mu)^2 - 4 lam mu)) / (2 lam)``.
    The discriminant is factored as ``(s + (√λ-√μ)²)(s + (√λ+√μ)²)`` so the
    square root stays accurate when ``s -> 0`` and ``lam ≈ mu``; the
    numerator is rationalised to avoid cancellation.  For ``lam = 0`` the
    continuous limit ``mu / (s + mu)`` is returned.
    """
    _nonneg(lam=lam, mu=mu, s=s)
    if lam == 0.0:
        if mu == 0.0 and s == 0.0:
            raise DomainError("phi is undefined at lam = mu = s = 0")
        return mu / (s + mu)
    a = s + lam + mu
    sl, sm = math.sqrt(lam), math.sqrt(mu)
    root = math.sqrt((s + (sl - sm) ** 2) * (s + (sl + sm) ** 2))
    # (a - root) / (2 lam) == 2 mu / (a + root)
    return 2.0 * mu / (a + root)


@dataclass(frozen=True)
class ClearingParams:
    lam: float
    mu: float
    alpha: float

    def __post_init__(self):
        _nonneg(lam=self.lam, mu=self.mu, alpha=self.alpha)

    @property
    def stable(self) -> bool:
        return self.lam < self.mu or self.alpha > 0.0


@dataclass(frozen=True)
class ClearingDerived:
    """Derived constants of one phase.

    ``omega`` is ``None`` when ``lam == 0`` (the quantity is undefined there,
    and every formula that would use it has its own degenerate branch).
    """

    rho: float | None
    phi_at_alpha: float
    r: float
    omega: float | None


def derive(params: ClearingParams) -> ClearingDerived:
    lam, mu, alpha = params.lam, params.mu, params.alpha
    if lam == 0.0:
        phi = busy_period_transform(0.0, mu, alpha) if (mu > 0 or alpha > 0) else 1.0
        return ClearingDerived(rho=0.0 if mu > 0 else None, phi_at_alpha=phi, r=0.0, omega=None)
    if mu > 0.0:
        rho = lam / mu
        phi = busy_period_transform(lam, mu, alpha)
        r = rho * phi
    else:
        rho = None
        phi = 0.0
        r = lam / (lam + alpha)
    if r >= 1.0 or r * phi >= 1.0:
        raise DomainError(f"phase (lam={lam}, mu={mu}, alpha={alpha}) is numerically "
                          "at the stability boundary")
    omega = r / (lam * (1.0 - r * phi))
    return ClearingDerived(rho=rho, phi_at_alpha=phi, r=r, omega=omega)


def _require_positive_rates(params: ClearingParams):
    if not (params.lam > 0 and params.mu > 0):
        raise DomainError("requires lam > 0 and mu > 0")


def clearing_limiting_distribution(params: ClearingParams, j: int) -> float:
    """Stationary probability of ``j`` jobs in the M/M/1/clearing model."""
    _require_positive_rates(params)
    if not params.stable:
        raise DomainError("clearing model is not ergodic (lam >= mu and alpha = 0)")
    if j < 0:
        raise DomainError("level must be nonnegative")
    eta = params.lam / params.mu * busy_period_transform(params.lam, params.mu, params.alpha)
    return (1.0 - eta) * eta**j


def reach_probability(params: ClearingParams, ell: int, j: int) -> float:
    """Probability of hitting ``j`` before ``0`` from ``ell`` (clearings count as hitting 0)."""
    _require_positive_rates(params)
    if ell < 1 or j < 1:
        raise DomainError("levels must be >= 1")
    phi = busy_period_transform(params.lam, params.mu, params.alpha)
    if ell >= j:
        return phi ** (ell - j)
    eta = params.lam / params.mu * phi
    q = eta * phi
    return eta ** (j - ell) * (1.0 - q**ell) / (1.0 - q**j)


def expected_clearing_busy_period(params: ClearingParams) -> float:
    """Mean time from state 1 until the clearing model first empties."""
    lam, mu, alpha = params.lam, params.mu, params.alpha
    if alpha > 0.0:
        if lam == 0.0 and mu == 0.0:
            return 1.0 / alpha
        return (1.0 - busy_period_transform(lam, mu, alpha)) / alpha
    if lam < mu:
        return 1.0 / (mu - lam)
    raise DomainError("busy period has infinite mean (alpha = 0 and lam >= mu)")


def occupancy_time(params: ClearingParams, j0: int, ell: int, j: int) -> float:
    """Expected time in ``(m, j)`` before leaving ``{(m, l): l > j0}``, starting at ``(m, ell)``.

    Covers the four cases ``lam, mu > 0``; ``lam > mu = 0``; ``mu > lam = 0``
    and ``lam = mu = 0``.
    """
    if ell < j0 + 1 or j < j0 + 1:
        raise DomainError(f"levels must be >= j0 + 1 = {j0 + 1}")
    lam, mu, alpha = params.lam, params.mu, params.alpha
    if lam > 0 and mu > 0:
        d = derive(params)
        rphi = d.r * d.phi_at_alpha
        if ell <= j:
            return d.omega * d.r ** (j - ell) * (1.0 - rphi ** (ell - j0))
        return d.omega * d.phi_at_alpha ** (ell - j) * (1.0 - rphi ** (j - j0))
    if lam > 0:
        # upward-only: each state is visited at most once
        r = lam / (lam + alpha)
        return r ** (j - ell + 1) / lam if ell <= j else 0.0
    if mu > 0:
        return mu ** (ell - j) / (mu + alpha) ** (ell - j + 1) if ell >= j else 0.0
    if alpha <= 0.0:
        raise DomainError("lam = mu = alpha = 0: the phase is absorbing")
    return 1.0 / alpha if ell == j else 0.0
