"""Summary measures of a solved chain, from closed-form series sums.

Boundary states carry no level: level moments are conditional on the chain
being in the repeating portion, and the boundary mass is reported apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .core import SolutionTerm, StationaryDistribution, level_mass_weight
from .series import negbin_upper_sum


def _moment_sums(t: SolutionTerm) -> tuple[float, float, float]:
    """``sum_n w(n) b^n * (1, n, n^2)`` over ``n = j - j0 >= 0`` for one term."""
    b, d = t.base, t.degree
    if b == 0.0:
        return (1.0 if d == 0 else 0.0), 0.0, 0.0
    g = 1.0 - b
    if d == 0:
        return 1.0 / g, b / g**2, b * (1.0 + b) / g**3
    # G(b) = b / (1-b)^(d+1); first and second moments are b G' and b (b G')'
    s1 = b * (1.0 + d * b) / g ** (d + 2)
    s2 = b * ((1.0 + 2.0 * d * b) * g + (d + 2) * b * (1.0 + d * b)) / g ** (d + 3)
    return level_mass_weight(b, d), s1, s2


def _upper_tail(t: SolutionTerm, n0: int, j0: int) -> float:
    """``sum_{n >= n0} C(n-1+d, d) b^n`` for ``n0 >= 1``."""
    if t.base == 0.0:
        return 0.0
    return t.base**n0 * negbin_upper_sum(t.base, t.degree, j0 + n0, j0 + 1)


@dataclass(frozen=True)
class MetricsReport:
    total_mass: float
    mean_level: float
    level_variance: float
    phase_marginals: tuple[float, ...]
    tail: Mapping[int, float]
    boundary_probs: Mapping[str, float]

    @property
    def boundary_mass(self) -> float:
        return sum(self.boundary_probs.values())

    @property
    def repeating_mass(self) -> float:
        return sum(self.phase_marginals)

    def to_dict(self) -> dict:
        return {
            "total_mass": self.total_mass,
            "mean_level": self.mean_level,
            "level_variance": self.level_variance,
            "phase_marginals": list(self.phase_marginals),
            "tail": {str(k): v for k, v in self.tail.items()},
            "boundary_mass": self.boundary_mass,
        }


def compute_metrics(dist: StationaryDistribution, tail_thresholds: Iterable[int] = ()
                    ) -> MetricsReport:
    j0 = dist.j0
    marginals, m0, m1, m2 = [], 0.0, 0.0, 0.0
    for terms in dist.phase_solutions:
        phase = 0.0
        for t in terms:
            s0, s1, s2 = _moment_sums(t)
            phase += t.coeff * s0
            m1 += t.coeff * s1
            m2 += t.coeff * s2
        marginals.append(phase)
        m0 += phase
    mean_n = m1 / m0 if m0 > 0 else 0.0
    variance = max(m2 / m0 - mean_n**2, 0.0) if m0 > 0 else 0.0
    tail = {}
    for J in sorted(set(int(x) for x in tail_thresholds)):
        if J <= j0:
            tail[J] = m0
        else:
            tail[J] = sum(t.coeff * _upper_tail(t, J - j0, j0)
                          for terms in dist.phase_solutions for t in terms)
    return MetricsReport(
        total_mass=sum(dist.boundary_probs.values()) + m0,
        mean_level=j0 + mean_n,
        level_variance=variance,
        phase_marginals=tuple(marginals),
        tail=tail,
        boundary_probs=dict(dist.boundary_probs),
    )
