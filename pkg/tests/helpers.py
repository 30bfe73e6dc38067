"""Shared test support: fixture lists, small chains and balance residuals."""

from __future__ import annotations

import numpy as np

from capqbd.clearing import occupancy_time
from capqbd.model import (BoundarySpec, ChainSpec, PhaseJump, PhaseRates,
                          build_truncated_generator)
from capqbd.series import binom, brute_force_sum

EXAMPLE_MODELS = ["power_states", "fatigue", "virus"]
SOLVABLE = EXAMPLE_MODELS + ["all_equal_bases", "all_but_last_equal", "frozen_phase"]
ALL_VALID = SOLVABLE + ["mixed_multiplicity"]


def mm1_spec(lam: float = 1.0, mu: float = 2.0, j0: int = 1) -> ChainSpec:
    """Single-phase M/M/1 whose empty state is the boundary state ``s0``."""
    return ChainSpec(
        j0=j0,
        phases=(PhaseRates(lam, mu),),
        boundary=BoundarySpec(states=("s0",), into_repeating={("s0", 0): lam},
                              out_of_repeating={(0, "s0"): mu}),
    )


def skip_free_chain(lams, mus, jumps, j0: int = 1) -> ChainSpec:
    """Chain with one boundary state fed by the last phase and feeding phase 0.

    ``jumps`` maps ``(m, delta)`` to the rate of ``(m, j) -> (m+1, j+delta)``.
    """
    M = len(lams) - 1
    return ChainSpec(
        j0=j0,
        phases=tuple(PhaseRates(l, u) for l, u in zip(lams, mus)),
        jumps=tuple(PhaseJump(m, m + 1, d, r) for (m, d), r in jumps.items()),
        boundary=BoundarySpec(states=("idle",), into_repeating={("idle", 0): 1.0},
                              out_of_repeating={(M, "idle"): mus[M]}),
    )


def balance_residuals(spec: ChainSpec, dist, levels: int = 25) -> np.ndarray:
    """``(pi Q)(s)`` for every boundary state and every state up to ``j0 + levels``."""
    top = spec.j0 + levels
    gen = build_truncated_generator(spec, top + 1)
    pi = np.array([dist.probability(s) for s in gen.states])
    flow = pi @ gen.matrix
    keep = [k for k, s in enumerate(gen.states) if isinstance(s, str) or s[1] <= top]
    return flow[keep]


def oracle_sup_norm(spec: ChainSpec, dist, oracle, levels: int = 60) -> float:
    top = spec.j0 + levels
    return max(abs(dist.probability(s) - p) for s, p in oracle.probs.items()
               if isinstance(s, str) or s[1] <= top)


def direct_weighted_sums(params, r0, u, j, j0):
    """The three series summed term by term with the occupancy-time closed form."""
    def series(shift, start):
        return brute_force_sum(
            lambda l: binom(l - (j0 + 1) + u, u) * r0 ** (l - j0)
            * occupancy_time(params, j0, l + shift, j), start)
    return series(-1, j0 + 2), series(0, j0 + 1), series(1, j0 + 1)
