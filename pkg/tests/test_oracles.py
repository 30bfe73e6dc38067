from __future__ import annotations

import numpy as np
import pytest

from capqbd.clearing import ClearingParams, clearing_limiting_distribution
from capqbd.errors import NonConvergence, SingularMatrix, StateCapExceeded
from capqbd.model import BoundarySpec, ChainSpec, PhaseRates
from capqbd.oracles import (QbdBlocks, clearing_stationary_truncated, extract_blocks,
                            iterate_rate_matrix, truncated_stationary)

from helpers import ALL_VALID, SOLVABLE, mm1_spec


def test_mm1_truncated_is_geometric():
    sol = truncated_stationary(mm1_spec(1.0, 2.0))
    for j in range(1, 16):
        assert sol[(0, j + 1)] / sol[(0, j)] == pytest.approx(0.5, abs=1e-10)
    assert sum(sol.probs.values()) == pytest.approx(1.0, abs=1e-14)
    assert sol.top_mass < 1e-12


def test_clearing_chain_stationary_matches_closed_form():
    params = ClearingParams(1.0, 2.0, 1.0)
    pi = clearing_stationary_truncated(params, 300)
    for j in range(40):
        assert pi[j] == pytest.approx(clearing_limiting_distribution(params, j), abs=1e-9)


def test_truncation_grows_until_tail_is_small():
    slow = mm1_spec(1.0, 1.1)   # rho = 0.91: needs a deep truncation
    sol = truncated_stationary(slow, tol=1e-12)
    assert sol.j_max > slow.j0 + 64 and sol.top_mass < 1e-12
    fixed = truncated_stationary(slow, slow.j0 + 10, adaptive=False)
    assert fixed.j_max == slow.j0 + 10 and fixed.top_mass > 1e-3


def test_truncation_respects_state_cap():
    slow = mm1_spec(1.0, 1.01)
    sol = truncated_stationary(slow, state_cap=300)
    assert sol.j_max <= 300 and sol.top_mass > 1e-12
    with pytest.raises(StateCapExceeded):
        truncated_stationary(slow, 1000, state_cap=300)


def test_truncated_precondition():
    with pytest.raises(ValueError):
        truncated_stationary(mm1_spec(), 1)


def test_disconnected_truncation_is_singular():
    # two boundary states that only talk to themselves make the generator reducible
    spec = ChainSpec(j0=1, phases=(PhaseRates(1.0, 2.0),),
                     boundary=BoundarySpec(states=("a", "b", "c"),
                                           internal={("b", "c"): 1.0, ("c", "b"): 1.0},
                                           into_repeating={("a", 0): 1.0},
                                           out_of_repeating={(0, "a"): 2.0}))
    with pytest.raises(SingularMatrix):
        truncated_stationary(spec, 10, adaptive=False)


# ---------------------------------------------------------------- rate matrix


def test_virus_blocks(spec_of):
    b = extract_blocks(spec_of("virus"))
    assert b.A0[0, 1] == pytest.approx(0.1)
    np.testing.assert_allclose(np.diag(b.A0), [0.8, 0.9, 0.0])


def test_fatigue_blocks(spec_of):
    b = extract_blocks(spec_of("fatigue"))
    np.testing.assert_allclose(np.diag(b.A2), [3.0, 2.0, 1.0])


@pytest.mark.parametrize("name", ALL_VALID)
def test_block_invariants(name, spec_of):
    b = extract_blocks(spec_of(name))
    assert b.A0.min() >= 0 and b.A2.min() >= 0
    off = b.A1 - np.diag(np.diag(b.A1))
    assert off.min() >= 0
    np.testing.assert_allclose((b.A0 + b.A1 + b.A2).sum(axis=1), 0.0, atol=1e-14)


def test_scalar_rate_matrix():
    R = iterate_rate_matrix(extract_blocks(mm1_spec(1.0, 2.0)))
    assert R.shape == (1, 1) and R[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_rate_matrix_nonconvergence():
    blocks = QbdBlocks(np.array([[1.0]]), np.array([[-2.0]]), np.array([[1.0]]))  # null recurrent
    with pytest.raises(NonConvergence):
        iterate_rate_matrix(blocks, max_iter=50)


@pytest.mark.parametrize("name", ALL_VALID)
def test_rate_matrix_is_upper_triangular(name, spec_of):
    R = iterate_rate_matrix(extract_blocks(spec_of(name)))
    assert R.min() >= -1e-15
    assert np.max(np.abs(np.tril(R, -1)), initial=0.0) <= 1e-10


@pytest.mark.parametrize("name", SOLVABLE)
def test_rate_matrix_propagates_oracle_levels(name, spec_of, oracle_of):
    spec, sol = spec_of(name), oracle_of(name)
    R = iterate_rate_matrix(extract_blocks(spec))
    n = spec.M + 1
    for j in range(spec.j0 + 5, spec.j0 + 16):
        now = np.array([sol[(m, j)] for m in range(n)])
        nxt = np.array([sol[(m, j + 1)] for m in range(n)])
        np.testing.assert_allclose(now @ R, nxt, rtol=1e-7, atol=1e-300)
