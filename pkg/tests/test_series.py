from __future__ import annotations

import pytest
from hypothesis import assume, given, settings, strategies as st

from capqbd.clearing import ClearingParams, derive, occupancy_time
from capqbd.errors import DomainError
from capqbd.series import (binom, brute_force_sum, equal_base_kernels, evaluate_kernel,
                           negbin_tail_sum, negbin_truncated_sum, negbin_upper_sum,
                           split_base_kernels, weighted_occupancy_sums_equal,
                           weighted_occupancy_sums_split)

from helpers import direct_weighted_sums

beta_st = st.floats(0.05, 0.95)
deg_st = st.integers(0, 5)
REL = 1e-10


def rel_close(a, b, rel=REL):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def test_binom_polynomial_extension():
    assert binom(5, 2) == 10
    assert binom(0, 0) == 1 and binom(-1, 0) == 1
    for k in range(1, 6):
        assert binom(k - 1, k) == 0.0
    assert binom(-1, 1) == -1
    assert binom(3, -1) == 0.0


def test_brute_force_sum_ignores_leading_zeros():
    total = brute_force_sum(lambda l: 0.0 if l < 10 else 0.5**l, 0)
    assert total == pytest.approx(2 * 0.5**10, rel=1e-15)


def test_brute_force_sum_reports_divergence():
    with pytest.raises(DomainError):
        brute_force_sum(lambda l: 1.0, 0, max_terms=1000)


# ------------------------------------------------------------ negative binomial


def test_tail_sum_examples():
    assert negbin_tail_sum(0.5, 0) == pytest.approx(1.0)
    assert negbin_tail_sum(0.5, 1) == pytest.approx(2.0)
    assert negbin_tail_sum(0.3, 3) == pytest.approx(0.3 / 0.7**4)
    assert brute_force_sum(lambda l: binom(l + 1, 1) * 0.5 ** (l + 1), 0) == pytest.approx(2.0)


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.2, 1.5])
def test_tail_sum_domain(beta):
    with pytest.raises(DomainError):
        negbin_tail_sum(beta, 1)


@given(beta=beta_st, n=deg_st, j0=st.integers(0, 5))
def test_tail_sum_matches_direct_sum(beta, n, j0):
    direct = brute_force_sum(lambda l: binom(l - j0 + n, n) * beta ** (l - (j0 - 1)), j0)
    assert rel_close(negbin_tail_sum(beta, n), direct)


def test_truncated_sum_examples():
    b, j0 = 0.5, 3
    assert negbin_truncated_sum(b, 0, j0 + 5, j0) == pytest.approx((b - b**6) / (1 - b))
    four = sum(binom(l - j0 + 2, 2) * b ** (l - j0 + 1) for l in range(j0, j0 + 4))
    assert negbin_truncated_sum(b, 2, j0 + 4, j0) == pytest.approx(four, rel=1e-14)
    for n in range(5):
        assert negbin_truncated_sum(0.37, n, j0 + 1, j0) == pytest.approx(0.37)


@given(beta=st.one_of(beta_st, st.floats(1.05, 3.0)), n=deg_st, d=st.integers(1, 30))
def test_truncated_sum_matches_finite_sum(beta, n, d):
    j0 = 2
    direct = sum(binom(l - j0 + n, n) * beta ** (l - j0 + 1) for l in range(j0, j0 + d))
    assert rel_close(negbin_truncated_sum(beta, n, j0 + d, j0), direct, 1e-9)


def test_upper_sum_examples():
    assert negbin_upper_sum(0.4, 0, 5, 5) == pytest.approx(1 / 0.6)
    for j in range(5, 12):
        assert negbin_upper_sum(0.4, 0, j, 5) == pytest.approx(1 / 0.6)
    direct = brute_force_sum(lambda l: binom(l - 5 + 2, 2) * 0.4 ** (l - 8), 8)
    assert negbin_upper_sum(0.4, 2, 8, 5) == pytest.approx(direct, rel=1e-12)


@given(beta=beta_st, n=deg_st, d=st.integers(0, 20))
def test_upper_sum_matches_direct_sum(beta, n, d):
    j0, j = 1, 1 + d
    direct = brute_force_sum(lambda l: binom(l - j0 + n, n) * beta ** (l - j), j)
    assert rel_close(negbin_upper_sum(beta, n, j, j0), direct)


@given(beta=beta_st, n=deg_st, d=st.integers(1, 20))
def test_truncated_and_upper_recombine(beta, n, d):
    j0, j = 0, d
    whole = negbin_tail_sum(beta, n)
    parts = negbin_truncated_sum(beta, n, j, j0) + beta ** (j - j0 + 1) * negbin_upper_sum(
        beta, n, j, j0)
    assert parts == pytest.approx(whole, rel=1e-12)


# ------------------------------------------------------ weighted occupancy sums


equal_params = st.builds(ClearingParams, st.floats(0.1, 3.0), st.floats(0.1, 3.0),
                         st.floats(0.05, 2.0))


@settings(max_examples=30)
@given(params=equal_params, u=deg_st, d=st.integers(1, 8))
def test_equal_base_sums_match_series(params, u, d):
    j0 = 1
    r0 = derive(params).r
    assume(0.05 <= r0 <= 0.95)
    closed = weighted_occupancy_sums_equal(params, r0, u, j0 + d, j0)
    for c, b in zip(closed, direct_weighted_sums(params, r0, u, j0 + d, j0)):
        assert rel_close(c, b)


def test_equal_base_middle_sum_without_degree():
    params = ClearingParams(1.0, 2.0, 0.5)
    d = derive(params)
    for n in (1, 2, 5):
        _, mid, _ = weighted_occupancy_sums_equal(params, d.r, 0, n, 0)
        assert mid == pytest.approx(d.omega * binom(n, 1) * d.r**n)
    assert weighted_occupancy_sums_equal(params, d.r, 0, 1, 0)[1] == pytest.approx(d.omega * d.r)


def test_equal_base_requires_matching_base():
    with pytest.raises(DomainError):
        weighted_occupancy_sums_equal(ClearingParams(1, 2, 0.5), 0.9, 1, 3, 1)


def _swapped_phi_exponent(params, u):
    """Equal-base kernels with phi**(1 - delta) in place of phi**(1 + delta)."""
    minus, zero, plus = equal_base_kernels(params, u)
    d = derive(params)
    g = 1.0 - d.r * d.phi_at_alpha
    alt_minus = dict(minus)
    alt_plus = dict(plus)
    for k in range(1, u + 1):
        alt_minus[k] = d.omega * d.r * d.phi_at_alpha**2 / g ** (u + 1 - k)
        alt_plus[k] = plus[k] - d.omega * d.r * d.phi_at_alpha**2 / g ** (u + 1 - k) \
            + d.omega * d.r / g ** (u + 1 - k)
    return alt_minus, zero, alt_plus


@pytest.mark.parametrize("u", [1, 2, 3])
def test_phi_exponent_sign_is_one_plus_delta(u):
    """Only the ``phi**(1 + delta)`` reading matches the series; ``phi**(1 - delta)`` does not."""
    params = ClearingParams(1.0, 1.6, 0.4)
    r0 = derive(params).r
    j0, j = 0, 4
    direct = direct_weighted_sums(params, r0, u, j, j0)
    good = [evaluate_kernel(c, r0, j, j0) for c in equal_base_kernels(params, u)]
    bad = [evaluate_kernel(c, r0, j, j0) for c in _swapped_phi_exponent(params, u)]
    for g, b, ref in zip(good, bad, direct):
        assert rel_close(g, ref)
    # shifts -1 and +1 are the ones carrying phi**0 versus phi**2
    assert not rel_close(bad[0], direct[0], 1e-4)
    assert not rel_close(bad[2], direct[2], 1e-4)


split_last = st.tuples(st.floats(0.1, 3.0), st.floats(1.1, 4.0)).map(
    lambda t: ClearingParams(t[0], t[0] * t[1], 0.0))


@settings(max_examples=30)
@given(params=split_last, r0=st.floats(0.05, 0.95), u=deg_st, d=st.integers(1, 8))
def test_split_base_sums_match_series(params, r0, u, d):
    rM = derive(params).r
    assume(abs(1.0 - r0 / rM) >= 0.2)
    j0 = 2
    closed = weighted_occupancy_sums_split(params, r0, u, j0 + d, j0)
    for c, b in zip(closed, direct_weighted_sums(params, r0, u, j0 + d, j0)):
        assert rel_close(c, b)


@settings(max_examples=40)
@given(params=split_last, gap=st.floats(1e-3, 0.2), below=st.booleans(), u=deg_st,
       d=st.integers(1, 8))
def test_split_base_sums_degrade_only_as_bases_merge(params, gap, below, u, d):
    """Close bases cost accuracy like ``|1 - r0/rM|**-(u+1)``, and no faster."""
    rM = derive(params).r
    r0 = rM * (1.0 - gap if below else 1.0 + gap)
    assume(0.02 <= r0 <= 0.98)
    j0 = 2
    amplification = abs(1.0 - r0 / rM) ** -(u + 1)
    closed = weighted_occupancy_sums_split(params, r0, u, j0 + d, j0)
    for c, b in zip(closed, direct_weighted_sums(params, r0, u, j0 + d, j0)):
        assert rel_close(c, b, max(REL, 1e-14 * amplification))


def test_split_kernel_shapes():
    params = ClearingParams(1.0, 2.5, 0.0)
    kernels = split_base_kernels(params, 0.3, 0)
    for _, coeffs in kernels:
        assert set(coeffs) == {0}
    # only the +1 shift carries the -1/lambda correction
    g0 = kernels[0][1][0]
    plain_plus = kernels[2][1][0] + 1.0 / params.lam
    d = derive(params)
    assert g0 == pytest.approx(d.omega * 0.3 * (1 / 0.7 - 1 / (1 - 0.3 / d.r)))
    assert plain_plus == pytest.approx(d.omega * 0.3 * (1 / 0.7 - 1 / (d.r**2 * (1 - 0.3 / d.r))))


def test_split_requires_distinct_bases():
    params = ClearingParams(1.0, 2.0, 0.0)
    with pytest.raises(DomainError):
        split_base_kernels(params, 0.5, 1)
    with pytest.raises(DomainError):
        split_base_kernels(ClearingParams(1.0, 2.0, 0.3), 0.2, 1)
