from __future__ import annotations

import functools

import pytest
from hypothesis import HealthCheck, settings

from capqbd import solve
from capqbd.fixtures import load_fixture
from capqbd.oracles import truncated_stationary

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def cached_spec(name: str):
    return load_fixture(name)


@functools.lru_cache(maxsize=None)
def cached_solution(name: str):
    return solve(cached_spec(name))


@functools.lru_cache(maxsize=None)
def cached_oracle(name: str):
    return truncated_stationary(cached_spec(name))


@pytest.fixture
def spec_of():
    return cached_spec


@pytest.fixture
def solution_of():
    return cached_solution


@pytest.fixture
def oracle_of():
    return cached_oracle
