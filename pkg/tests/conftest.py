"""Shared fixtures and small builders used across the test suite."""

from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from epinetsim.core import State
from epinetsim.dataio import PolicyDay, PolicyTimeline
from epinetsim.metapop import RegionGraph, make_region
from epinetsim.networks import Network, NetworkSuite
from epinetsim.params import GBR_BEHAVIOR, BehaviorParams, EpiParams


@pytest.fixture
def epi() -> EpiParams:
    return EpiParams()


@pytest.fixture
def behavior() -> BehaviorParams:
    return GBR_BEHAVIOR


def complete_network(n: int) -> Network:
    edges = np.array(list(combinations(range(n), 2)), dtype=np.int64)
    return Network(n, edges)


def complete_region(n: int, seed: int = 0, index: int = 0) -> RegionGraph:
    """Region whose every restriction level is the complete graph K_n."""
    suite = NetworkSuite.from_single(complete_network(n))
    return make_region(index, suite, np.random.default_rng(seed))


def empty_region(n: int, seed: int = 0, index: int = 0) -> RegionGraph:
    """Region with no edges at all; exposure can never happen."""
    suite = NetworkSuite.from_single(Network(n, np.empty((0, 2), dtype=np.int64)))
    return make_region(index, suite, np.random.default_rng(seed))


def flat_timeline(
    n_days: int,
    *,
    stay_home: int = 0,
    school_closing: int = 0,
    workplace_closing: int = 0,
    testing_policy: int = 0,
    contact_tracing: int = 1,
    daily_tests: float = 0.0,
    daily_vaccines: float = 0.0,
    international_open: bool = True,
    internal_open: bool = True,
) -> PolicyTimeline:
    day = PolicyDay(
        stay_home=stay_home,
        school_closing=school_closing,
        workplace_closing=workplace_closing,
        testing_policy=testing_policy,
        contact_tracing=contact_tracing,
        daily_tests=daily_tests,
        daily_vaccines=daily_vaccines,
        international_open=international_open,
        internal_open=internal_open,
    )
    return PolicyTimeline.from_days([day] * n_days)


def place_states(region: RegionGraph, assignments: dict[State, int]) -> None:
    """Overwrite the first nodes of the region with the given state counts."""
    total = sum(assignments.values())
    assert total <= region.n
    region.states[:] = State.S
    pos = 0
    for state, count in assignments.items():
        region.states[pos : pos + count] = state
        pos += count
