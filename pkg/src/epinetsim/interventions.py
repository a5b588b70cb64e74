"""Policy-driven interventions: the exposure-probability schedule, vaccination,
testing, and contact tracing.

Counts passed to vaccinate/run_testing are region-scale node counts (the
country figures divided by the person-per-node scale and apportioned by
region size upstream).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy import sparse

from .core import State

if TYPE_CHECKING:
    from .metapop import RegionGraph

DAYS_PER_MONTH = 30


class InterventionError(ValueError):
    pass


@dataclass
class ExposureTracker:
    """Online form of the exposure-probability schedule.

    p_e sits at p_e_max until the first lockdown day, drops to p_e_min on
    every stay-home day, and after a lift climbs linearly back to p_e_max
    over t_ramp months. A new lockdown resets the ramp.
    """

    p_e_min: float
    p_e_max: float
    t_ramp: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p_e_min < self.p_e_max <= 1.0:
            raise InterventionError(
                f"need 0 < p_e_min < p_e_max <= 1, got {self.p_e_min!r}, {self.p_e_max!r}"
            )
        if self.t_ramp <= 0:
            raise InterventionError(f"t_ramp must be positive, got {self.t_ramp!r}")
        self._ramp_days = self.t_ramp * DAYS_PER_MONTH
        self._seen_lockdown = False
        self._days_since_lift = 0

    def update(self, stay_home: int) -> float:
        """Feed one day's stay-home flag, get that day's p_e."""
        if stay_home:
            self._seen_lockdown = True
            self._days_since_lift = 0
            return self.p_e_min
        if not self._seen_lockdown:
            return self.p_e_max
        self._days_since_lift += 1
        frac = min(1.0, self._days_since_lift / self._ramp_days)
        return self.p_e_min + (self.p_e_max - self.p_e_min) * frac


def compute_pe_schedule(
    stay_home: Sequence[int] | np.ndarray, p_e_min: float, p_e_max: float, t_ramp: float
) -> np.ndarray:
    """Vector of per-day exposure probabilities for a whole timeline."""
    flags = np.asarray(getattr(stay_home, "stay_home", stay_home), dtype=np.int64)
    if flags.size == 0:
        raise InterventionError("empty timeline")
    tracker = ExposureTracker(p_e_min, p_e_max, t_ramp)
    return np.array([tracker.update(int(f)) for f in flags], dtype=np.float64)


def vaccination_eligible(region: "RegionGraph") -> np.ndarray:
    """Boolean mask of nodes that may receive a dose today.

    Excluded: deceased, hospitalized, symptomatic, any quarantined state,
    already vaccinated nodes, and children.
    """
    s = region.states
    open_state = (s == State.S) | (s == State.E) | (s == State.ASY) | (s == State.R)
    return open_state & ~region.vaccinated & ~region.child


def vaccinate(region: "RegionGraph", doses: int, rng: np.random.Generator) -> int:
    """Vaccinate up to ``doses`` uniformly chosen eligible nodes; returns the count."""
    if doses <= 0:
        return 0
    pool = np.flatnonzero(vaccination_eligible(region))
    if pool.size == 0:
        return 0
    if doses >= pool.size:
        chosen = pool
    else:
        chosen = rng.choice(pool, size=doses, replace=False)
    region.vaccinated[chosen] = True
    return int(chosen.size)


def run_testing(
    region: "RegionGraph", tests_today: int, testing_policy: int, rng: np.random.Generator
) -> np.ndarray:
    """Apply one day of testing; positives move to quarantine immediately.

    Policy 0: no testing. Policies 1-2: only open symptomatic nodes are
    tested (all positive). Policy 3: tests are spread uniformly over nodes
    that are not quarantined, hospitalized, recovered, or deceased; Asy and
    Sy test positive. Returns the sorted positive node indices.
    """
    if testing_policy not in (0, 1, 2, 3):
        raise InterventionError(f"testing policy must be in 0..3, got {testing_policy!r}")
    empty = np.empty(0, dtype=np.int64)
    if testing_policy == 0 or tests_today <= 0:
        return empty
    s = region.states
    if testing_policy <= 2:
        pool = np.flatnonzero(s == State.SY)
        if pool.size == 0:
            return empty
        if tests_today >= pool.size:
            positives = pool
        else:
            positives = rng.choice(pool, size=tests_today, replace=False)
        s[positives] = State.Q_SY
        return np.sort(positives)
    testable = (s == State.S) | (s == State.E) | (s == State.ASY) | (s == State.SY)
    pool = np.flatnonzero(testable)
    if pool.size == 0:
        return empty
    if tests_today >= pool.size:
        tested = pool
    else:
        tested = rng.choice(pool, size=tests_today, replace=False)
    hit_asy = tested[s[tested] == State.ASY]
    hit_sy = tested[s[tested] == State.SY]
    s[hit_asy] = State.Q_ASY
    s[hit_sy] = State.Q_SY
    return np.sort(np.concatenate([hit_asy, hit_sy]))


def trace_contacts(
    region: "RegionGraph",
    adjacency: sparse.csr_matrix,
    positives: np.ndarray,
    tracing_level: int,
    p_ct_2: float,
    p_ct_3: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Quarantine graph neighbors of today's positives, one hop, same day.

    Level 1 does nothing. Levels 2/3 give each (positive, neighbor) pair an
    independent chance p_ct(level); hit neighbors move S->Q_S, E->Q_E,
    Asy->Q_Asy, Sy->Q_Sy. Other states are unaffected. Returns the indices
    actually moved.
    """
    if tracing_level not in (1, 2, 3):
        raise InterventionError(f"tracing level must be in 1..3, got {tracing_level!r}")
    empty = np.empty(0, dtype=np.int64)
    if tracing_level == 1 or len(positives) == 0:
        return empty
    p_ct = p_ct_2 if tracing_level == 2 else p_ct_3
    indptr, indices = adjacency.indptr, adjacency.indices
    neigh = np.concatenate(
        [indices[indptr[v] : indptr[v + 1]] for v in np.asarray(positives, dtype=np.int64)]
    )
    if neigh.size == 0:
        return empty
    hit = np.unique(neigh[rng.random(neigh.size) < p_ct]).astype(np.int64)
    if hit.size == 0:
        return empty
    s = region.states
    moved = []
    for src, dst in (
        (State.S, State.Q_S),
        (State.E, State.Q_E),
        (State.ASY, State.Q_ASY),
        (State.SY, State.Q_SY),
    ):
        sel = hit[s[hit] == src]
        s[sel] = dst
        moved.append(sel)
    return np.sort(np.concatenate(moved))
