"""Metapopulation layer: regions, the country-level world, inter-region
mixing, imported cases, and the multi-run simulation driver.

One node stands for ``SCALE_FACTOR`` persons. A country of population P is
split into m = round(P / SCALE_FACTOR / 3000) regions with sizes drawn
uniformly in [2500, 3500] and rescaled to the target node count. Every region
carries its own network suite and its own random generator substream keyed by
(run index, region index), so runs are reproducible and identical whether
executed serially or on a worker pool.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from .core import (
    N_RECORD,
    N_STATES,
    DayContext,
    State,
    count_states,
    step_region,
)
from .interventions import (
    ExposureTracker,
    compute_pe_schedule,
    run_testing,
    trace_contacts,
    vaccinate,
)
from .networks import NetworkSuite, build_suite, select_network
from .params import BehaviorParams, EpiParams

if TYPE_CHECKING:
    from .dataio import PolicyTimeline

SCALE_FACTOR = 100
REGION_MIN = 2500
REGION_MAX = 3500
REGION_TARGET_MEAN = 3000
SEED_DAY = 30
DEFAULT_P_INT = 0.01


class WorldError(ValueError):
    pass


@dataclass
class RegionGraph:
    """One region: node states, static flags, network suite, and rng stream."""

    index: int
    states: np.ndarray
    vaccinated: np.ndarray
    child: np.ndarray
    suite: NetworkSuite
    rng: np.random.Generator

    @property
    def n(self) -> int:
        return int(self.states.shape[0])

    def counts(self) -> np.ndarray:
        return count_states(self.states)

    def cum_exposed(self) -> int:
        """Nodes that have ever left S (no reinfection, so this is exact)."""
        s = self.states
        return int(self.n - int((s == State.S).sum()) - int((s == State.Q_S).sum()))


def make_region(
    index: int,
    suite: NetworkSuite,
    rng: np.random.Generator,
    child: np.ndarray | None = None,
) -> RegionGraph:
    n = suite.n
    if child is None:
        child = np.zeros(n, dtype=bool)
    return RegionGraph(
        index=index,
        states=np.zeros(n, dtype=np.int8),
        vaccinated=np.zeros(n, dtype=bool),
        child=np.asarray(child, dtype=bool),
        suite=suite,
        rng=rng,
    )


@dataclass
class World:
    regions: list[RegionGraph]
    r_mix: float
    p_int: float = DEFAULT_P_INT
    scale_factor: int = SCALE_FACTOR

    @property
    def n_total(self) -> int:
        return sum(r.n for r in self.regions)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([r.n for r in self.regions], dtype=np.int64)


@dataclass(frozen=True)
class CountrySetup:
    """Static country description used to build per-run worlds."""

    population: float
    child_fraction: float
    vaccination_start_day: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.child_fraction <= 1.0:
            raise WorldError(f"child_fraction must be in [0, 1], got {self.child_fraction!r}")
        if self.population <= 0:
            raise WorldError(f"population must be positive, got {self.population!r}")


def _region_rng(seed: int, run_index: int, region_index: int) -> np.random.Generator:
    # spawn keys make the (run, region) substream independent of the region count
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(run_index, region_index + 1)))
    )


def _draw_region_sizes(target: int, m: int, rng: np.random.Generator) -> np.ndarray:
    sizes = rng.integers(REGION_MIN, REGION_MAX + 1, size=m).astype(np.int64)
    scaled = sizes * (target / sizes.sum())
    sizes = np.clip(np.rint(scaled).astype(np.int64), REGION_MIN, REGION_MAX)
    diff = target - int(sizes.sum())
    step = 1 if diff > 0 else -1
    while diff != 0:
        room = sizes < REGION_MAX if step > 0 else sizes > REGION_MIN
        idx = np.flatnonzero(room)
        if idx.size == 0:
            break
        for i in idx:
            sizes[i] += step
            diff -= step
            if diff == 0:
                break
    return sizes


def build_world(
    population: float,
    child_fraction: float,
    behavior: BehaviorParams,
    seed: int,
    run_index: int = 0,
    p_int: float = DEFAULT_P_INT,
) -> World:
    """Build one run's world: region sizes, child flags, and network suites."""
    target = int(np.floor(population / SCALE_FACTOR + 0.5))
    if target < REGION_MIN:
        raise WorldError(
            f"population {population!r} maps to {target} nodes, below the minimum "
            f"region size {REGION_MIN}"
        )
    m = max(1, int(np.floor(target / REGION_TARGET_MEAN + 0.5)))
    world_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(run_index, 0)))
    )
    sizes = _draw_region_sizes(target, m, world_rng)
    regions = []
    for i, n_i in enumerate(sizes.tolist()):
        rng = _region_rng(seed, run_index, i)
        n_children = int(np.floor(child_fraction * n_i + 0.5))
        child = np.zeros(n_i, dtype=bool)
        if n_children > 0:
            child[rng.choice(n_i, size=n_children, replace=False)] = True
        suite = build_suite(n_i, behavior, rng)
        regions.append(make_region(i, suite, rng, child))
    return World(regions=regions, r_mix=behavior.r_mix, p_int=p_int)


def seed_infection(world: World) -> int:
    """Expose one uniformly chosen susceptible node per region."""
    seeded = 0
    for region in world.regions:
        s_idx = np.flatnonzero(region.states == State.S)
        if s_idx.size == 0:
            continue
        node = s_idx[region.rng.integers(0, s_idx.size)]
        region.states[node] = State.E
        seeded += 1
    return seeded


def stochastic_round(x: float, rng: np.random.Generator) -> int:
    """floor(x) plus a Bernoulli draw on the fractional part (mean-preserving)."""
    if x < 0:
        raise WorldError(f"cannot stochastically round a negative value: {x!r}")
    base = int(np.floor(x))
    frac = x - base
    if frac > 0.0 and rng.random() < frac:
        base += 1
    return base


def apportion_largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    """Split ``total`` integer units proportionally to ``weights``.

    Floors the quotas, then hands the remaining units to the largest
    fractional parts (ties broken by lower index, so the split is
    deterministic).
    """
    weights = np.asarray(weights, dtype=np.float64)
    if total < 0:
        raise WorldError(f"cannot apportion a negative total: {total!r}")
    if weights.sum() <= 0:
        raise WorldError("apportionment weights must have a positive sum")
    quotas = total * weights / weights.sum()
    base = np.floor(quotas).astype(np.int64)
    remainder = int(total - base.sum())
    if remainder > 0:
        frac = quotas - base
        order = np.lexsort((np.arange(weights.size), -frac))
        base[order[:remainder]] += 1
    return base


def expected_mixing_exposures(
    world: World, p_e_today: float, order: str = "corrected"
) -> np.ndarray:
    """Pre-rounding expected inter-region exposures per region.

    With the ``corrected`` orientation region i receives
    sum_{j != i} r_mix * (p_e / N_total) * I_j * S_i, i.e. infectious
    elsewhere meeting susceptibles here; ``as_written`` swaps the roles.
    """
    if order not in ("corrected", "as_written"):
        raise WorldError(f"mixing_index_order must be 'corrected' or 'as_written', got {order!r}")
    m = len(world.regions)
    lam = np.zeros(m, dtype=np.float64)
    if m < 2 or world.r_mix == 0 or p_e_today == 0:
        return lam
    inf = np.array(
        [int(((r.states == State.ASY) | (r.states == State.SY)).sum()) for r in world.regions],
        dtype=np.float64,
    )
    sus = np.array([int((r.states == State.S).sum()) for r in world.regions], dtype=np.float64)
    coeff = world.r_mix * p_e_today / world.n_total
    if order == "corrected":
        lam = coeff * sus * (inf.sum() - inf)
    else:
        lam = coeff * inf * (sus.sum() - sus)
    return lam


def mix_regions(
    world: World,
    p_e_today: float,
    epi: EpiParams,
    internal_open: bool = True,
    order: str = "corrected",
) -> np.ndarray:
    """Convert stochastically rounded inter-region exposures into new E nodes.

    Sampled susceptible nodes that are vaccinated escape with probability
    v_eff1. Returns the realized conversions per region. No-op (and no rng
    consumption) while internal travel is restricted.
    """
    m = len(world.regions)
    realized = np.zeros(m, dtype=np.int64)
    if not internal_open:
        return realized
    lam = expected_mixing_exposures(world, p_e_today, order)
    if not lam.any():
        return realized
    for i, region in enumerate(world.regions):
        target = stochastic_round(float(lam[i]), region.rng)
        if target <= 0:
            continue
        s_idx = np.flatnonzero(region.states == State.S)
        if s_idx.size == 0:
            continue
        if target >= s_idx.size:
            chosen = s_idx
        else:
            chosen = region.rng.choice(s_idx, size=target, replace=False)
        if epi.v_eff1 > 0.0:
            protected = region.vaccinated[chosen] & (
                region.rng.random(chosen.size) < epi.v_eff1
            )
            chosen = chosen[~protected]
        region.states[chosen] = State.E
        realized[i] = chosen.size
    return realized


def import_cases(world: World, international_open: bool) -> int:
    """With probability p_int per region, expose one random susceptible node."""
    if not international_open:
        return 0
    imported = 0
    for region in world.regions:
        if region.rng.random() >= world.p_int:
            continue
        s_idx = np.flatnonzero(region.states == State.S)
        if s_idx.size == 0:
            continue
        node = s_idx[region.rng.integers(0, s_idx.size)]
        region.states[node] = State.E
        imported += 1
    return imported


@dataclass(frozen=True)
class CompartmentSnapshot:
    """Country-level compartment counts used to warm-start scenario runs."""

    counts: np.ndarray  # (N_STATES,) floats, mean over baseline runs
    day: int


@dataclass(frozen=True)
class SimOptions:
    """Knobs of the daily loop that are not country or disease parameters."""

    start_day: int = 0
    seed_day: int = SEED_DAY
    snapshot: CompartmentSnapshot | None = None
    controller_spec: Any = None  # object with .make() -> controller
    mixing_index_order: str = "corrected"
    p_int: float = DEFAULT_P_INT


@dataclass
class SimulationResult:
    """Per-run, per-day, per-region compartment counts plus run metadata.

    ``region_counts`` has shape (n_runs, n_days, m, 12): the 11 compartments
    followed by the cumulative ever-exposed count. ``day_index`` maps the day
    axis back to absolute timeline days.
    """

    region_counts: np.ndarray
    cum_symptomatic: np.ndarray
    region_sizes: np.ndarray
    start_day: int
    controller_logs: list[np.ndarray] | None = None
    _totals: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_runs(self) -> int:
        return int(self.region_counts.shape[0])

    @property
    def n_days(self) -> int:
        return int(self.region_counts.shape[1])

    @property
    def n_regions(self) -> int:
        return int(self.region_counts.shape[2])

    @property
    def day_index(self) -> np.ndarray:
        return self.start_day + np.arange(self.n_days)

    @property
    def n_total(self) -> np.ndarray:
        return self.region_sizes.sum(axis=1)

    def totals(self) -> np.ndarray:
        if self._totals is None:
            self._totals = self.region_counts.sum(axis=2)
        return self._totals

    def mean_totals(self) -> np.ndarray:
        return self.totals().astype(np.float64).mean(axis=0)

    def std_totals(self) -> np.ndarray:
        return self.totals().astype(np.float64).std(axis=0)

    def compartment(self, name: str) -> np.ndarray:
        from .core import RECORD_NAMES

        return self.totals()[:, :, RECORD_NAMES.index(name)]

    def daily_deaths(self) -> np.ndarray:
        dead = self.compartment("D")
        return np.diff(dead, axis=1, prepend=dead[:, :1] * 0)


def _apply_snapshot(world: World, snapshot: CompartmentSnapshot) -> None:
    counts = np.asarray(snapshot.counts, dtype=np.float64)
    if counts.shape != (N_STATES,):
        raise WorldError(f"snapshot must hold {N_STATES} compartment counts, got {counts.shape}")
    fractions = counts / counts.sum()
    for region in world.regions:
        per_state = apportion_largest_remainder(region.n, fractions)
        order = region.rng.permutation(region.n)
        states = np.empty(region.n, dtype=np.int8)
        pos = 0
        for state_code, k in enumerate(per_state.tolist()):
            states[order[pos : pos + k]] = state_code
            pos += k
        region.states = states


def _to_nodes(persons: float, scale: int) -> int:
    return int(np.floor(persons / scale + 0.5))


def _simulate_world(
    world: World,
    timeline: "PolicyTimeline",
    epi: EpiParams,
    behavior: BehaviorParams,
    options: SimOptions,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Run the daily loop on a prepared world. Returns per-day records."""
    n_days_total = len(timeline)
    start = options.start_day
    if not 0 <= start < n_days_total:
        raise WorldError(f"start_day {start} outside timeline of {n_days_total} days")
    m = len(world.regions)
    sizes = world.sizes
    n_recorded = n_days_total - start
    records = np.zeros((n_recorded, m, N_RECORD), dtype=np.int64)
    cum_sym = np.zeros(n_recorded, dtype=np.int64)
    sym_so_far = 0

    controller = options.controller_spec.make() if options.controller_spec is not None else None
    force_lockdown = False
    log: list[tuple[int, int, int]] = []
    if controller is not None:
        tracker = ExposureTracker(behavior.p_e_min, behavior.p_e_max, behavior.t_ramp)
        schedule = None
    else:
        tracker = None
        schedule = compute_pe_schedule(
            timeline.stay_home, behavior.p_e_min, behavior.p_e_max, behavior.t_ramp
        )

    n_total = world.n_total
    for day in range(start, n_days_total):
        if controller is not None:
            sh = 1 if force_lockdown else 0
            sc = wp = 3 if force_lockdown else 0
        else:
            sh = int(timeline.stay_home[day])
            sc = int(timeline.school_closing[day])
            wp = int(timeline.workplace_closing[day])
        testing_policy = int(timeline.testing_policy[day])
        tracing = int(timeline.contact_tracing[day])
        p_e = tracker.update(sh) if tracker is not None else float(schedule[day])
        level = select_network(wp, sc, sh)
        quarantine_active = testing_policy > 0

        if day == options.seed_day:
            seed_infection(world)

        day_sym = 0
        for region in world.regions:
            ctx = DayContext(region.suite.adjacency[level], p_e, quarantine_active)
            tally = step_region(region, ctx, epi, region.rng)
            day_sym += tally.i_to_sy + tally.qi_to_qsy

        doses = _to_nodes(float(timeline.daily_vaccines[day]), world.scale_factor)
        if doses > 0:
            for region, share in zip(world.regions, apportion_largest_remainder(doses, sizes)):
                if share > 0:
                    vaccinate(region, int(share), region.rng)

        tests = _to_nodes(float(timeline.daily_tests[day]), world.scale_factor)
        if tests > 0 and testing_policy > 0:
            for region, share in zip(world.regions, apportion_largest_remainder(tests, sizes)):
                if share <= 0:
                    continue
                positives = run_testing(region, int(share), testing_policy, region.rng)
                if positives.size and tracing >= 2:
                    trace_contacts(
                        region,
                        region.suite.adjacency[level],
                        positives,
                        tracing,
                        behavior.p_ct_2,
                        behavior.p_ct_3,
                        region.rng,
                    )

        if controller is not None or timeline.internal_from_proxy:
            internal_open = sh == 0
        else:
            internal_open = bool(timeline.internal_open[day])
        mix_regions(world, p_e, epi, internal_open=internal_open, order=options.mixing_index_order)
        import_cases(world, bool(timeline.international_open[day]))

        row = day - start
        for i, region in enumerate(world.regions):
            records[row, i, :N_STATES] = region.counts()
            records[row, i, N_STATES] = region.cum_exposed()
        sym_so_far += day_sym
        cum_sym[row] = sym_so_far

        if controller is not None:
            hospitalized = int(records[row, :, State.H].sum())
            log.append((day, hospitalized, int(force_lockdown)))
            force_lockdown = bool(controller.update(hospitalized, n_total))

    log_arr = np.array(log, dtype=np.int64) if controller is not None else None
    return records, cum_sym, log_arr


def _simulate_single_run(
    run_index: int,
    setup: CountrySetup,
    timeline: "PolicyTimeline",
    epi: EpiParams,
    behavior: BehaviorParams,
    seed: int,
    options: SimOptions,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None]:
    world = build_world(
        setup.population, setup.child_fraction, behavior, seed, run_index, p_int=options.p_int
    )
    if options.snapshot is not None:
        _apply_snapshot(world, options.snapshot)
    records, cum_sym, log = _simulate_world(world, timeline, epi, behavior, options)
    return records, cum_sym, world.sizes, log


def _run_task(args: tuple) -> tuple:
    return _simulate_single_run(*args)


def run_simulation(
    setup: CountrySetup | World,
    timeline: "PolicyTimeline",
    epi: EpiParams,
    behavior: BehaviorParams,
    n_runs: int = 10,
    seed: int = 0,
    threads: int = 1,
    options: SimOptions | None = None,
) -> SimulationResult:
    """Simulate ``n_runs`` independent runs and collect their records.

    Each run rebuilds the world (fresh region sizes and networks) from
    substreams keyed by (seed, run index), so results are identical for any
    thread count; the pool only changes wall time.
    """
    options = options or SimOptions()
    if isinstance(setup, World):
        if n_runs != 1:
            raise WorldError("a prebuilt world can only serve a single run")
        if options.snapshot is not None:
            _apply_snapshot(setup, options.snapshot)
        records, cum_sym, log = _simulate_world(setup, timeline, epi, behavior, options)
        return SimulationResult(
            region_counts=records[None, ...],
            cum_symptomatic=cum_sym[None, ...],
            region_sizes=setup.sizes[None, ...],
            start_day=options.start_day,
            controller_logs=[log] if log is not None else None,
        )

    tasks = [(r, setup, timeline, epi, behavior, seed, options) for r in range(n_runs)]
    if threads > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=min(threads, n_runs)) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(t) for t in tasks]

    records = np.stack([o[0] for o in outcomes])
    cum_sym = np.stack([o[1] for o in outcomes])
    sizes = np.stack([o[2] for o in outcomes])
    logs = [o[3] for o in outcomes]
    has_logs = any(l is not None for l in logs)
    return SimulationResult(
        region_counts=records,
        cum_symptomatic=cum_sym,
        region_sizes=sizes,
        start_day=options.start_day,
        controller_logs=logs if has_logs else None,
    )
