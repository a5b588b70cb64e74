"""Counterfactual scenario transforms and the lockdown feedback controller.

Each scenario kind rewrites the historical policy timeline (and sometimes the
disease parameters) before simulation:

1   no interventions at all: restriction flags cleared, no testing, no
    contact tracing, no vaccination
2   restriction flags cleared (testing / tracing / vaccination kept)
3   no testing and no contact tracing
4   stay-home orders cleared (school / workplace levels kept)
5   school and workplace closures aligned with stay-home days
6   vaccine efficacies scaled by a factor (clamped to [0, 1])
7   daily vaccine doses scaled by a factor
8   daily test counts scaled by a factor
9   no testing before a start day, constant timeline-average testing after
10  restriction flags driven by a hospitalization-threshold controller
    with hysteresis instead of the historical record

Kinds 6 and 7 branch off a baseline simulation at the vaccination start day:
country-level mean compartment counts are snapshotted and re-seeded into a
fresh world, so only the vaccination era is re-simulated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataio import PolicyTimeline
from .metapop import (
    CompartmentSnapshot,
    CountrySetup,
    SimOptions,
    SimulationResult,
    run_simulation,
)
from .params import BehaviorParams, EpiParams

N_KINDS = 10

SCENARIO_LABELS = {
    1: "no_interventions",
    2: "no_restrictions",
    3: "no_testing_or_tracing",
    4: "no_stay_home",
    5: "closures_follow_stay_home",
    6: "vaccine_efficacy_scaled",
    7: "vaccine_doses_scaled",
    8: "test_volume_scaled",
    9: "delayed_constant_testing",
    10: "threshold_lockdowns",
}

_NEEDS_FACTOR = {6, 7, 8}
_NEEDS_SNAPSHOT = {6, 7}


class ScenarioError(ValueError):
    """Invalid scenario specification."""


@dataclass(frozen=True)
class ScenarioSpec:
    """One counterfactual to run. Fields beyond ``kind`` apply per kind:

    ``factor`` for kinds 6-8, ``start_day`` for kind 9, ``h_lock`` (hospitalized
    fraction threshold) and ``t_lock`` (days below before release) for kind 10.
    """

    kind: int
    factor: float | None = None
    start_day: int | None = None
    h_lock: float | None = None
    t_lock: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.kind, int) or not 1 <= self.kind <= N_KINDS:
            raise ScenarioError(f"scenario kind must be an integer in [1, {N_KINDS}], got {self.kind!r}")
        if self.kind in _NEEDS_FACTOR:
            if self.factor is None or self.factor < 0:
                raise ScenarioError(f"kind {self.kind} needs factor >= 0, got {self.factor!r}")
        elif self.factor is not None:
            raise ScenarioError(f"kind {self.kind} does not take a factor")
        if self.kind == 9:
            if self.start_day is None or not 30 <= self.start_day <= 180:
                raise ScenarioError(
                    f"kind 9 needs start_day in [30, 180], got {self.start_day!r}"
                )
        elif self.start_day is not None:
            raise ScenarioError(f"kind {self.kind} does not take a start_day")
        if self.kind == 10:
            if self.h_lock is None or not 0 < self.h_lock < 1:
                raise ScenarioError(f"kind 10 needs h_lock in (0, 1), got {self.h_lock!r}")
            if self.t_lock is None or self.t_lock < 1:
                raise ScenarioError(f"kind 10 needs t_lock >= 1, got {self.t_lock!r}")
        elif self.h_lock is not None or self.t_lock is not None:
            raise ScenarioError(f"kind {self.kind} does not take h_lock/t_lock")

    @property
    def label(self) -> str:
        return SCENARIO_LABELS[self.kind]

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        for name in ("factor", "start_day", "h_lock", "t_lock"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ScenarioSpec":
        if not isinstance(payload, dict) or "kind" not in payload:
            raise ScenarioError("scenario spec must be an object with a 'kind' field")
        known = {"kind", "factor", "start_day", "h_lock", "t_lock"}
        extra = set(payload) - known
        if extra:
            raise ScenarioError(f"unknown scenario field(s): {', '.join(sorted(extra))}")
        kind = payload["kind"]
        if isinstance(kind, float) and kind.is_integer():
            kind = int(kind)
        fields = dict(payload, kind=kind)
        if "t_lock" in fields and fields["t_lock"] is not None:
            t = fields["t_lock"]
            if isinstance(t, float) and t.is_integer():
                fields["t_lock"] = int(t)
        if "start_day" in fields and fields["start_day"] is not None:
            s = fields["start_day"]
            if isinstance(s, float) and s.is_integer():
                fields["start_day"] = int(s)
        return cls(**fields)

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioSpec":
        path = Path(path)
        try:
            payload = json.loads(path.read_text())
        except FileNotFoundError:
            raise ScenarioError(f"scenario file not found: {path}") from None
        except json.JSONDecodeError as err:
            raise ScenarioError(f"scenario file {path} is not valid JSON: {err}") from None
        return cls.from_dict(payload)


@dataclass(frozen=True)
class ControllerSpec:
    """Picklable factory for per-run lockdown controllers."""

    h_lock: float
    t_lock: int

    def make(self) -> "LockdownController":
        return LockdownController(self.h_lock, self.t_lock)


@dataclass
class LockdownController:
    """Hysteresis switch on the hospitalized fraction.

    ``update`` consumes one day-end reading and returns that day's label.
    Lockdown engages the day the fraction reaches ``h_lock`` and stays on
    until ``t_lock`` consecutive readings fall below it; the release label
    appears the day after the streak completes.
    """

    h_lock: float
    t_lock: int
    active: bool = False
    days_below: int = 0

    def update(self, hospitalized: int, n_total: int) -> bool:
        frac = hospitalized / n_total
        if not self.active:
            if frac >= self.h_lock:
                self.active = True
                self.days_below = 0
            return self.active
        if frac >= self.h_lock:
            self.days_below = 0
            return True
        self.days_below += 1
        if self.days_below >= self.t_lock:
            self.active = False
            self.days_below = 0
        return True


def apply_scenario(
    spec: ScenarioSpec, timeline: PolicyTimeline, epi: EpiParams
) -> tuple[PolicyTimeline, EpiParams]:
    """Rewrite the timeline / disease parameters for the counterfactual.

    Kind 10 leaves the timeline untouched here; the controller overrides the
    restriction flags online during simulation.
    """
    n = len(timeline)
    zeros = np.zeros(n, dtype=np.int64)
    if spec.kind == 1:
        return (
            timeline.copy_with(
                stay_home=zeros,
                school_closing=zeros,
                workplace_closing=zeros,
                testing_policy=zeros,
                contact_tracing=np.ones(n, dtype=np.int64),
                daily_tests=np.zeros(n),
                daily_vaccines=np.zeros(n),
            ),
            epi,
        )
    if spec.kind == 2:
        return (
            timeline.copy_with(
                stay_home=zeros, school_closing=zeros, workplace_closing=zeros
            ),
            epi,
        )
    if spec.kind == 3:
        return (
            timeline.copy_with(
                testing_policy=zeros,
                contact_tracing=np.ones(n, dtype=np.int64),
                daily_tests=np.zeros(n),
            ),
            epi,
        )
    if spec.kind == 4:
        return timeline.copy_with(stay_home=zeros), epi
    if spec.kind == 5:
        closed = np.where(timeline.stay_home > 0, 3, 0).astype(np.int64)
        return (
            timeline.copy_with(school_closing=closed.copy(), workplace_closing=closed.copy()),
            epi,
        )
    if spec.kind == 6:
        return (
            timeline,
            replace(
                epi,
                v_eff1=min(1.0, max(0.0, epi.v_eff1 * spec.factor)),
                v_eff2=min(1.0, max(0.0, epi.v_eff2 * spec.factor)),
            ),
        )
    if spec.kind == 7:
        return timeline.copy_with(daily_vaccines=timeline.daily_vaccines * spec.factor), epi
    if spec.kind == 8:
        return timeline.copy_with(daily_tests=timeline.daily_tests * spec.factor), epi
    if spec.kind == 9:
        tests = np.zeros(n)
        tests[spec.start_day :] = float(timeline.daily_tests.mean())
        return timeline.copy_with(daily_tests=tests), epi
    return timeline, epi  # kind 10


def snapshot_from_result(result: SimulationResult, day: int) -> CompartmentSnapshot:
    """Country-level mean compartment counts (over runs) at an absolute day."""
    index = day - result.start_day
    if not 0 <= index < result.n_days:
        raise ScenarioError(
            f"snapshot day {day} outside simulated range "
            f"[{result.start_day}, {result.start_day + result.n_days - 1}]"
        )
    # (n_runs, regions, 12) at one day -> mean country totals, states only
    counts = result.region_counts[:, index].sum(axis=1).mean(axis=0)[:11]
    return CompartmentSnapshot(counts=counts.astype(np.float64), day=day)


@dataclass
class ScenarioOutcome:
    spec: ScenarioSpec
    scenario: SimulationResult
    baseline: SimulationResult | None
    timeline: PolicyTimeline
    epi: EpiParams


def run_scenario(
    spec: ScenarioSpec,
    setup: CountrySetup,
    timeline: PolicyTimeline,
    epi: EpiParams,
    behavior: BehaviorParams,
    n_runs: int = 10,
    seed: int = 0,
    threads: int = 1,
    options: SimOptions | None = None,
    baseline: SimulationResult | None = None,
    include_baseline: bool = False,
) -> ScenarioOutcome:
    """Run one counterfactual (plus the baseline when needed or requested).

    Kinds 6 and 7 always simulate the baseline first (unless one is passed
    in), snapshot it at the vaccination start day and re-simulate from there.
    """
    options = options or SimOptions()
    needs_baseline = include_baseline or spec.kind in _NEEDS_SNAPSHOT
    if needs_baseline and baseline is None:
        baseline = run_simulation(
            setup, timeline, epi, behavior, n_runs=n_runs, seed=seed, threads=threads,
            options=options,
        )

    mod_timeline, mod_epi = apply_scenario(spec, timeline, epi)
    run_options = options
    if spec.kind in _NEEDS_SNAPSHOT:
        if setup.vaccination_start_day is None:
            raise ScenarioError(f"kind {spec.kind} needs a vaccination start day in the setup")
        snap = snapshot_from_result(baseline, setup.vaccination_start_day)
        run_options = replace(options, start_day=setup.vaccination_start_day, snapshot=snap)
    elif spec.kind == 10:
        run_options = replace(
            options, controller_spec=ControllerSpec(spec.h_lock, spec.t_lock)
        )

    scenario = run_simulation(
        setup, mod_timeline, mod_epi, behavior, n_runs=n_runs, seed=seed, threads=threads,
        options=run_options,
    )
    return ScenarioOutcome(spec, scenario, baseline if needs_baseline else None,
                           mod_timeline, mod_epi)


def count_lockdown_days(result: SimulationResult) -> float:
    """Mean number of controller-ON days per run (kind 10 results only)."""
    if not result.controller_logs:
        raise ScenarioError("result carries no controller log")
    totals = [sum(flag for _, _, flag in log) for log in result.controller_logs]
    return float(np.mean(totals))
