"""Fit metrics and the two-stage parameter search.

A candidate parameter set is scored by simulating the full timeline and
comparing the smoothed mean hospitalized-current and daily-deaths curves
against the observed ones, from the first day with observed hospitalizations.
Candidates whose runs blow past plausibility guards (too many ever-exposed
nodes, too few symptomatic ones versus confirmed cases) are excluded.

The search runs uniform random sampling over the parameter box, shrinks each
range to the hull of the top decile, then coordinate-descends on small grids.
Every evaluation uses the same master seed (common random numbers), so the
whole procedure is deterministic given (seed, budget, space).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataio import GroundTruth, PolicyTimeline, smooth
from .metapop import CountrySetup, SimOptions, SimulationResult, run_simulation
from .params import (
    BEHAVIOR_FIELDS,
    BEHAVIOR_RANGES,
    EPI_FIELDS,
    BehaviorParams,
    EpiParams,
    ParamError,
)

log = logging.getLogger(__name__)


class MetricError(ValueError):
    """A metric is undefined for the given inputs (constant series...)."""


class SearchFailure(RuntimeError):
    """No feasible candidate survived the exclusion rules."""

    def __init__(self, report: dict):
        self.report = report
        reasons = ", ".join(f"{k}={v}" for k, v in sorted(report.get("reasons", {}).items()))
        super().__init__(
            f"all {report.get('n_candidates', 0)} candidates were excluded ({reasons})"
        )


def smape(forecast: np.ndarray, actual: np.ndarray) -> float:
    """Symmetric mean absolute percentage error, bounded in [0, 200].

    Terms where both series are zero contribute zero.
    """
    f = np.asarray(forecast, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if f.shape != a.shape or f.ndim != 1:
        raise MetricError(f"smape needs equal-length 1-d series, got {f.shape} and {a.shape}")
    if f.size == 0:
        raise MetricError("smape of empty series")
    denom = (np.abs(a) + np.abs(f)) / 2.0
    terms = np.zeros_like(denom)
    nz = denom > 0
    terms[nz] = np.abs(f[nz] - a[nz]) / denom[nz]
    return float(100.0 * terms.mean())


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Sample Pearson correlation; raises MetricError for constant series."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError(f"pearson needs equal-length 1-d series, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise MetricError("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise MetricError("pearson is undefined for a constant series")
    return float((dx @ dy) / (sx * sy))


@dataclass(frozen=True)
class FitThresholds:
    """Plausibility guards applied to every run of a candidate."""

    max_exposed_frac: float = 0.6
    min_sym_vs_confirmed: float = 0.5
    smooth_window: int = 7


@dataclass
class FitScore:
    smape_hosp: float = math.inf
    smape_deaths: float = math.inf
    pearson_hosp: float = math.nan
    pearson_deaths: float = math.nan
    combined: float = math.inf
    excluded: bool = True
    reasons: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "smape_hosp": self.smape_hosp,
            "smape_deaths": self.smape_deaths,
            "pearson_hosp": self.pearson_hosp,
            "pearson_deaths": self.pearson_deaths,
            "combined": self.combined,
            "excluded": self.excluded,
            "reasons": list(self.reasons),
        }


def _combined(smape_value: float, pearson_value: float) -> float:
    return (smape_value / 100.0 + (1.0 - pearson_value)) / 2.0


def score_run(
    result: SimulationResult, gt: GroundTruth, thresholds: FitThresholds = FitThresholds()
) -> FitScore:
    """Score one simulation result against ground truth in node units.

    ``gt`` must already be rescaled to node units and cover the simulated
    days. Scoring starts at the first day with observed hospitalizations.
    """
    days = result.day_index
    if int(days[-1]) >= len(gt):
        raise MetricError(
            f"ground truth covers {len(gt)} days but the simulation reaches day {int(days[-1])}"
        )
    gt_hosp = gt.hospitalized_current[days]
    gt_deaths = gt.deaths_daily[days]
    nonzero = np.flatnonzero(gt_hosp > 0)
    if nonzero.size == 0:
        raise MetricError("ground truth has no day with hospitalized > 0 in the simulated range")
    start = int(nonzero[0])

    score = FitScore()
    reasons: list[str] = []
    n_total = result.n_total
    final_exposed = result.compartment("cum_exposed")[:, -1]
    exposed_frac = final_exposed / n_total
    if (exposed_frac > thresholds.max_exposed_frac).any():
        reasons.append("exposed_fraction_above_threshold")
    confirmed_end = float(gt.confirmed_cumulative[int(days[-1])])
    final_sym = result.cum_symptomatic[:, -1]
    if (final_sym < thresholds.min_sym_vs_confirmed * confirmed_end).any():
        reasons.append("symptomatic_below_confirmed_threshold")

    sim_hosp = result.compartment("H").mean(axis=0)
    sim_deaths = result.daily_deaths().mean(axis=0)
    w = thresholds.smooth_window
    try:
        sm_sim_hosp = smooth(sim_hosp, w)[start:]
        sm_gt_hosp = smooth(gt_hosp, w)[start:]
        sm_sim_deaths = smooth(sim_deaths, w)[start:]
        sm_gt_deaths = smooth(gt_deaths, w)[start:]
        score.smape_hosp = smape(sm_sim_hosp, sm_gt_hosp)
        score.smape_deaths = smape(sm_sim_deaths, sm_gt_deaths)
        score.pearson_hosp = pearson(sm_sim_hosp, sm_gt_hosp)
        score.pearson_deaths = pearson(sm_sim_deaths, sm_gt_deaths)
    except MetricError as err:
        reasons.append(f"metric_error: {err}")
        score.reasons = reasons
        return score

    score.reasons = reasons
    score.excluded = bool(reasons)
    if not score.excluded:
        score.combined = float(
            np.mean(
                [
                    _combined(score.smape_hosp, score.pearson_hosp),
                    _combined(score.smape_deaths, score.pearson_deaths),
                ]
            )
        )
    return score


@dataclass
class ParameterSpace:
    """Ordered box of searchable parameters (names route to the params objects)."""

    bounds: dict[str, tuple[float, float]]

    def __post_init__(self) -> None:
        for name, (lo, hi) in self.bounds.items():
            if name not in EPI_FIELDS and name not in BEHAVIOR_FIELDS:
                raise ParamError(f"unknown searchable parameter {name!r}")
            if not lo < hi:
                raise ParamError(f"empty range for {name!r}: ({lo!r}, {hi!r})")

    @property
    def names(self) -> list[str]:
        return list(self.bounds)

    def sample(self, rng: np.random.Generator) -> dict[str, float]:
        return {
            name: float(rng.uniform(lo, hi)) for name, (lo, hi) in self.bounds.items()
        }

    def midpoint(self) -> dict[str, float]:
        return {name: (lo + hi) / 2.0 for name, (lo, hi) in self.bounds.items()}

    def shrunk_to(self, candidates: list[dict[str, float]]) -> "ParameterSpace":
        """Hull of the given candidate points, per parameter."""
        new = {}
        for name, (lo, hi) in self.bounds.items():
            values = [c[name] for c in candidates]
            vlo, vhi = min(values), max(values)
            if vlo == vhi:  # degenerate hull: keep a sliver around the point
                span = (hi - lo) * 0.01
                vlo, vhi = max(lo, vlo - span), min(hi, vhi + span)
            new[name] = (vlo, vhi)
        return ParameterSpace(new)


def default_parameter_space() -> ParameterSpace:
    return ParameterSpace(dict(BEHAVIOR_RANGES))


@dataclass(frozen=True)
class SearchBudget:
    n_random: int
    n_sweeps: int
    grid_points: int = 5
    n_runs: int = 10


@dataclass
class CalibrationProblem:
    """Everything needed to score one candidate parameter set."""

    setup: CountrySetup
    timeline: PolicyTimeline
    gt_nodes: GroundTruth
    base_epi: EpiParams
    base_behavior: BehaviorParams
    thresholds: FitThresholds = FitThresholds()
    seed: int = 0
    threads: int = 1
    options: SimOptions = field(default_factory=SimOptions)


def build_params(
    base_epi: EpiParams, base_behavior: BehaviorParams, overrides: dict[str, float]
) -> tuple[EpiParams, BehaviorParams]:
    """Overlay named values onto the base parameter objects (validating them)."""
    epi_over = {k: v for k, v in overrides.items() if k in EPI_FIELDS}
    beh_over = {k: v for k, v in overrides.items() if k in BEHAVIOR_FIELDS}
    unknown = set(overrides) - set(epi_over) - set(beh_over)
    if unknown:
        raise ParamError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    return replace(base_epi, **epi_over), replace(base_behavior, **beh_over)


def evaluate_candidate(
    problem: CalibrationProblem, overrides: dict[str, float], n_runs: int
) -> FitScore:
    """Simulate and score one candidate; invalid parameter combos are excluded."""
    try:
        epi, behavior = build_params(problem.base_epi, problem.base_behavior, overrides)
    except ParamError as err:
        return FitScore(reasons=[f"invalid_params: {err}"])
    result = run_simulation(
        problem.setup,
        problem.timeline,
        epi,
        behavior,
        n_runs=n_runs,
        seed=problem.seed,
        threads=problem.threads,
        options=problem.options,
    )
    return score_run(result, problem.gt_nodes, problem.thresholds)


@dataclass
class LeaderboardRow:
    params: dict[str, float]
    score: FitScore
    stage: str


@dataclass
class SearchResult:
    best_params: dict[str, float]
    best_score: FitScore
    leaderboard: list[LeaderboardRow]
    shrunk_bounds: dict[str, tuple[float, float]]
    n_evaluations: int
    n_cache_hits: int


def _cache_key(params: dict[str, float]) -> tuple:
    # values go through the leaderboard's 10-significant-digit format so a
    # cache rebuilt from disk matches freshly sampled candidates exactly
    return tuple(sorted((k, float(f"{float(v):.10g}")) for k, v in params.items()))


def search(
    space: ParameterSpace,
    budget: SearchBudget,
    problem: CalibrationProblem,
    cache: dict[tuple, FitScore] | None = None,
    stage1_only: bool = False,
) -> SearchResult:
    """Two-stage search; deterministic given the problem seed.

    Stage 1 scores ``n_random`` uniform samples and shrinks every range to
    the hull of the top decile. Stage 2 runs ``n_sweeps`` rounds of
    coordinate descent with ``grid_points``-value grids over the shrunk
    ranges, keeping strict improvements. With a zero budget, the range
    midpoints are scored once.
    """
    cache = cache if cache is not None else {}
    leaderboard: list[LeaderboardRow] = []
    stats = {"evals": 0, "hits": 0}

    def scored(params: dict[str, float], stage: str) -> FitScore:
        key = _cache_key(params)
        if key in cache:
            stats["hits"] += 1
            score = cache[key]
        else:
            score = evaluate_candidate(problem, params, budget.n_runs)
            cache[key] = score
            stats["evals"] += 1
        leaderboard.append(LeaderboardRow(dict(params), score, stage))
        return score

    if budget.n_random <= 0 and budget.n_sweeps <= 0:
        mid = space.midpoint()
        score = scored(mid, "midpoint")
        return SearchResult(mid, score, leaderboard, dict(space.bounds),
                            stats["evals"], stats["hits"])

    rng = np.random.default_rng(problem.seed)
    candidates = [space.sample(rng) for _ in range(budget.n_random)]
    for i, cand in enumerate(candidates):
        score = scored(cand, "stage1")
        log.info("stage1 %d/%d combined=%s", i + 1, len(candidates), score.combined)

    ok = [row for row in leaderboard if not row.score.excluded]
    if not ok:
        reasons: dict[str, int] = {}
        for row in leaderboard:
            for r in row.score.reasons:
                reasons[r.split(":")[0]] = reasons.get(r.split(":")[0], 0) + 1
        raise SearchFailure(
            {"n_candidates": len(leaderboard), "reasons": reasons, "bounds": dict(space.bounds)}
        )
    ok.sort(key=lambda row: row.score.combined)
    top = ok[: max(1, len(ok) // 10)]
    shrunk = space.shrunk_to([row.params for row in top])
    best = min(ok, key=lambda row: row.score.combined)
    best_params, best_score = dict(best.params), best.score

    if not stage1_only:
        for sweep in range(budget.n_sweeps):
            for name in shrunk.names:
                lo, hi = shrunk.bounds[name]
                for value in np.linspace(lo, hi, budget.grid_points):
                    cand = dict(best_params)
                    cand[name] = float(value)
                    score = scored(cand, f"sweep{sweep}")
                    if not score.excluded and score.combined < best_score.combined:
                        best_params, best_score = cand, score
            log.info("sweep %d best combined=%s", sweep, best_score.combined)

    return SearchResult(
        best_params, best_score, leaderboard, dict(shrunk.bounds), stats["evals"], stats["hits"]
    )


# --- leaderboard artifacts ---

LEADERBOARD_FIXED = ("rank", "combined", "smape_h", "smape_d", "pearson_h", "pearson_d", "excluded")


def write_leaderboard_csv(path: str | Path, leaderboard: list[LeaderboardRow]) -> Path:
    import csv

    path = Path(path)
    param_names = list(leaderboard[0].params) if leaderboard else []
    ranked = sorted(
        leaderboard, key=lambda row: (math.inf if row.score.excluded else row.score.combined)
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(LEADERBOARD_FIXED) + param_names)
        for rank, row in enumerate(ranked, start=1):
            s = row.score
            writer.writerow(
                [
                    rank,
                    f"{s.combined:.6f}",
                    f"{s.smape_hosp:.6f}",
                    f"{s.smape_deaths:.6f}",
                    f"{s.pearson_hosp:.6f}",
                    f"{s.pearson_deaths:.6f}",
                    int(s.excluded),
                ]
                + [f"{row.params[p]:.10g}" for p in param_names]
            )
    return path


def read_leaderboard_csv(path: str | Path) -> dict[tuple, FitScore]:
    """Rebuild an evaluation cache from a previous leaderboard (for resume)."""
    import csv

    path = Path(path)
    cache: dict[tuple, FitScore] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return cache
        param_names = [c for c in reader.fieldnames if c not in LEADERBOARD_FIXED]
        for rec in reader:
            params = {p: float(rec[p]) for p in param_names}
            score = FitScore(
                smape_hosp=float(rec["smape_h"]),
                smape_deaths=float(rec["smape_d"]),
                pearson_hosp=float(rec["pearson_h"]),
                pearson_deaths=float(rec["pearson_d"]),
                combined=float(rec["combined"]),
                excluded=bool(int(rec["excluded"])),
            )
            cache[_cache_key(params)] = score
    return cache


# --- self consistency ---

def make_synthetic_gt(
    problem: CalibrationProblem, behavior: BehaviorParams, n_runs: int = 4
) -> GroundTruth:
    """Simulate known parameters and repackage the output as observations.

    The returned series are in node units: hospitalized and cumulative deaths
    are the mean curves over runs, and cumulative confirmed is set to the
    cumulative symptomatic count so the symptomatic exclusion guard sits
    safely above its threshold for the generating parameters.
    """
    result = run_simulation(
        problem.setup,
        problem.timeline,
        problem.base_epi,
        behavior,
        n_runs=n_runs,
        seed=problem.seed + 7919,  # observations come from an unseen stream
        threads=problem.threads,
        options=problem.options,
    )
    hosp = result.compartment("H").mean(axis=0).astype(np.float64)
    dead = result.compartment("D").mean(axis=0).astype(np.float64)
    confirmed = result.cum_symptomatic.mean(axis=0).astype(np.float64)
    return GroundTruth(
        dates=problem.timeline.dates.copy(),
        confirmed_cumulative=confirmed,
        deaths_cumulative=dead,
        deaths_daily=np.diff(dead, prepend=0.0),
        hospitalized_current=hosp,
    )


def self_test(
    space: ParameterSpace | None,
    budget: SearchBudget,
    problem: CalibrationProblem,
) -> dict:
    """Recovery oracle: search against synthetic observations generated from
    the problem's own base behavior parameters; the recovered score must be
    at least as good as the score at the parameter-range midpoints."""
    space = space or default_parameter_space()
    synthetic = replace(problem, gt_nodes=make_synthetic_gt(problem, problem.base_behavior,
                                                            n_runs=budget.n_runs))
    midpoint = space.midpoint()
    midpoint_score = evaluate_candidate(synthetic, midpoint, budget.n_runs)
    outcome = search(space, budget, synthetic)
    recovered_ok = not outcome.best_score.excluded and (
        midpoint_score.excluded
        or outcome.best_score.combined <= midpoint_score.combined + 1e-9
    )
    return {
        "passed": bool(recovered_ok),
        "recovered_params": outcome.best_params,
        "recovered_score": outcome.best_score.as_dict(),
        "midpoint_params": midpoint,
        "midpoint_score": midpoint_score.as_dict(),
        "n_evaluations": outcome.n_evaluations,
    }
