"""Command-line interface.

Four subcommands cover the whole workflow:

  simulate   run the historical timeline for one country config
  calibrate  fit parameters against the observed curves
  scenario   run a counterfactual (optionally against the baseline)
  report     render figures from a results directory

Exit codes: 0 success, 1 malformed input (config, data file, scenario spec),
2 violated model invariants (bad parameters, infeasible search, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__
from .calibration import (
    CalibrationProblem,
    FitThresholds,
    ParameterSpace,
    SearchBudget,
    SearchFailure,
    default_parameter_space,
    read_leaderboard_csv,
    search,
    self_test,
    write_leaderboard_csv,
)
from .core import CoreError
from .dataio import (
    DataError,
    GroundTruth,
    PolicyTimeline,
    SchemaError,
    file_sha256,
    load_country,
    write_aggregate_csv,
    write_compare_csv,
    write_controller_log_csv,
    write_manifest,
    write_run_csv,
)
from .interventions import InterventionError
from .metapop import (
    SCALE_FACTOR,
    CountrySetup,
    SimOptions,
    WorldError,
    run_simulation,
)
from .networks import NetworkError
from .params import (
    BehaviorParams,
    EpiParams,
    GBR_BEHAVIOR,
    ISR_BEHAVIOR,
    ParamError,
)
from .report import ReportError, render_report
from .scenarios import ScenarioError, ScenarioSpec, count_lockdown_days, run_scenario

log = logging.getLogger(__name__)

_BEHAVIOR_PRESETS = {"gbr": GBR_BEHAVIOR, "isr": ISR_BEHAVIOR}

_INPUT_ERRORS = (SchemaError, DataError, ScenarioError, ReportError)
_INVARIANT_ERRORS = (
    ParamError,
    WorldError,
    CoreError,
    NetworkError,
    InterventionError,
    SearchFailure,
)


class ConfigError(ValueError):
    """Country config file missing, unreadable or self-inconsistent."""


@dataclass
class RunConfig:
    """A country config resolved into ready-to-use objects."""

    name: str
    data_path: Path
    setup: CountrySetup
    timeline: PolicyTimeline
    gt: GroundTruth
    epi: EpiParams
    behavior: BehaviorParams
    seed: int
    n_runs: int
    threads: int
    out: Path
    search_space: ParameterSpace | None
    fit_thresholds: FitThresholds | None
    options: SimOptions


def load_config(path: str | Path, args: argparse.Namespace) -> RunConfig:
    """Read a config JSON; CLI flags override file values where given."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")

    for key in ("data", "population", "child_fraction"):
        if key not in payload:
            raise ConfigError(f"config {path} lacks required key {key!r}")

    data_path = Path(payload["data"])
    if not data_path.is_absolute():
        data_path = path.parent / data_path
    population = float(payload["population"])
    timeline, gt = load_country(data_path, population)

    try:
        epi = EpiParams(**payload.get("epi", {}))
        preset = payload.get("behavior_preset")
        if preset is not None:
            if preset not in _BEHAVIOR_PRESETS:
                raise ConfigError(f"unknown behavior_preset {preset!r}")
            behavior = replace(_BEHAVIOR_PRESETS[preset], **payload.get("behavior", {}))
        else:
            behavior = BehaviorParams(**payload.get("behavior", {}))
    except TypeError as err:
        raise ConfigError(f"config {path}: {err}") from None

    vstart = payload.get("vaccination_start_day")
    if vstart is None:
        import numpy as np

        nonzero = np.flatnonzero(timeline.daily_vaccines > 0)
        vstart = int(nonzero[0]) if nonzero.size else None
        if vstart is not None:
            log.info("vaccination start day derived from data: %d", vstart)
    setup = CountrySetup(
        population=population,
        child_fraction=float(payload["child_fraction"]),
        vaccination_start_day=vstart,
    )

    space = None
    if "search_space" in payload:
        raw = payload["search_space"]
        if not isinstance(raw, dict):
            raise ConfigError("search_space must map parameter names to [lo, hi] pairs")
        space = ParameterSpace({k: (float(v[0]), float(v[1])) for k, v in raw.items()})

    thresholds = None
    if "fit_thresholds" in payload:
        raw = payload["fit_thresholds"]
        if not isinstance(raw, dict):
            raise ConfigError("fit_thresholds must be an object of threshold overrides")
        try:
            thresholds = FitThresholds(**raw)
        except TypeError as err:
            raise ConfigError(f"config {path}: fit_thresholds: {err}") from None

    options = SimOptions(
        mixing_index_order=payload.get("mixing_index_order", "corrected"),
        p_int=float(payload.get("import_probability", 0.01)),
    )

    out = Path(args.out) if args.out else Path(payload.get("out", "results"))
    return RunConfig(
        name=str(payload.get("name", path.stem)),
        data_path=data_path,
        setup=setup,
        timeline=timeline,
        gt=gt,
        epi=epi,
        behavior=behavior,
        seed=int(args.seed if args.seed is not None else payload.get("seed", 0)),
        n_runs=int(args.runs if args.runs is not None else payload.get("n_runs", 10)),
        threads=int(args.threads if args.threads is not None else payload.get("threads", 1)),
        out=out,
        search_space=space,
        fit_thresholds=thresholds,
        options=options,
    )


def _manifest_payload(cfg: RunConfig, command: str, extra: dict | None = None) -> dict:
    from dataclasses import asdict

    payload = {
        "command": command,
        "version": __version__,
        "country": cfg.name,
        "population": cfg.setup.population,
        "child_fraction": cfg.setup.child_fraction,
        "vaccination_start_day": cfg.setup.vaccination_start_day,
        "data_file": str(cfg.data_path),
        "data_sha256": file_sha256(cfg.data_path),
        "seed": cfg.seed,
        "n_runs": cfg.n_runs,
        "threads": cfg.threads,
        "person_units_scale": float(SCALE_FACTOR),
        "epi": asdict(cfg.epi),
        "behavior": asdict(cfg.behavior),
    }
    if extra:
        payload.update(extra)
    return payload


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    cfg.out.mkdir(parents=True, exist_ok=True)
    result = run_simulation(
        cfg.setup, cfg.timeline, cfg.epi, cfg.behavior,
        n_runs=cfg.n_runs, seed=cfg.seed, threads=cfg.threads, options=cfg.options,
    )
    write_run_csv(cfg.out / "runs.csv", result)
    write_aggregate_csv(cfg.out / "aggregate.csv", result, scale=float(SCALE_FACTOR))
    write_aggregate_csv(cfg.out / "aggregate_nodes.csv", result, scale=1.0)
    write_manifest(cfg.out / "manifest.json", _manifest_payload(cfg, "simulate"))
    print(f"simulated {cfg.n_runs} runs x {result.n_days} days "
          f"({result.n_regions} regions, {result.n_total} nodes) -> {cfg.out}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    cfg.out.mkdir(parents=True, exist_ok=True)
    space = cfg.search_space or default_parameter_space()
    budget = SearchBudget(
        n_random=args.n_random, n_sweeps=args.sweeps,
        grid_points=args.grid, n_runs=cfg.n_runs,
    )
    problem = CalibrationProblem(
        setup=cfg.setup,
        timeline=cfg.timeline,
        gt_nodes=cfg.gt.to_node_units(SCALE_FACTOR),
        base_epi=cfg.epi,
        base_behavior=cfg.behavior,
        thresholds=cfg.fit_thresholds or FitThresholds(),
        seed=cfg.seed,
        threads=cfg.threads,
        options=cfg.options,
    )
    if args.self_test:
        report = self_test(space, budget, problem)
        (cfg.out / "selftest.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        verdict = "passed" if report["passed"] else "FAILED"
        print(f"synthetic-recovery self-test {verdict}: "
              f"recovered combined {report['recovered_score']['combined']:.6f} vs "
              f"midpoint {report['midpoint_score']['combined']:.6f} -> {cfg.out}")
        return 0 if report["passed"] else 2
    leaderboard_path = cfg.out / "leaderboard.csv"
    cache = read_leaderboard_csv(leaderboard_path) if leaderboard_path.exists() else {}
    if cache:
        print(f"resuming: {len(cache)} cached evaluations from {leaderboard_path}")
    outcome = search(space, budget, problem, cache=cache, stage1_only=args.stage1_only)
    write_leaderboard_csv(leaderboard_path, outcome.leaderboard)
    best = {
        "params": outcome.best_params,
        "score": outcome.best_score.as_dict(),
        "shrunk_bounds": {k: list(v) for k, v in outcome.shrunk_bounds.items()},
    }
    (cfg.out / "best_params.json").write_text(json.dumps(best, indent=2, sort_keys=True) + "\n")
    write_manifest(
        cfg.out / "manifest.json",
        _manifest_payload(cfg, "calibrate", {
            "search_space": {k: list(v) for k, v in space.bounds.items()},
            "n_random": budget.n_random,
            "n_sweeps": budget.n_sweeps,
            "grid_points": budget.grid_points,
            "stage1_only": bool(args.stage1_only),
            "n_evaluations": outcome.n_evaluations,
            "n_cache_hits": outcome.n_cache_hits,
        }),
    )
    print(f"best combined score {outcome.best_score.combined:.6f} "
          f"after {outcome.n_evaluations} evaluations ({outcome.n_cache_hits} cached) "
          f"-> {cfg.out}")
    return 0


def _write_scenario_outputs(out: Path, cfg: RunConfig, outcome, spec: ScenarioSpec) -> None:
    out.mkdir(parents=True, exist_ok=True)
    scale = float(SCALE_FACTOR)
    write_aggregate_csv(out / "scenario_aggregate.csv", outcome.scenario, scale=scale)
    write_aggregate_csv(out / "scenario_aggregate_nodes.csv", outcome.scenario, scale=1.0)
    if outcome.baseline is not None:
        write_aggregate_csv(out / "baseline_aggregate.csv", outcome.baseline, scale=scale)
        write_aggregate_csv(out / "baseline_aggregate_nodes.csv", outcome.baseline, scale=1.0)
        write_compare_csv(out / "compare.csv", outcome.baseline, outcome.scenario, scale=scale)
    extra: dict = {"scenario": spec.to_dict(), "scenario_label": spec.label}
    if outcome.scenario.controller_logs:
        write_controller_log_csv(out / "controller_log.csv", outcome.scenario)
        extra["mean_lockdown_days"] = count_lockdown_days(outcome.scenario)
    write_manifest(out / "manifest.json", _manifest_payload(cfg, "scenario", extra))


def _parse_t0_values(tokens: list[str]) -> list[int]:
    """Split a start-day sweep given space or comma separated."""
    values: list[int] = []
    for chunk in tokens:
        for tok in str(chunk).split(","):
            if not tok:
                continue
            try:
                values.append(int(tok))
            except ValueError:
                raise ScenarioError(f"--t0 values must be integers, got {tok!r}") from None
    if not values:
        raise ScenarioError("--t0 needs at least one start day")
    return values


def cmd_scenario(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    spec = ScenarioSpec.from_json(args.scenario)
    if args.t0 is not None and spec.kind != 9:
        raise ScenarioError("--t0 sweeps apply to scenario kind 9 only")

    specs: list[tuple[ScenarioSpec, Path]]
    if args.t0:
        t0_values = _parse_t0_values(args.t0)
        specs = [(replace(spec, start_day=t0), cfg.out / f"t0_{t0}") for t0 in t0_values]
    else:
        specs = [(spec, cfg.out)]

    baseline = None
    for one_spec, out in specs:
        outcome = run_scenario(
            one_spec, cfg.setup, cfg.timeline, cfg.epi, cfg.behavior,
            n_runs=cfg.n_runs, seed=cfg.seed, threads=cfg.threads, options=cfg.options,
            baseline=baseline, include_baseline=args.compare_baseline,
        )
        if outcome.baseline is not None:
            baseline = outcome.baseline  # reuse across a t0 sweep
        _write_scenario_outputs(out, cfg, outcome, one_spec)
        msg = f"scenario {one_spec.kind} ({one_spec.label}) -> {out}"
        if outcome.scenario.controller_logs:
            msg += f" [mean lockdown days: {count_lockdown_days(outcome.scenario):.1f}]"
        print(msg)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    written = render_report(args.results_dir, args.out)
    for p in written:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epinetsim",
        description="stochastic network epidemic simulator with policy timelines",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="country config JSON")
        p.add_argument("--runs", type=int, default=None, help="override run count")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--threads", type=int, default=None, help="worker processes over runs")
        p.add_argument("--out", default=None, help="output directory")

    sim = sub.add_parser("simulate", help="run the historical timeline")
    common(sim)
    sim.set_defaults(func=cmd_simulate)

    cal = sub.add_parser("calibrate", help="search parameters against observed curves")
    common(cal)
    cal.add_argument("--n-random", type=int, default=20, help="stage-1 random candidates")
    cal.add_argument("--sweeps", type=int, default=2, help="stage-2 coordinate sweeps")
    cal.add_argument("--grid", type=int, default=5, help="stage-2 grid points per parameter")
    cal.add_argument("--stage1-only", action="store_true", help="skip coordinate descent")
    cal.add_argument("--self-test", action="store_true",
                     help="run the synthetic-recovery oracle instead of fitting")
    cal.set_defaults(func=cmd_calibrate)

    sce = sub.add_parser("scenario", help="run a counterfactual")
    common(sce)
    sce.add_argument("--scenario", required=True, help="scenario spec JSON")
    sce.add_argument("--compare-baseline", action="store_true",
                     help="also run the baseline and write a comparison CSV")
    sce.add_argument("--t0", type=str, nargs="+", default=None,
                     help="kind-9 start-day sweep, space or comma separated "
                          "(one subdirectory per value)")
    sce.set_defaults(func=cmd_scenario)

    rep = sub.add_parser("report", help="render figures from a results directory")
    rep.add_argument("--in", dest="results_dir", required=True, help="results directory")
    rep.add_argument("--out", default=None, help="figure directory (default: same)")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except _INPUT_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except _INVARIANT_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
