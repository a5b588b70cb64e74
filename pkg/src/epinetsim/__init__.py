"""Stochastic network epidemic simulator with policy-driven contact topologies."""

__version__ = "0.1.0"

from .calibration import (
    CalibrationProblem,
    FitScore,
    FitThresholds,
    MetricError,
    ParameterSpace,
    SearchBudget,
    SearchFailure,
    default_parameter_space,
    evaluate_candidate,
    pearson,
    score_run,
    search,
    smape,
)
from .core import CoreError, DayContext, NodeFlags, State, StepTally, step_region
from .dataio import (
    DataError,
    GroundTruth,
    PolicyTimeline,
    SchemaError,
    load_country,
    smooth,
)
from .interventions import (
    ExposureTracker,
    InterventionError,
    compute_pe_schedule,
    run_testing,
    trace_contacts,
    vaccinate,
)
from .metapop import (
    CompartmentSnapshot,
    CountrySetup,
    RegionGraph,
    SimOptions,
    SimulationResult,
    World,
    WorldError,
    build_world,
    run_simulation,
)
from .networks import (
    Network,
    NetworkError,
    NetworkSuite,
    build_er_overlay,
    build_ring_lattice,
    build_suite,
    rewire,
    select_network,
)
from .params import (
    BehaviorParams,
    EpiParams,
    GBR_BEHAVIOR,
    ISR_BEHAVIOR,
    ParamError,
)
from .scenarios import (
    LockdownController,
    ScenarioError,
    ScenarioSpec,
    apply_scenario,
    count_lockdown_days,
    run_scenario,
)

__all__ = [
    "__version__",
    "BehaviorParams",
    "CalibrationProblem",
    "CompartmentSnapshot",
    "CoreError",
    "CountrySetup",
    "DataError",
    "DayContext",
    "EpiParams",
    "ExposureTracker",
    "FitScore",
    "FitThresholds",
    "GBR_BEHAVIOR",
    "GroundTruth",
    "ISR_BEHAVIOR",
    "InterventionError",
    "LockdownController",
    "MetricError",
    "Network",
    "NetworkError",
    "NetworkSuite",
    "NodeFlags",
    "ParamError",
    "ParameterSpace",
    "PolicyTimeline",
    "RegionGraph",
    "ScenarioError",
    "ScenarioSpec",
    "SchemaError",
    "SearchBudget",
    "SearchFailure",
    "SimOptions",
    "SimulationResult",
    "State",
    "StepTally",
    "World",
    "WorldError",
    "apply_scenario",
    "build_er_overlay",
    "build_ring_lattice",
    "build_suite",
    "build_world",
    "compute_pe_schedule",
    "count_lockdown_days",
    "default_parameter_space",
    "evaluate_candidate",
    "load_country",
    "pearson",
    "rewire",
    "run_scenario",
    "run_simulation",
    "run_testing",
    "score_run",
    "search",
    "select_network",
    "smape",
    "smooth",
    "step_region",
    "trace_contacts",
    "vaccinate",
]
