"""Co-optimized sizing, placement and dispatch of mobile emergency resources
for distribution-feeder restoration after a disaster.

Workflow: parse a feeder plus damage scenario (:mod:`~gridrestore.netmodel`),
size the mobile fleet against a shortage forecast
(:mod:`~gridrestore.sizing`), reduce the damaged network to super-nodes
(:mod:`~gridrestore.supernode`), then co-optimize crew schedules, fleet
placement and dispatch (:mod:`~gridrestore.restoration`) with a custom
branch-and-bound over second-order-cone relaxations
(:mod:`~gridrestore.solver`, :mod:`~gridrestore.hull`).  The
:mod:`~gridrestore.oracle` module re-verifies results by brute force on
small instances.
"""

from .errors import (
    GridRestoreError,
    Infeasible,
    InfeasibleBounds,
    ModelError,
    ParseError,
    SolverFailure,
    TooLarge,
    ValidationError,
)
from .netmodel import (
    DamageScenario,
    DerUnit,
    FeederModel,
    MerSpec,
    ShortageForecast,
    StudyHorizon,
    catalog_to_dict,
    dump_json,
    feeder_to_dict,
    fixture_path,
    forecast_to_dict,
    gen_travel_matrix,
    load_catalog,
    load_feeder,
    load_forecast,
    load_scenario,
    parse_catalog,
    parse_feeder,
    parse_forecast,
    parse_scenario,
    scenario_to_dict,
)
from .supernode import (
    SuperEdge,
    SuperNode,
    SuperNodeGraph,
    aggregate,
    detect_islands,
    full_graph,
    graph_to_dict,
    justify_reduction,
    parse_graph,
    scenario_for_graph,
)
from .sizing import (
    MerMixDecision,
    SizingSolution,
    build_sizing_model,
    default_pv_profile,
    mix_to_dict,
    parse_mix,
    solve_sizing,
)
from .hull import (
    line_flow_hull_set,
    soundness_check,
    storage_loss_hull_set,
)
from .restoration import (
    EnergySeries,
    RestorationPlan,
    build_restoration_model,
    check_plan_invariants,
    extract_energy_series,
    parse_plan,
    plan_to_dict,
    solve_restoration,
)
from .oracle import (
    FeasibilityReport,
    check_nonconvex_feasibility,
    enumerate_schedules,
)
from .solver import (
    BnBConfig,
    ClarabelBackend,
    ConicProgram,
    MipSolution,
    solve_michp,
)

__version__ = "0.1.0"

__all__ = [
    "GridRestoreError", "Infeasible", "InfeasibleBounds", "ModelError",
    "ParseError", "SolverFailure", "TooLarge", "ValidationError",
    "DamageScenario", "DerUnit", "FeederModel", "MerSpec", "ShortageForecast",
    "StudyHorizon", "catalog_to_dict", "dump_json", "feeder_to_dict",
    "fixture_path", "forecast_to_dict", "gen_travel_matrix", "load_catalog",
    "load_feeder", "load_forecast", "load_scenario", "parse_catalog",
    "parse_feeder", "parse_forecast", "parse_scenario", "scenario_to_dict",
    "SuperEdge", "SuperNode", "SuperNodeGraph", "aggregate", "detect_islands",
    "full_graph", "graph_to_dict", "justify_reduction", "parse_graph",
    "scenario_for_graph",
    "MerMixDecision", "SizingSolution", "build_sizing_model",
    "default_pv_profile", "mix_to_dict", "parse_mix", "solve_sizing",
    "line_flow_hull_set", "soundness_check", "storage_loss_hull_set",
    "EnergySeries", "RestorationPlan", "build_restoration_model",
    "check_plan_invariants", "extract_energy_series", "parse_plan",
    "plan_to_dict", "solve_restoration",
    "FeasibilityReport", "check_nonconvex_feasibility", "enumerate_schedules",
    "BnBConfig", "ClarabelBackend", "ConicProgram", "MipSolution",
    "solve_michp",
    "__version__",
]
