"""Command-line surface tying the pipeline together.

Subcommands follow the workflow: ``plan`` sizes the mobile fleet against a
shortage forecast, ``reduce`` contracts a damaged feeder into a super-node
graph, ``restore`` co-optimizes crew schedules, fleet placement and dispatch
on that graph, ``validate`` re-checks results (relaxation soundness or a
solved plan's invariants), ``report`` renders the per-period energy CSV and
``gen-travel`` produces seeded crew travel-time matrices.

Every subcommand writes its primary output plus a run manifest named
``<out stem>.manifest.json`` recording the command line, a SHA-256 digest of
every input and output file, every effective parameter (defaults included),
the tool version, the seed and the wall time.  Primary outputs are
byte-identical across re-runs on the same inputs; wall-clock values appear
only in the manifest.

Exit codes: 0 success; 1 invalid input or usage; 2 problem proven
infeasible; 3 search limit reached (the incumbent result is still written);
4 internal failure.  Failures also emit a single JSON diagnostic line on
stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import (
    Infeasible,
    InfeasibleBounds,
    ModelError,
    ParseError,
    TooLarge,
    ValidationError,
)
from .hull import (
    EQ_LINE_FLOW,
    EQ_STORAGE_LOSS,
    hull_line_flow,
    hull_storage_loss,
    soundness_check,
    storage_loss_hull_set,
)
from .netmodel import (
    _read_json,
    catalog_to_dict,
    dump_json,
    fixture_path,
    gen_travel_matrix,
    load_catalog,
    load_feeder,
    load_forecast,
    load_scenario,
)
from .oracle import check_nonconvex_feasibility, report_to_dict
from .restoration import (
    build_restoration_model,
    check_plan_invariants,
    parse_plan,
    plan_to_dict,
    solve_restoration,
)
from .sizing import (
    build_sizing_model,
    default_pv_profile,
    mix_to_dict,
    parse_mix,
    solve_sizing,
)
from .solver import BnBConfig
from .supernode import (
    aggregate,
    full_graph,
    graph_to_dict,
    justify_reduction,
    parse_graph,
    scenario_for_graph,
)

_HULL_TOL = 1e-9          # max manifold violation accepted as "sound"
_FIXTURE_FEEDERS = ("feeder13.json", "feeder37.json", "feeder123.json")
_DEFAULT_BAND = (0.95, 1.05)  # reference voltage band for catalog storage


class _UsageError(Exception):
    """Bad command line; argparse already printed usage to stderr."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _seconds(text: str) -> float:
    """Parse a duration like ``300`` or ``300s`` into seconds."""
    cleaned = text.strip()
    if cleaned.endswith("s"):
        cleaned = cleaned[:-1]
    try:
        value = float(cleaned)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid duration '{text}' (expected seconds, e.g. 300 or 300s)")
    if value <= 0:
        raise argparse.ArgumentTypeError("duration must be positive")
    return value


def _diag(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _sha256(path: str | Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".manifest.json")


def _write_manifest(args: argparse.Namespace, inputs: list, outputs: list,
                    parameters: dict, t0: float, started: str) -> None:
    manifest = {
        "tool": {"name": "gridrestore", "version": __version__},
        "command": args.command,
        "argv": list(args._argv),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "parameters": parameters,
        "seed": args.seed,
        "started_utc": started,
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    dump_json(manifest, _manifest_path(args.out))


def _start() -> tuple[float, str]:
    return (time.monotonic(),
            datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))


def _limit_exit(status: str, **extra) -> int:
    """0 for a finished search, 3 (with a stderr warning) for a truncated one."""
    if status in ("node_limit", "time_limit"):
        clean = {k: (v if not isinstance(v, float) or math.isfinite(v) else None)
                 for k, v in extra.items()}
        _diag({"warning": "limit_reached", "status": status, "exit_code": 3,
               **clean})
        return 3
    return 0


# ---------------------------------------------------------------------------
# subcommands


def _cmd_plan(args: argparse.Namespace) -> int:
    t0, started = _start()
    forecast = load_forecast(args.forecast)
    catalog = load_catalog(args.catalog)
    profile = default_pv_profile(forecast.horizon, start_hour=args.pv_start_hour,
                                 sunrise=args.pv_sunrise, sunset=args.pv_sunset,
                                 peak=args.pv_peak)
    model = build_sizing_model(forecast, catalog, mpv_profile=profile)
    gap = args.gap if args.gap is not None else 1e-4
    cfg = BnBConfig(gap=gap, node_limit=args.node_limit,
                    time_limit=args.time_limit, threads=args.threads)
    solution = solve_sizing(model, cfg)

    parameters = {
        "gap": gap,
        "node_limit": args.node_limit,
        "time_limit": args.time_limit,
        "threads": args.threads,
        "pv_start_hour": args.pv_start_hour,
        "pv_sunrise": args.pv_sunrise,
        "pv_sunset": args.pv_sunset,
        "pv_peak": args.pv_peak,
        "mpv_profile": list(profile),
        "n_periods": forecast.horizon.n_periods,
        "dt_hours": forecast.horizon.dt_hours,
        "catalog": catalog_to_dict(catalog),
    }
    payload = mix_to_dict(solution.mix)
    payload["dispatch"] = {k: list(v) for k, v in solution.dispatch.items()}
    payload["served_p_mw"] = list(solution.served_p_mw)
    payload["served_q_mvar"] = list(solution.served_q_mvar)
    payload["status"] = solution.status
    payload["gap"] = solution.gap
    payload["params"] = parameters
    dump_json(payload, args.out)
    _write_manifest(args, [args.forecast, args.catalog], [args.out],
                    parameters, t0, started)
    return _limit_exit(solution.status, gap=solution.gap)


def _cmd_reduce(args: argparse.Namespace) -> int:
    t0, started = _start()
    feeder = load_feeder(args.feeder)
    scenario = load_scenario(args.scenario, feeder)
    graph = full_graph(feeder, scenario) if args.full \
        else aggregate(feeder, scenario)
    dump_json(graph_to_dict(graph), args.out)
    outputs = [args.out]
    parameters = {"full": bool(args.full),
                  "justify_threshold_pu": args.threshold}
    if args.justify:
        dump_json(justify_reduction(feeder, scenario,
                                    threshold_pu=args.threshold), args.justify)
        outputs.append(args.justify)
    _write_manifest(args, [args.feeder, args.scenario], outputs,
                    parameters, t0, started)
    return 0


def _cmd_restore(args: argparse.Namespace) -> int:
    t0, started = _start()
    graph = parse_graph(_read_json(args.graph))
    mix = parse_mix(_read_json(args.mix))
    scenario = scenario_for_graph(_read_json(args.scenario), graph)
    model = build_restoration_model(graph, mix, scenario, graph.horizon)
    gap = args.gap if args.gap is not None else 1e-3
    cfg = BnBConfig(gap=gap, node_limit=args.node_limit,
                    time_limit=args.time_limit, threads=args.threads,
                    log_interval=args.log_interval)
    plan = solve_restoration(model, cfg)

    payload = plan_to_dict(plan)
    del payload["wall_time"]  # wall clock lives in the manifest only
    dump_json(payload, args.out)
    parameters = {
        "gap": gap,
        "node_limit": args.node_limit,
        "time_limit": args.time_limit,
        "threads": args.threads,
        "log_interval": args.log_interval,
        "int_tol": cfg.int_tol,
        "relax": "hull",
        "hull_variant": "scaled",
        "strengthen": True,
    }
    _write_manifest(args, [args.graph, args.mix, args.scenario], [args.out],
                    parameters, t0, started)
    return _limit_exit(plan.status, gap=plan.gap, objective=plan.objective_mwh)


def _hull_soundness_report(seed: int, n_samples: int) -> dict:
    """Soundness of every hull the fixtures give rise to, both storage forms."""
    line_rows: list[dict] = []
    storage_rows: list[dict] = []
    for name in _FIXTURE_FEEDERS:
        feeder = load_feeder(fixture_path(name))
        buses = {b.id: b for b in feeder.buses}
        for ln in feeder.lines:
            rep = soundness_check(hull_line_flow(ln, buses[ln.from_bus],
                                                 feeder.s_base_mva),
                                  EQ_LINE_FLOW, n_samples=n_samples, seed=seed)
            rep["fixture"] = name
            rep["line"] = ln.id
            line_rows.append(rep)
        for der in feeder.ders:
            if der.kind != "ESS":
                continue
            for variant in ("scaled", "appendix"):
                rep = soundness_check(
                    hull_storage_loss(der, buses[der.bus], feeder.s_base_mva,
                                      variant=variant),
                    EQ_STORAGE_LOSS, n_samples=n_samples, seed=seed)
                rep["fixture"] = name
                rep["unit"] = f"ESS:{der.bus}"
                rep["variant"] = variant
                storage_rows.append(rep)
    catalog = load_catalog(fixture_path("catalog.json"))
    vmin, vmax = _DEFAULT_BAND
    for sp in catalog:
        if sp.kind != "MESS":
            continue
        for variant in ("scaled", "appendix"):
            rep = soundness_check(
                storage_loss_hull_set(sp.s_mva, vmin ** 2, vmax ** 2,
                                      sp.r_e, sp.r_ct, variant=variant),
                EQ_STORAGE_LOSS, n_samples=n_samples, seed=seed)
            rep["fixture"] = "catalog.json"
            rep["unit"] = f"MESS[{sp.size_index}]"
            rep["variant"] = variant
            storage_rows.append(rep)

    lines_ok = all(r["max_violation"] <= _HULL_TOL for r in line_rows)
    # the default ("scaled") storage hull must be sound on its own; the
    # "appendix" rows are retained as the recorded comparison
    scaled_ok = all(r["max_violation"] <= _HULL_TOL
                    for r in storage_rows if r["variant"] == "scaled")
    return {
        "ok": lines_ok and scaled_ok,
        "violation_tolerance": _HULL_TOL,
        "n_samples": n_samples,
        "seed": seed,
        "line_flow": {"ok": lines_ok, "checks": line_rows},
        "storage_loss": {"ok": scaled_ok, "checks": storage_rows},
    }


def _cmd_validate(args: argparse.Namespace) -> int:
    t0, started = _start()
    if args.check == "hull":
        report = _hull_soundness_report(args.seed, args.samples)
        dump_json(report, args.out)
        parameters = {"check": "hull", "n_samples": args.samples,
                      "violation_tolerance": _HULL_TOL,
                      "fixtures": list(_FIXTURE_FEEDERS) + ["catalog.json"]}
        _write_manifest(args, [], [args.out], parameters, t0, started)
        if not report["ok"]:
            _diag({"error": "HullUnsound", "exit_code": 1,
                   "message": "a hull constraint cuts off sampled manifold "
                              "points; see the report"})
            return 1
        return 0

    if not args.plan or not args.graph:
        raise _UsageError("validate needs --check hull, or --plan with --graph")
    plan = parse_plan(_read_json(args.plan))
    graph = parse_graph(_read_json(args.graph))
    scenario = (scenario_for_graph(_read_json(args.scenario), graph)
                if args.scenario else None)
    mix = parse_mix(_read_json(args.mix)) if args.mix else None
    violations = check_plan_invariants(plan, graph, scenario=scenario,
                                       mix=mix, tol=args.tol)
    residuals = check_nonconvex_feasibility(plan, graph)
    ok = not violations and residuals.repaired_feasible
    report = {
        "ok": ok,
        "objective_mwh": plan.objective_mwh,
        "invariants": {"ok": not violations, "violations": list(violations)},
        "residuals": report_to_dict(residuals),
    }
    dump_json(report, args.out)
    inputs = [p for p in (args.plan, args.graph, args.scenario, args.mix) if p]
    parameters = {"check": "plan", "tol": args.tol,
                  "with_scenario": args.scenario is not None,
                  "with_mix": args.mix is not None}
    _write_manifest(args, inputs, [args.out], parameters, t0, started)
    if not ok:
        _diag({"error": "PlanInvalid", "exit_code": 1,
               "message": "; ".join(violations[:3]) or
                          "repaired point violates a hard limit"})
        return 1
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    t0, started = _start()
    plan = parse_plan(_read_json(args.plan))
    rows = ["period,ter_mwh,tes_mwh,unserved_mwh"]
    for t in range(plan.n_periods):
        ter = plan.ter_mwh[t]
        uns = plan.unserved_mwh[t]
        rows.append(f"{t},{ter:.10g},{ter - uns:.10g},{uns:.10g}")
    Path(args.out).write_text("\n".join(rows) + "\n")
    parameters = {"n_periods": plan.n_periods, "dt_hours": plan.dt_hours}
    _write_manifest(args, [args.plan], [args.out], parameters, t0, started)
    return 0


def _cmd_gen_travel(args: argparse.Namespace) -> int:
    t0, started = _start()
    inputs: list = []
    if args.scenario:
        data = _read_json(args.scenario)
        n = len(data.get("damaged_lines", []))
        matrix = gen_travel_matrix(n, args.seed, args.max_periods)
        data["travel_time_periods"] = [[int(v) for v in row] for row in matrix]
        dump_json(data, args.out)
        inputs = [args.scenario]
    else:
        n = args.n
        matrix = gen_travel_matrix(n, args.seed, args.max_periods)
        dump_json({"n": n, "seed": args.seed, "max_periods": args.max_periods,
                   "travel_time_periods": [[int(v) for v in row]
                                           for row in matrix]}, args.out)
    parameters = {"n": n, "max_periods": args.max_periods}
    _write_manifest(args, inputs, [args.out], parameters, t0, started)
    return 0


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> _Parser:
    parser = _Parser(
        prog="gridrestore",
        description="Size, place and dispatch mobile emergency resources to "
                    "restore a damaged distribution feeder.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="seed for any randomized step (recorded in the "
                             "manifest; default 0)")
    common.add_argument("--threads", type=int, default=1,
                        help="parallel node evaluations in the search "
                             "(default 1)")
    common.add_argument("--gap", type=float, default=None,
                        help="relative optimality gap (default: 1e-4 for "
                             "plan, 1e-3 for restore)")
    common.add_argument("--time-limit", type=_seconds, default=None,
                        metavar="SECONDS",
                        help="wall-time budget for the search, e.g. 300 or "
                             "300s (default: none)")

    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                                required=True)

    p = sub.add_parser("plan", parents=[common],
                       help="size the cheapest mobile fleet covering a "
                            "shortage forecast")
    p.add_argument("--forecast", required=True, help="shortage forecast JSON")
    p.add_argument("--catalog", required=True, help="unit catalog JSON")
    p.add_argument("--out", required=True, help="output mix JSON")
    p.add_argument("--node-limit", type=int, default=500_000,
                   help="search node budget (default 500000)")
    p.add_argument("--pv-start-hour", type=float, default=8.0,
                   help="clock hour at which the horizon starts (default 8)")
    p.add_argument("--pv-sunrise", type=float, default=6.0,
                   help="sunrise hour of the mobile-PV profile (default 6)")
    p.add_argument("--pv-sunset", type=float, default=18.0,
                   help="sunset hour of the mobile-PV profile (default 18)")
    p.add_argument("--pv-peak", type=float, default=1.0,
                   help="peak availability of the mobile-PV profile "
                        "(default 1.0)")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("reduce", parents=[common],
                       help="contract a damaged feeder into a super-node "
                            "graph")
    p.add_argument("--feeder", required=True, help="feeder JSON")
    p.add_argument("--scenario", required=True, help="damage scenario JSON")
    p.add_argument("--out", required=True, help="output graph JSON")
    p.add_argument("--full", action="store_true",
                   help="emit the unreduced graph (one node per bus)")
    p.add_argument("--justify", metavar="PATH",
                   help="also write the aggregation-error report here")
    p.add_argument("--threshold", type=float, default=0.05,
                   help="acceptable worst-case intra-island voltage drop in "
                        "pu for --justify (default 0.05)")
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("restore", parents=[common],
                       help="co-optimize crew schedules, fleet placement and "
                            "dispatch")
    p.add_argument("--graph", required=True, help="super-node graph JSON")
    p.add_argument("--mix", required=True, help="mobile fleet mix JSON")
    p.add_argument("--scenario", required=True, help="damage scenario JSON")
    p.add_argument("--out", required=True, help="output plan JSON")
    p.add_argument("--node-limit", type=int, default=500_000,
                   help="search node budget (default 500000)")
    p.add_argument("--log-interval", type=int, default=0,
                   help="print search progress every N nodes (default: off)")
    p.set_defaults(func=_cmd_restore)

    p = sub.add_parser("validate", parents=[common],
                       help="check relaxation soundness or a solved plan")
    p.add_argument("--check", choices=("hull",),
                   help="'hull': sample the exact nonconvex equations on "
                        "every fixture line and storage unit")
    p.add_argument("--samples", type=int, default=10_000,
                   help="manifold samples per hull for --check hull "
                        "(default 10000)")
    p.add_argument("--plan", help="solved plan JSON to validate")
    p.add_argument("--graph", help="graph the plan was solved on")
    p.add_argument("--scenario", help="damage scenario JSON (enables crew "
                                      "checks)")
    p.add_argument("--mix", help="fleet mix JSON (enables placement checks)")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="balance/box tolerance for plan checks (default 1e-6)")
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("report", parents=[common],
                       help="write the per-period required/supplied energy "
                            "CSV for a plan")
    p.add_argument("--plan", required=True, help="solved plan JSON")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("gen-travel", parents=[common],
                       help="generate a seeded symmetric travel-time matrix")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=int, help="matrix dimension")
    group.add_argument("--scenario", help="write the matrix into a copy of "
                                          "this scenario (sized to its "
                                          "damaged lines)")
    p.add_argument("--max-periods", type=int, default=3,
                   help="largest travel time in periods (default 3)")
    p.add_argument("--out", required=True, help="output JSON")
    p.set_defaults(func=_cmd_gen_travel)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv)
    return args.func(args)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except _UsageError as exc:
        _diag({"error": "UsageError", "message": str(exc), "exit_code": 1})
        return 1
    except (ParseError, ValidationError, ModelError, TooLarge) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc),
                   "exit_code": 1}
        if getattr(exc, "record", None):
            payload["record"] = exc.record
        if getattr(exc, "field", None):
            payload["field"] = exc.field
        _diag(payload)
        return 1
    except (Infeasible, InfeasibleBounds) as exc:
        _diag({"error": type(exc).__name__, "message": str(exc),
               "exit_code": 2})
        return 2
    except SystemExit as exc:  # argparse --help/--version
        return 0 if exc.code in (0, None) else 1
    except Exception as exc:  # noqa: BLE001 - anything else is an internal failure
        _diag({"error": type(exc).__name__, "message": str(exc),
               "exit_code": 4})
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
