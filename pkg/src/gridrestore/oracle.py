"""Independent brute-force verification for restoration results.

Two tools live here:

* :func:`enumerate_schedules` exhaustively enumerates crew-to-line repair
  sequences (and mobile-unit placements) on tiny instances, evaluates each
  resulting energization profile with a continuous dispatch solve, and
  returns the best.  It shares only the dispatch model with the main solver;
  the search itself is plain enumeration, so it cross-checks the
  branch-and-bound machinery end to end.
* :func:`check_nonconvex_feasibility` evaluates the exact quadratic
  equalities (branch flow ``p² + q² = ℓ·v`` and storage loss
  ``r_e p² + r_ct q² = p_loss·v``) at a relaxed solution and estimates how
  much objective would be lost by repairing the residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product

from .errors import TooLarge
from .netmodel import DamageScenario, StudyHorizon
from .restoration import RestorationPlan, build_restoration_model
from .sizing import MerMixDecision
from .solver import ClarabelBackend
from .supernode import SuperNodeGraph

MAX_LINES = 4
MAX_CREWS = 2
MAX_PERIODS = 12
MAX_PLACEMENTS = 5000


@dataclass(frozen=True)
class FeasibilityReport:
    """Exact-equation residuals at a relaxed solution, all non-negative."""

    eq_flow_residuals: dict = field(default_factory=dict)     # (line, t) -> |p²+q²−ℓv|
    eq_storage_residuals: dict = field(default_factory=dict)  # (label, node, t)
    max_residual: float = 0.0
    relaxation_gap_estimate: float = 0.0   # MWh lost repairing the residuals
    repaired_feasible: bool = True
    repaired_violations: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# exhaustive schedule + placement enumeration


def _placements(mix: MerMixDecision, node_ids: tuple[str, ...]):
    """All distributions of each fleet entry over the nodes (units may be
    withheld).  Yields dicts (fleet_index, node) -> count."""

    def spread(count: int, nodes: tuple[str, ...]):
        if not nodes:
            yield {}
            return
        head, rest = nodes[0], nodes[1:]
        for n in range(count + 1):
            for tail in spread(count - n, rest):
                out = dict(tail)
                if n:
                    out[head] = n
                yield out

    per_entry = []
    total = 1
    for f, (_, count) in enumerate(mix.units):
        opts = [{(f, nid): n for nid, n in d.items()}
                for d in spread(count, node_ids)]
        per_entry.append(opts)
        total *= len(opts)
        if total > MAX_PLACEMENTS:
            raise TooLarge(
                f"placement enumeration exceeds {MAX_PLACEMENTS} combinations")
    for combo in product(*per_entry):
        merged: dict = {}
        for d in combo:
            merged.update(d)
        yield merged


def _timed(order: tuple[str, ...], scenario: DamageScenario,
           repair: dict[str, int], init: dict[str, int],
           horizon_periods: int) -> dict | None:
    """Earliest-start timing of one crew's job order; None if any job cannot
    finish early enough to change a line status within the horizon."""
    pos = {l: k for k, l in enumerate(scenario.damaged_lines)}
    free, loc = 0, None
    out: dict[str, tuple[int, int]] = {}
    for line in order:
        start = free if loc is None else \
            free + scenario.travel_periods[pos[line]][pos[loc]]
        start = max(start, init[line])
        end = start + repair[line] - 1
        if end > horizon_periods - 2:
            return None
        out[line] = (start, end)
        free, loc = end + 1, line
    return out


def enumerate_schedules(graph: SuperNodeGraph, mix: MerMixDecision,
                        scenario: DamageScenario, horizon: StudyHorizon,
                        backend: ClarabelBackend | None = None) -> dict:
    """Global optimum of the restoration problem by exhaustive enumeration.

    Every assignment of damaged lines to crews (lines may be left
    unrepaired), every per-crew repair order with earliest-start timing, and
    every placement of the mobile fleet is tried; each distinct energization
    profile is evaluated with a continuous dispatch solve.

    Returns ``{"best_objective": MWh, "best_schedule": {...}}``.

    Raises:
        TooLarge: above 4 damaged lines, 2 crews or 12 periods.
    """
    lines = scenario.damaged_lines
    if len(lines) > MAX_LINES:
        raise TooLarge(f"{len(lines)} damaged lines exceeds {MAX_LINES}")
    if scenario.n_crews > MAX_CREWS:
        raise TooLarge(f"{scenario.n_crews} crews exceeds {MAX_CREWS}")
    if horizon.n_periods > MAX_PERIODS:
        raise TooLarge(f"{horizon.n_periods} periods exceeds {MAX_PERIODS}")

    model = build_restoration_model(graph, mix, scenario, horizon,
                                    relax="hull", strengthen=False)
    be = backend or ClarabelBackend()
    T = horizon.n_periods
    M = scenario.n_crews
    repair = model.repair_periods
    init = model.initial_travel

    # all per-crew ordered job lists (deduplicated by energization profile)
    profiles: dict[tuple, dict] = {}
    for assign in product(range(M + 1), repeat=len(lines)):
        per_crew = [tuple(l for l, c in zip(lines, assign) if c == m)
                    for m in range(M)]
        for orders in product(*(permutations(s) for s in per_crew)):
            timings = []
            ok = True
            for order in orders:
                timed = _timed(order, scenario, repair, init, T)
                if timed is None:
                    ok = False
                    break
                timings.append(timed)
            if not ok:
                continue
            key = tuple(sorted(
                (line, span[1] + 1)
                for timed in timings for line, span in timed.items()))
            if key not in profiles:
                profiles[key] = {"orders": orders, "timings": timings}

    zero_fix = {idx: 0.0 for idx in model.branch_priority}
    best = {"objective": float("inf"), "schedule": None}
    for key in sorted(profiles):
        sched = profiles[key]
        fixed = dict(zero_fix)
        for m, timed in enumerate(sched["timings"]):
            for line, (start, end) in timed.items():
                for t in range(start, end + 1):
                    fixed[model.a_idx[(m, line, t)]] = 1.0
                    fixed[model.b_idx[(m, line, t)]] = 1.0
                for t in range(end + 1, T):
                    fixed[model.u_idx[(line, t)]] = 1.0
        for placement in _placements(mix, graph.node_ids()):
            for (f, nid), n in placement.items():
                fixed[model.n_idx[(f, nid)]] = float(n)
            sol = be.solve(model.program, lb_override=fixed, ub_override=fixed)
            for (f, nid) in placement:
                fixed[model.n_idx[(f, nid)]] = 0.0
            if sol.status != "optimal" or sol.objective is None:
                continue
            if sol.objective < best["objective"] - 1e-12:
                best["objective"] = sol.objective
                best["schedule"] = {
                    "crew_orders": [list(o) for o in sched["orders"]],
                    "work": {line: [m, span[0], span[1]]
                             for m, timed in enumerate(sched["timings"])
                             for line, span in timed.items()},
                    "line_first_on": {line: first for line, first in key},
                    "placement": {f"{f}@{nid}": n
                                  for (f, nid), n in sorted(placement.items())},
                }
    if best["schedule"] is None:
        raise TooLarge("no evaluable schedule found (all dispatch solves failed)")
    return {"best_objective": best["objective"],
            "best_schedule": best["schedule"]}


# ---------------------------------------------------------------------------
# exact-equation residuals at a relaxed solution


def check_nonconvex_feasibility(plan: RestorationPlan,
                                graph: SuperNodeGraph) -> FeasibilityReport:
    """Residuals of the exact quadratic equalities at a solved plan.

    The gap estimate lifts each squared current to ``(p²+q²)/v`` and each
    storage loss to ``(r_e p² + r_ct q²)/v`` (the physical direction), prices
    the extra losses at the period length, and reports the repaired point
    infeasible if a current or loss limit breaks instead of accepting it.
    """
    T = plan.n_periods
    dt = plan.dt_hours
    s_base = graph.s_base_mva
    nodes = plan.dispatch["nodes"]
    flows = plan.dispatch["flows"]

    flow_res: dict = {}
    storage_res: dict = {}
    gap_mwh = 0.0
    violations: list[str] = []

    for e in graph.edges:
        rec = flows[e.line_id]
        w_lo = graph.node(e.from_node).vmin_pu ** 2
        s_cap = e.smax_mva / s_base
        l_cap = min(e.i2max_pu,
                    s_cap * s_cap / w_lo if w_lo > 0 else float("inf"))
        for t in range(T):
            p = rec["p_mw"][t] / s_base
            q = rec["q_mvar"][t] / s_base
            l = rec["l_pu"][t]
            v = nodes[e.from_node]["v_pu"][t] ** 2
            flow_res[(e.line_id, t)] = abs(p * p + q * q - l * v)
            if v > 1e-12:
                lifted = (p * p + q * q) / v
                if lifted > l + 1e-12:
                    gap_mwh += e.r_pu * (lifted - l) * dt * s_base
                    if lifted > l_cap + 1e-9:
                        violations.append(
                            f"line {e.line_id} t={t}: repaired squared "
                            f"current {lifted:.6g} exceeds limit {l_cap:.6g}")

    for nid, rec in nodes.items():
        for label, src in rec["sources"].items():
            if "p_loss_mw" not in src:
                continue
            r_e = src["r_e"]
            r_ct = src["r_ct"]
            s_cap = src["s_mva"] / s_base
            loss_cap = (r_e * s_cap * s_cap /
                        (graph.node(nid).vmin_pu ** 2))
            for t in range(T):
                p = src["p_mw"][t] / s_base
                q = src["q_mvar"][t] / s_base
                pl = src["p_loss_mw"][t] / s_base
                v = rec["v_pu"][t] ** 2
                storage_res[(label, nid, t)] = abs(
                    r_e * p * p + r_ct * q * q - pl * v)
                if v > 1e-12:
                    lifted = (r_e * p * p + r_ct * q * q) / v
                    if lifted > pl + 1e-12:
                        gap_mwh += (lifted - pl) * dt * s_base
                        if lifted > loss_cap + 1e-9:
                            violations.append(
                                f"storage {label}@{nid} t={t}: repaired loss "
                                f"{lifted:.6g} exceeds limit {loss_cap:.6g}")

    residuals = list(flow_res.values()) + list(storage_res.values())
    return FeasibilityReport(
        eq_flow_residuals=flow_res,
        eq_storage_residuals=storage_res,
        max_residual=max(residuals, default=0.0),
        relaxation_gap_estimate=gap_mwh,
        repaired_feasible=not violations,
        repaired_violations=tuple(violations))


def report_to_dict(report: FeasibilityReport) -> dict:
    return {
        "eq_flow_residuals": {f"{l}:{t}": r
                              for (l, t), r in report.eq_flow_residuals.items()},
        "eq_storage_residuals": {
            f"{label}@{nid}:{t}": r
            for (label, nid, t), r in report.eq_storage_residuals.items()},
        "max_residual": report.max_residual,
        "relaxation_gap_estimate": report.relaxation_gap_estimate,
        "repaired_feasible": report.repaired_feasible,
        "repaired_violations": list(report.repaired_violations),
    }
