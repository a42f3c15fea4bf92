"""Restoration planning on the damaged feeder: place mobile resources,
schedule repair crews, switch lines back in, and dispatch all sources so the
energy not served over the study window is minimal.

The model is a mixed-integer conic program over a (possibly reduced)
:class:`~gridrestore.supernode.SuperNodeGraph`:

* binaries ``u`` (line energized), ``alpha`` (crew at line), ``beta`` (crew
  working on line), integers ``N`` (mobile units per node);
* continuous squared voltages, served load, source dispatch, branch flows
  and squared currents in per-unit;
* big-M switched voltage-drop rows, crew routing/occupancy rows with
  travel-time exclusion windows, storage state-of-charge prefix rows;
* the nonconvex branch-flow and storage-loss equalities replaced by their
  convex-hull sets (``relax="hull"``) or recorded as exact-equation
  descriptors for external validation (``relax="exact"``, never solved).

The objective is total unserved energy in MWh; the program carries the total
energy requirement as an objective constant so solver objectives, bounds and
gaps are all in MWh of unserved energy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import Infeasible, ModelError, SolverFailure
from .hull import EQ_LINE_FLOW, EQ_STORAGE_LOSS, line_flow_hull_set, storage_loss_hull_set
from .netmodel import DamageScenario, StudyHorizon
from .sizing import MerMixDecision
from .solver import BnBConfig, ClarabelBackend, ConicProgram, solve_michp
from .supernode import SuperNodeGraph

RELAX_MODES = ("hull", "exact")

# branching rank by variable class: unit placement first (an integral
# placement is what makes the island-supply rows bite, so the relaxation
# bound is weakest while any N is fractional), then line status, which
# fixes the restoration sequence, then the crew variables that realize it
_RANK_N, _RANK_U, _RANK_ALPHA, _RANK_BETA = 0, 1, 2, 3


@dataclass
class RestorationModel:
    """Built restoration program plus the index maps needed to read it back."""

    program: ConicProgram
    graph: SuperNodeGraph
    mix: MerMixDecision
    scenario: DamageScenario
    horizon: StudyHorizon
    relax: str
    hull_variant: str
    strengthen: bool
    damaged_order: tuple[str, ...]          # travel-matrix row order
    repair_periods: dict[str, int]
    initial_travel: dict[str, int]
    n_crews: int
    ter_mwh: tuple[float, ...]
    # variable index maps
    v_idx: dict = field(default_factory=dict)        # (node, t)
    pl_idx: dict = field(default_factory=dict)       # (node, t)
    ql_idx: dict = field(default_factory=dict)       # (node, t)
    grid_p_idx: dict = field(default_factory=dict)   # (node, t)
    grid_q_idx: dict = field(default_factory=dict)   # (node, t)
    der_p: dict = field(default_factory=dict)        # (node, seq, t)
    der_q: dict = field(default_factory=dict)
    der_loss: dict = field(default_factory=dict)     # ESS only
    der_label: dict = field(default_factory=dict)    # (node, seq) -> str
    n_idx: dict = field(default_factory=dict)        # (fleet, node)
    mer_p: dict = field(default_factory=dict)        # (fleet, node, t)
    mer_q: dict = field(default_factory=dict)
    mer_loss: dict = field(default_factory=dict)     # MESS entries only
    pf_idx: dict = field(default_factory=dict)       # (line, t)
    qf_idx: dict = field(default_factory=dict)
    lf_idx: dict = field(default_factory=dict)
    u_idx: dict = field(default_factory=dict)        # (line, t)
    a_idx: dict = field(default_factory=dict)        # (crew, line, t)
    b_idx: dict = field(default_factory=dict)
    nonconvex: list = field(default_factory=list)
    branch_priority: dict = field(default_factory=dict)


@dataclass
class RestorationPlan:
    """Solved restoration decisions in engineering units."""

    mer_placement: dict          # (kind, size_index, node) -> count
    line_status: dict            # line -> tuple of 0/1 per period
    crew_visit: dict             # (crew, line) -> tuple of 0/1
    crew_work: dict              # (crew, line) -> tuple of 0/1
    dispatch: dict               # {"nodes": {...}, "flows": {...}}
    unserved_mwh: tuple          # per-period series
    objective_mwh: float
    ter_mwh: tuple
    status: str
    gap: float
    bound_mwh: float
    node_count: int
    wall_time: float
    n_periods: int
    dt_hours: float


@dataclass(frozen=True)
class EnergySeries:
    """Per-period total energy required vs supplied, in MWh."""

    ter_mwh: tuple[float, ...]
    tes_mwh: tuple[float, ...]

    @property
    def unserved_mwh(self) -> tuple[float, ...]:
        return tuple(r - s for r, s in zip(self.ter_mwh, self.tes_mwh))


def _finite_min(*vals: float) -> float:
    out = math.inf
    for v in vals:
        if v < out:
            out = v
    return out


def build_restoration_model(graph: SuperNodeGraph, mix: MerMixDecision,
                            scenario: DamageScenario, horizon: StudyHorizon,
                            relax: str = "hull", *,
                            hull_variant: str = "scaled",
                            strengthen: bool = True) -> RestorationModel:
    """Assemble the restoration program over a super-node graph.

    Args:
        graph: reduced (or unreduced) network with damaged edges marked.
        mix: mobile fleet to place (typically the sizing stage's answer).
        scenario: crew count, repair durations and travel times; its damaged
            line set must match the graph's.
        horizon: study periods; must equal the graph's horizon.
        relax: "hull" builds the solvable conic relaxation; "exact" records
            the nonconvex equalities for validation instead (not solvable).
        hull_variant: first-cone variant for the storage-loss hull.
        strengthen: add valid reductions (travel clique rows, work-budget
            caps, final-period trimming, crew symmetry ordering).  The
            optimal objective is unchanged either way.

    Raises:
        ModelError: on mismatched horizons, damaged-line sets, or a missing
            mobile-PV availability profile.
    """
    if relax not in RELAX_MODES:
        raise ModelError(f"relax must be one of {RELAX_MODES}, got {relax!r}")
    if horizon != graph.horizon:
        raise ModelError("horizon does not match the graph's study horizon")
    T = horizon.n_periods
    dt = horizon.dt_hours
    s_base = graph.s_base_mva

    graph_damaged = {e.line_id for e in graph.damaged_edges()} | set(graph.repair_only)
    if graph_damaged != set(scenario.damaged_lines):
        raise ModelError(
            "scenario damaged lines do not match the graph: "
            f"graph has {sorted(graph_damaged)}, "
            f"scenario has {sorted(scenario.damaged_lines)}")

    mpv_profile = mix.mpv_profile
    if any(sp.kind == "MPV" for sp, _ in mix.units):
        if mpv_profile is None:
            raise ModelError("mix contains mobile PV but no availability profile")
        if len(mpv_profile) != T:
            raise ModelError(
                f"mobile-PV profile has length {len(mpv_profile)}, expected {T}")

    prog = ConicProgram()
    damage_pos = {l: k for k, l in enumerate(scenario.damaged_lines)}
    repair_periods = dict(scenario.repair_periods)
    depot = scenario.initial_travel or (0,) * len(scenario.damaged_lines)
    initial_travel = {l: depot[damage_pos[l]] for l in scenario.damaged_lines}

    ter = tuple(sum(nd.p_mw[t] for nd in graph.nodes) * dt for t in range(T))
    model = RestorationModel(
        program=prog, graph=graph, mix=mix, scenario=scenario, horizon=horizon,
        relax=relax, hull_variant=hull_variant, strengthen=strengthen,
        damaged_order=tuple(scenario.damaged_lines),
        repair_periods=repair_periods, initial_travel=initial_travel,
        n_crews=scenario.n_crews, ter_mwh=ter)

    bands = {nd.id: (nd.vmin_pu ** 2, nd.vmax_pu ** 2) for nd in graph.nodes}

    # -- node state: squared voltage, served load, grid import ---------------
    p_bal: dict[tuple[str, int], dict[int, float]] = {}
    q_bal: dict[tuple[str, int], dict[int, float]] = {}
    for nd in graph.nodes:
        w_lo, w_hi = bands[nd.id]
        for t in range(T):
            iv = prog.add_var(f"v[{nd.id},{t}]", w_lo, w_hi)
            ip = prog.add_var(f"pL[{nd.id},{t}]", nd.p_crit_mw[t] / s_base,
                              nd.p_mw[t] / s_base)
            iq = prog.add_var(f"qL[{nd.id},{t}]", nd.q_crit_mvar[t] / s_base,
                              nd.q_mvar[t] / s_base)
            model.v_idx[(nd.id, t)] = iv
            model.pl_idx[(nd.id, t)] = ip
            model.ql_idx[(nd.id, t)] = iq
            p_bal[(nd.id, t)] = {ip: -1.0}
            q_bal[(nd.id, t)] = {iq: -1.0}
            prog.add_objective_coeff(ip, -dt * s_base)
            if nd.grid_p_mw[t] > 0.0:
                ig = prog.add_var(f"gP[{nd.id},{t}]", 0.0, nd.grid_p_mw[t] / s_base)
                model.grid_p_idx[(nd.id, t)] = ig
                p_bal[(nd.id, t)][ig] = 1.0
            if nd.grid_q_mvar[t] > 0.0:
                ig = prog.add_var(f"gQ[{nd.id},{t}]", 0.0, nd.grid_q_mvar[t] / s_base)
                model.grid_q_idx[(nd.id, t)] = ig
                q_bal[(nd.id, t)][ig] = 1.0
    prog.obj_const = sum(ter)

    # -- surviving resources -------------------------------------------------
    for nd in graph.nodes:
        w_lo, w_hi = bands[nd.id]
        for seq, der in enumerate(nd.ders):
            label = f"{der.kind}:{der.bus}"
            model.der_label[(nd.id, seq)] = label
            if der.kind == "DG":
                cap = der.p_mw / s_base
                for t in range(T):
                    ip = prog.add_var(f"pDG[{nd.id},{seq},{t}]", 0.0, cap)
                    iq = prog.add_var(f"qDG[{nd.id},{seq},{t}]", 0.0, der.k2 * cap)
                    model.der_p[(nd.id, seq, t)] = ip
                    model.der_q[(nd.id, seq, t)] = iq
                    p_bal[(nd.id, t)][ip] = 1.0
                    q_bal[(nd.id, t)][iq] = 1.0
                    prog.add_linear({iq: 1.0, ip: -der.k2}, "<=", 0.0,
                                    name=f"dg_qmax[{nd.id},{seq},{t}]")
                    prog.add_linear({iq: -1.0, ip: der.k1}, "<=", 0.0,
                                    name=f"dg_qmin[{nd.id},{seq},{t}]")
            elif der.kind == "PV":
                for t in range(T):
                    out = der.p_series_mw[t] / s_base
                    ip = prog.add_var(f"pPV[{nd.id},{seq},{t}]", 0.0, out)
                    iq = prog.add_var(f"qPV[{nd.id},{seq},{t}]", 0.0, der.k2 * out)
                    model.der_p[(nd.id, seq, t)] = ip
                    model.der_q[(nd.id, seq, t)] = iq
                    p_bal[(nd.id, t)][ip] = 1.0
                    q_bal[(nd.id, t)][iq] = 1.0
                    prog.add_linear({iq: 1.0, ip: -der.k2}, "<=", 0.0,
                                    name=f"pv_qmax[{nd.id},{seq},{t}]")
                    prog.add_linear({iq: -1.0, ip: der.k1}, "<=", 0.0,
                                    name=f"pv_qmin[{nd.id},{seq},{t}]")
            elif der.kind == "ESS":
                s_cap = der.s_mva / s_base
                loss_ub = der.r_e * s_cap * s_cap / w_lo if w_lo > 0 else math.inf
                hull = storage_loss_hull_set(s_cap, w_lo, w_hi, der.r_e,
                                             der.r_ct, variant=hull_variant)
                for t in range(T):
                    ip = prog.add_var(f"pES[{nd.id},{seq},{t}]", 0.0, s_cap)
                    iq = prog.add_var(f"qES[{nd.id},{seq},{t}]", 0.0, s_cap)
                    il = prog.add_var(f"plES[{nd.id},{seq},{t}]", 0.0, loss_ub)
                    model.der_p[(nd.id, seq, t)] = ip
                    model.der_q[(nd.id, seq, t)] = iq
                    model.der_loss[(nd.id, seq, t)] = il
                    p_bal[(nd.id, t)][ip] = 1.0
                    q_bal[(nd.id, t)][iq] = 1.0
                    prog.add_soc([({ip: 1.0}, 0.0), ({iq: 1.0}, 0.0)], {}, s_cap,
                                 name=f"ess_mva[{nd.id},{seq},{t}]")
                    quad = (ip, iq, il, model.v_idx[(nd.id, t)])
                    if relax == "hull":
                        hull.add_to_program(prog, quad,
                                            f"ess_hull[{nd.id},{seq},{t}]:")
                    model.nonconvex.append({
                        "manifold": EQ_STORAGE_LOSS,
                        "label": f"ess[{nd.id},{seq},{t}]",
                        "vars": quad,
                        "r_e": der.r_e, "r_ct": der.r_ct})
                for t in range(T):
                    row = {}
                    for tau in range(t + 1):
                        row[model.der_p[(nd.id, seq, tau)]] = dt
                        row[model.der_loss[(nd.id, seq, tau)]] = dt
                    prog.add_linear(row, "<=", der.e_surplus_mwh / s_base,
                                    name=f"ess_soc[{nd.id},{seq},{t}]")

    # -- mobile fleet placement and dispatch ---------------------------------
    node_ids = graph.node_ids()
    for f, (sp, count) in enumerate(mix.units):
        for nid in node_ids:
            idx = prog.add_var(f"N[{f},{nid}]", 0, count, "integer")
            model.n_idx[(f, nid)] = idx
            model.branch_priority[idx] = _RANK_N
        prog.add_linear({model.n_idx[(f, nid)]: 1.0 for nid in node_ids}, "<=",
                        float(count), name=f"fleet_cap[{f}]")
        if sp.kind == "MESS":
            s_one = sp.s_mva / s_base
            e_one = sp.e_mwh / s_base
            for nid in node_ids:
                w_lo, w_hi = bands[nid]
                s_fleet = s_one * count
                loss_ub = (sp.r_e * s_fleet * s_fleet / w_lo
                           if w_lo > 0 else math.inf)
                hull = storage_loss_hull_set(s_fleet, w_lo, w_hi, sp.r_e,
                                             sp.r_ct, variant=hull_variant)
                for t in range(T):
                    ip = prog.add_var(f"pM[{f},{nid},{t}]", 0.0, s_fleet)
                    iq = prog.add_var(f"qM[{f},{nid},{t}]", 0.0, s_fleet)
                    il = prog.add_var(f"plM[{f},{nid},{t}]", 0.0, loss_ub)
                    model.mer_p[(f, nid, t)] = ip
                    model.mer_q[(f, nid, t)] = iq
                    model.mer_loss[(f, nid, t)] = il
                    p_bal[(nid, t)][ip] = 1.0
                    q_bal[(nid, t)][iq] = 1.0
                    # MVA cone whose radius scales with the units placed
                    prog.add_soc([({ip: 1.0}, 0.0), ({iq: 1.0}, 0.0)],
                                 {model.n_idx[(f, nid)]: s_one}, 0.0,
                                 name=f"mes_mva[{f},{nid},{t}]")
                    quad = (ip, iq, il, model.v_idx[(nid, t)])
                    if relax == "hull":
                        hull.add_to_program(prog, quad,
                                            f"mes_hull[{f},{nid},{t}]:")
                    model.nonconvex.append({
                        "manifold": EQ_STORAGE_LOSS,
                        "label": f"mes[{f},{nid},{t}]",
                        "vars": quad,
                        "r_e": sp.r_e, "r_ct": sp.r_ct})
                for t in range(T):
                    row = {}
                    for tau in range(t + 1):
                        row[model.mer_p[(f, nid, tau)]] = dt
                        row[model.mer_loss[(f, nid, tau)]] = dt
                    row[model.n_idx[(f, nid)]] = -e_one
                    prog.add_linear(row, "<=", 0.0,
                                    name=f"mes_soc[{f},{nid},{t}]")
        else:  # MDG or MPV
            p_one = sp.p_mw / s_base
            for nid in node_ids:
                for t in range(T):
                    avail = p_one if sp.kind == "MDG" else p_one * mpv_profile[t]
                    ip = prog.add_var(f"pM[{f},{nid},{t}]", 0.0, avail * count)
                    iq = prog.add_var(f"qM[{f},{nid},{t}]", 0.0,
                                      sp.k2 * avail * count)
                    model.mer_p[(f, nid, t)] = ip
                    model.mer_q[(f, nid, t)] = iq
                    p_bal[(nid, t)][ip] = 1.0
                    q_bal[(nid, t)][iq] = 1.0
                    prog.add_linear({ip: 1.0, model.n_idx[(f, nid)]: -avail},
                                    "<=", 0.0, name=f"mer_cap[{f},{nid},{t}]")
                    prog.add_linear({iq: 1.0, ip: -sp.k2}, "<=", 0.0,
                                    name=f"mer_qmax[{f},{nid},{t}]")
                    prog.add_linear({iq: -1.0, ip: sp.k1}, "<=", 0.0,
                                    name=f"mer_qmin[{f},{nid},{t}]")

    # -- branch flows, switching, voltage coupling ---------------------------
    for e in graph.edges:
        w_lo_f, w_hi_f = bands[e.from_node]
        w_lo_t, w_hi_t = bands[e.to_node]
        s_cap = e.smax_mva / s_base
        l_cap = _finite_min(e.i2max_pu,
                            s_cap * s_cap / w_lo_f if w_lo_f > 0 else math.inf)
        big_m = ((max(w_hi_f, w_hi_t) - min(w_lo_f, w_lo_t))
                 + 2.0 * (e.r_pu + e.x_pu) * s_cap
                 + (e.r_pu ** 2 + e.x_pu ** 2) * l_cap)
        hull = line_flow_hull_set(s_cap, w_lo_f, w_hi_f)
        for t in range(T):
            ip = prog.add_var(f"pF[{e.line_id},{t}]", -s_cap, s_cap)
            iq = prog.add_var(f"qF[{e.line_id},{t}]", -s_cap, s_cap)
            il = prog.add_var(f"lF[{e.line_id},{t}]", 0.0, l_cap)
            model.pf_idx[(e.line_id, t)] = ip
            model.qf_idx[(e.line_id, t)] = iq
            model.lf_idx[(e.line_id, t)] = il
            p_bal[(e.to_node, t)][ip] = 1.0
            p_bal[(e.to_node, t)][il] = -e.r_pu
            p_bal[(e.from_node, t)][ip] = -1.0
            q_bal[(e.to_node, t)][iq] = 1.0
            q_bal[(e.to_node, t)][il] = -e.x_pu
            q_bal[(e.from_node, t)][iq] = -1.0

            drop = {model.v_idx[(e.from_node, t)]: 1.0,
                    model.v_idx[(e.to_node, t)]: -1.0,
                    ip: -2.0 * e.r_pu, iq: -2.0 * e.x_pu,
                    il: e.r_pu ** 2 + e.x_pu ** 2}
            if e.damaged:
                iu = prog.add_var(f"u[{e.line_id},{t}]", 0, 1, "binary")
                model.u_idx[(e.line_id, t)] = iu
                model.branch_priority[iu] = _RANK_U
                pos = dict(drop)
                pos[iu] = big_m
                prog.add_linear(pos, "<=", big_m,
                                name=f"vdrop_hi[{e.line_id},{t}]")
                neg = {k: -v for k, v in drop.items()}
                neg[iu] = big_m
                prog.add_linear(neg, "<=", big_m,
                                name=f"vdrop_lo[{e.line_id},{t}]")
                prog.add_linear({ip: 1.0, iu: -s_cap}, "<=", 0.0,
                                name=f"gate_p_hi[{e.line_id},{t}]")
                prog.add_linear({ip: -1.0, iu: -s_cap}, "<=", 0.0,
                                name=f"gate_p_lo[{e.line_id},{t}]")
                prog.add_linear({iq: 1.0, iu: -s_cap}, "<=", 0.0,
                                name=f"gate_q_hi[{e.line_id},{t}]")
                prog.add_linear({iq: -1.0, iu: -s_cap}, "<=", 0.0,
                                name=f"gate_q_lo[{e.line_id},{t}]")
                prog.add_linear({il: 1.0, iu: -l_cap}, "<=", 0.0,
                                name=f"gate_l[{e.line_id},{t}]")
            else:
                prog.add_linear(drop, "==", 0.0,
                                name=f"vdrop[{e.line_id},{t}]")
            prog.add_soc([({ip: 1.0}, 0.0), ({iq: 1.0}, 0.0)], {}, s_cap,
                         name=f"line_mva[{e.line_id},{t}]")
            quad = (ip, iq, il, model.v_idx[(e.from_node, t)])
            if relax == "hull":
                hull.add_to_program(prog, quad, f"flow_hull[{e.line_id},{t}]:")
            model.nonconvex.append({
                "manifold": EQ_LINE_FLOW,
                "label": f"flow[{e.line_id},{t}]",
                "vars": quad})

    # repair-only lines: no flow, but their status still occupies crews
    for line in graph.repair_only:
        for t in range(T):
            iu = prog.add_var(f"u[{line},{t}]", 0, 1, "binary")
            model.u_idx[(line, t)] = iu
            model.branch_priority[iu] = _RANK_U

    # -- crew routing and repair progress ------------------------------------
    lines = model.damaged_order
    M = scenario.n_crews
    tt = scenario.travel_periods
    for m in range(M):
        for line in lines:
            for t in range(T):
                ia = prog.add_var(f"alpha[{m},{line},{t}]", 0, 1, "binary")
                ib = prog.add_var(f"beta[{m},{line},{t}]", 0, 1, "binary")
                model.a_idx[(m, line, t)] = ia
                model.b_idx[(m, line, t)] = ib
                model.branch_priority[ia] = _RANK_ALPHA
                model.branch_priority[ib] = _RANK_BETA
                prog.add_linear({ib: 1.0, ia: -1.0}, "<=", 0.0,
                                name=f"work_at_site[{m},{line},{t}]")

    for line in lines:
        rt = repair_periods[line]
        first_on = initial_travel[line] + rt
        for t in range(T):
            # no presence before the depot travel completes
            if t < initial_travel[line]:
                for m in range(M):
                    prog.fix_var(model.a_idx[(m, line, t)], 0.0)
                    prog.fix_var(model.b_idx[(m, line, t)], 0.0)
            # cannot be energized before the work can have finished
            if t < first_on:
                prog.fix_var(model.u_idx[(line, t)], 0.0)
        for t in range(1, T):
            prog.add_linear({model.u_idx[(line, t - 1)]: 1.0,
                             model.u_idx[(line, t)]: -1.0}, "<=", 0.0,
                            name=f"stay_on[{line},{t}]")
            row = {model.u_idx[(line, t)]: float(rt)}
            for m in range(M):
                for tau in range(t):
                    row[model.b_idx[(m, line, tau)]] = -1.0
            prog.add_linear(row, "<=", 0.0, name=f"repair_done[{line},{t}]")
        for t in range(T):
            prog.add_linear({model.b_idx[(m, line, t)]: 1.0 for m in range(M)},
                            "<=", 1.0, name=f"one_crew[{line},{t}]")

    for m in range(M):
        for t in range(T):
            prog.add_linear({model.a_idx[(m, line, t)]: 1.0 for line in lines},
                            "<=", 1.0, name=f"one_site[{m},{t}]")

    # travel-time exclusion between successive visits
    if lines and M:
        if strengthen:
            # aggregated form: while heading to `dest`, the crew cannot have
            # been at any line whose travel time to `dest` exceeds the gap
            for m in range(M):
                for bpos, dest in enumerate(lines):
                    max_tt = max((tt[bpos][a] for a in range(len(lines))
                                  if a != bpos), default=0)
                    for tau in range(1, max_tt + 1):
                        sources = [a for a in range(len(lines))
                                   if a != bpos and tt[bpos][a] >= tau]
                        if not sources:
                            continue
                        for s in range(tau, T):
                            row = {model.a_idx[(m, dest, s)]: 1.0}
                            for a in sources:
                                row[model.a_idx[(m, lines[a], s - tau)]] = 1.0
                            prog.add_linear(row, "<=", 1.0,
                                            name=f"travel[{m},{dest},{s},{tau}]")
        else:
            for m in range(M):
                for bpos, dest in enumerate(lines):
                    for apos, src in enumerate(lines):
                        if apos == bpos:
                            continue
                        for tau in range(1, tt[bpos][apos] + 1):
                            for t in range(T - tau):
                                prog.add_linear(
                                    {model.a_idx[(m, dest, t + tau)]: 1.0,
                                     model.a_idx[(m, src, t)]: 1.0}, "<=", 1.0,
                                    name=f"travel[{m},{dest},{src},{t},{tau}]")

    if strengthen:
        _island_supply_cuts(model)
        for line in lines:
            # work beyond the repair requirement cannot change any status
            row = {model.b_idx[(m, line, t)]: 1.0
                   for m in range(M) for t in range(T)}
            prog.add_linear(row, "<=", float(repair_periods[line]),
                            name=f"work_budget[{line}]")
        for m in range(M):
            for line in lines:
                # final-period visits/work can never energize anything
                prog.fix_var(model.a_idx[(m, line, T - 1)], 0.0)
                prog.fix_var(model.b_idx[(m, line, T - 1)], 0.0)
        for m in range(M - 1):
            # interchangeable crews: order them by total work
            row = {}
            for line in lines:
                for t in range(T):
                    row[model.b_idx[(m, line, t)]] = -1.0
                    row[model.b_idx[(m + 1, line, t)]] = 1.0
            prog.add_linear(row, "<=", 0.0, name=f"crew_order[{m}]")
        # schedule-capacity cuts: a crew that has finished k sites by t-1
        # spent the repair periods of each plus at least (k-1) shortest
        # travels, so sum_l (RT_l + tmin) u[l,t] <= M (t + tmin); these keep
        # the continuous relaxation from letting split crews skip travel
        tmin = 0
        if len(lines) > 1:
            tmin = min(tt[i][j] for i in range(len(lines))
                       for j in range(len(lines)) if i != j)
        init_min = min(initial_travel.values()) if initial_travel else 0
        profile = _max_complete_profile(
            sorted(repair_periods[l] for l in lines), M, tmin, init_min, T)
        for t in range(1, T):
            row = {model.u_idx[(line, t)]: float(repair_periods[line] + tmin)
                   for line in lines}
            prog.add_linear(row, "<=", float(M * (t + tmin)),
                            name=f"fleet_capacity[{t}]")
            if profile[t] < len(lines):
                cnt = {model.u_idx[(line, t)]: 1.0 for line in lines}
                prog.add_linear(cnt, "<=", float(profile[t]),
                                name=f"count_capacity[{t}]")

    # -- nodal balance -------------------------------------------------------
    for nd in graph.nodes:
        for t in range(T):
            prog.add_linear(p_bal[(nd.id, t)], "==", 0.0,
                            name=f"balance_p[{nd.id},{t}]")
            prog.add_linear(q_bal[(nd.id, t)], "==", 0.0,
                            name=f"balance_q[{nd.id},{t}]")

    return model


def _island_supply_cuts(model: RestorationModel) -> None:
    """Couple served load and branch flow to line status across each cut.

    Every damaged edge of the reduced network is a cut edge (islands are
    maximal surviving components, so only damaged lines run between them).
    Two valid row families are added per cut edge, side and period:

    * supply rows — while the line is open, a side can serve at most what
      its own surviving sources, mobile units and grid connections produce;
      once it closes the row is dominated by the load bounds;
    * export rows — power leaving a side over the edge is limited to the
      side's surviving-source capacity scaled by the line status plus the
      mobile capacity actually placed there, linearized with one helper
      variable per fleet entry (``y <= count * u``, ``y <= placed-on-side``).

    Without these rows the thermal limit is the only status/flow coupling,
    and it is loose enough that a tiny fractional status value can carry a
    whole island's demand or leak a stranded unit's surplus out of a dark
    island, which wrecks the relaxation bound.
    """
    graph = model.graph
    prog = model.program
    T = model.horizon.n_periods
    s_base = graph.s_base_mva

    adj: dict[str, list[tuple[str, int]]] = {nd.id: [] for nd in graph.nodes}
    for k, e in enumerate(graph.edges):
        adj[e.from_node].append((e.to_node, k))
        adj[e.to_node].append((e.from_node, k))

    def component(start: str, banned: int) -> set[str]:
        seen = {start}
        stack = [start]
        while stack:
            for nxt, k in adj[stack.pop()]:
                if k == banned or nxt in seen:
                    continue
                seen.add(nxt)
                stack.append(nxt)
        return seen

    nodes_by_id = {nd.id: nd for nd in graph.nodes}

    def supply_cap_pu(nid: str, t: int) -> float:
        cap = 0.0
        for der in nodes_by_id[nid].ders:
            if der.kind == "DG":
                cap += der.p_mw
            elif der.kind == "PV":
                cap += der.p_series_mw[t]
            elif der.kind == "ESS":
                cap += der.s_mva
        return cap / s_base

    def fleet_avail_pu(f: int, t: int) -> float:
        sp, _ = model.mix.units[f]
        if sp.kind == "MESS":
            return sp.s_mva / s_base
        if sp.kind == "MPV":
            return sp.p_mw * model.mix.mpv_profile[t] / s_base
        return sp.p_mw / s_base

    node_order = {nd.id: k for k, nd in enumerate(graph.nodes)}
    for k, e in enumerate(graph.edges):
        if not e.damaged:
            continue
        reach = component(e.to_node, banned=k)
        if e.from_node in reach:
            continue  # not a cut edge: other paths exist while this is open
        # iterate sides in the graph's node order so row assembly (and with
        # it every float summation downstream) is reproducible run to run
        side_to = sorted(reach, key=node_order.get)
        side_from = sorted(set(nodes_by_id) - reach, key=node_order.get)
        iu_all = [model.u_idx[(e.line_id, t)] for t in range(T)]
        for tag, side, out_sign in (("to", side_to, -1.0),
                                    ("from", side_from, 1.0)):
            side_n = {f: [model.n_idx[(f, nid)] for nid in side]
                      for f in range(len(model.mix.units))}
            for t in range(T):
                iu = iu_all[t]
                dem = sum(nodes_by_id[nid].p_mw[t] for nid in side) / s_base
                row = {model.pl_idx[(nid, t)]: 1.0 for nid in side}
                row[iu] = -dem
                for f in range(len(model.mix.units)):
                    for nid in side:
                        row[model.mer_p[(f, nid, t)]] = -1.0
                grid_cap = 0.0
                for nid in side:
                    g = model.grid_p_idx.get((nid, t))
                    if g is not None:
                        row[g] = -1.0
                        grid_cap += nodes_by_id[nid].grid_p_mw[t] / s_base
                der_cap = sum(supply_cap_pu(nid, t) for nid in side)
                prog.add_linear(row, "<=", der_cap,
                                name=f"island_supply[{e.line_id},{tag},{t}]")

                # export row: out-flow <= (sources + grid on this side) * u
                #             + placed mobile capacity coupled to u
                out = {model.pf_idx[(e.line_id, t)]: out_sign,
                       iu: -(der_cap + grid_cap)}
                for f, (sp, count) in enumerate(model.mix.units):
                    avail = fleet_avail_pu(f, t)
                    if avail <= 0.0 or count == 0:
                        continue
                    y = prog.add_var(f"yX[{f},{e.line_id},{tag},{t}]",
                                     0.0, float(count))
                    prog.add_linear({y: 1.0, iu: -float(count)}, "<=", 0.0,
                                    name=f"export_gate[{f},{e.line_id},{tag},{t}]")
                    n_row = {y: 1.0}
                    for idx in side_n[f]:
                        n_row[idx] = -1.0
                    prog.add_linear(n_row, "<=", 0.0,
                                    name=f"export_here[{f},{e.line_id},{tag},{t}]")
                    out[y] = -avail
                prog.add_linear(out, "<=", 0.0,
                                name=f"export_cap[{e.line_id},{tag},{t}]")


def _max_complete_profile(rts: list[float], n_crews: int, tmin: int,
                          init_min: int, T: int) -> list[int]:
    """Upper bound on how many lines can be finished before each period.

    ``profile[t]`` bounds the number of repairs whose work fits entirely in
    periods 0..t-1 when every crew needs at least ``init_min`` periods to
    reach its first site and ``tmin`` between consecutive sites.  Exact for
    small instances via min-makespan packing; otherwise falls back to an
    aggregate crew-time argument that can only over-estimate.
    """
    rts = sorted(int(r) for r in rts)
    L = len(rts)

    def fits(k: int, deadline: int) -> bool:
        if k == 0:
            return True
        items = rts[:k]
        if k <= 9 and n_crews <= 3:
            spans = [0] * n_crews
            counts = [0] * n_crews

            def rec(i: int) -> bool:
                if i < 0:
                    return True
                seen = set()
                for m in range(n_crews):
                    key = (spans[m], counts[m])
                    if key in seen:
                        continue
                    seen.add(key)
                    extra = items[i] + (tmin if counts[m] else init_min)
                    if spans[m] + extra <= deadline:
                        spans[m] += extra
                        counts[m] += 1
                        if rec(i - 1):
                            spans[m] -= extra
                            counts[m] -= 1
                            return True
                        spans[m] -= extra
                        counts[m] -= 1
                return False

            return rec(k - 1)  # place the longest repairs first
        total = sum(items) + max(0, k - n_crews) * tmin + min(k, n_crews) * init_min
        return total <= n_crews * deadline

    profile = []
    for t in range(T):
        k = 0
        while k < L and fits(k + 1, t):
            k += 1
        profile.append(k)
    return profile


# ---------------------------------------------------------------------------
# greedy schedules: initial incumbents and the in-search rounding heuristic


def _schedule_greedy(model: RestorationModel, order: list[str]) -> dict:
    """Earliest-completion greedy schedule; returns line -> (crew, start, end).

    Keeps one crew per line without preemption and accounts for depot and
    line-to-line travel times.  Lines that cannot finish early enough to
    matter are left unscheduled.
    """
    T = model.horizon.n_periods
    pos = {l: k for k, l in enumerate(model.damaged_order)}
    free = [0] * model.n_crews
    loc: list[str | None] = [None] * model.n_crews
    sched: dict[str, tuple[int, int, int]] = {}
    last_useful = T - 2  # work in the final period cannot flip any status
    for line in order:
        need = model.repair_periods[line]
        best = None
        for m in range(model.n_crews):
            if loc[m] is None:
                start = free[m]
            else:
                start = free[m] + model.scenario.travel_periods[pos[line]][pos[loc[m]]]
            start = max(start, model.initial_travel[line])
            end = start + need - 1
            if best is None or (end, m) < (best[2], best[0]):
                best = (m, start, end)
        if best is None or best[2] > last_useful:
            continue
        m, start, end = best
        free[m] = end + 1
        loc[m] = line
        sched[line] = (m, start, end)
    return sched


def _assignment_from_schedule(model: RestorationModel, sched: dict,
                              placement: dict) -> dict[int, int]:
    """Turn a schedule + placement into a full integer assignment."""
    T = model.horizon.n_periods
    # order crews by workload so the symmetry rows accept the point
    work = [0] * model.n_crews
    for line, (m, start, end) in sched.items():
        work[m] += end - start + 1
    by_load = sorted(range(model.n_crews), key=lambda m: (-work[m], m))
    remap = {old: new for new, old in enumerate(by_load)}

    assign = {idx: 0 for idx in model.u_idx.values()}
    for idx in model.a_idx.values():
        assign[idx] = 0
    for idx in model.b_idx.values():
        assign[idx] = 0
    for (f, nid), idx in model.n_idx.items():
        assign[idx] = placement.get((f, nid), 0)
    for line, (m, start, end) in sched.items():
        mm = remap[m]
        for t in range(start, end + 1):
            assign[model.a_idx[(mm, line, t)]] = 1
            assign[model.b_idx[(mm, line, t)]] = 1
        for t in range(end + 1, T):
            assign[model.u_idx[(line, t)]] = 1
    return assign


def _default_placement(model: RestorationModel) -> dict:
    """All units of every fleet entry at the highest-demand node."""
    totals = {nd.id: sum(nd.p_mw) for nd in model.graph.nodes}
    target = max(model.graph.node_ids(), key=lambda n: (totals[n], n))
    placement = {}
    for f, (_, count) in enumerate(model.mix.units):
        placement[(f, target)] = count
    return placement


def _initial_points(model: RestorationModel) -> list[dict[int, int]]:
    placement = _default_placement(model)
    orders = [list(model.damaged_order)]
    by_rt = sorted(model.damaged_order, key=lambda l: (model.repair_periods[l], l))
    orders.append(by_rt)
    orders.append(list(reversed(by_rt)))
    points = []
    for order in orders:
        sched = _schedule_greedy(model, order)
        points.append(_assignment_from_schedule(model, sched, placement))
    # sweep whole-fleet placements under the first greedy schedule; the best
    # host split is rarely the all-at-one-node default and a good starting
    # incumbent keeps the search from wandering
    node_list = model.graph.node_ids()
    n_fleets = len(model.mix.units)
    if n_fleets and len(node_list) ** n_fleets <= 100:
        sched = _schedule_greedy(model, orders[0])
        for combo in itertools.product(node_list, repeat=n_fleets):
            swept = {(f, nid): model.mix.units[f][1]
                     for f, nid in enumerate(combo)}
            points.append(_assignment_from_schedule(model, sched, swept))
    return points


def _make_repair_hook(model: RestorationModel):
    T = model.horizon.n_periods

    def hook(x) -> dict[int, int] | None:
        # order lines by their fractional completion time
        keys = []
        for k, line in enumerate(model.damaged_order):
            rt = model.repair_periods[line]
            cum = 0.0
            done_at = T + k
            for t in range(T):
                for m in range(model.n_crews):
                    cum += x[model.b_idx[(m, line, t)]]
                if cum >= rt - 0.5:
                    done_at = t
                    break
            keys.append((done_at, k, line))
        order = [line for _, _, line in sorted(keys)]
        sched = _schedule_greedy(model, order)

        placement: dict = {}
        for f, (_, count) in enumerate(model.mix.units):
            fracs = {nid: x[model.n_idx[(f, nid)]]
                     for nid in model.graph.node_ids()}
            target = min(count, int(round(sum(fracs.values()))))
            base = {nid: int(math.floor(fracs[nid] + 1e-9)) for nid in fracs}
            used = sum(base.values())
            if used > target:
                base = {nid: 0 for nid in fracs}
                used = 0
            rema = sorted(fracs,
                          key=lambda n: (base[n] - fracs[n], n))
            k = 0
            while used < target and k < len(rema):
                base[rema[k]] += 1
                used += 1
                k += 1
            for nid, val in base.items():
                if val:
                    placement[(f, nid)] = val
        return _assignment_from_schedule(model, sched, placement)

    return hook


# ---------------------------------------------------------------------------
# solving and extraction


def solve_restoration(model: RestorationModel, config: BnBConfig | None = None,
                      backend: ClarabelBackend | None = None) -> RestorationPlan:
    """Solve a hull-relaxed restoration model and extract the plan.

    Raises:
        ModelError: for a model built with ``relax="exact"``.
        Infeasible: no plan can satisfy the critical-load floors.
        SolverFailure: search hit a limit before finding any feasible plan.
    """
    if model.relax != "hull":
        raise ModelError("only hull-relaxed models are solvable; "
                         "rebuild with relax='hull'")
    cfg = config or BnBConfig(gap=1e-3)
    result = solve_michp(model.program, cfg, backend,
                         branch_priority=model.branch_priority,
                         repair=_make_repair_hook(model),
                         initial_points=_initial_points(model))
    if result.status == "infeasible":
        raise Infeasible(
            "no feasible restoration plan: a critical-load floor cannot be "
            "met in some island with the available resources")
    if result.x is None:
        raise SolverFailure(
            f"search stopped ({result.status}) without a feasible plan")
    return _extract_plan(model, result)


def _rounded(x, idx: int) -> int:
    val = x[idx]
    r = int(math.floor(val + 0.5))
    if abs(val - r) > 1e-6:
        raise SolverFailure(f"integer variable came back fractional ({val})")
    return r


def _extract_plan(model: RestorationModel, result) -> RestorationPlan:
    x = result.x
    violations = model.program.check_point(x, tol=1e-6)
    if violations:
        raise SolverFailure("solution fails verification: "
                            + "; ".join(violations[:5]))
    T = model.horizon.n_periods
    dt = model.horizon.dt_hours
    s_base = model.graph.s_base_mva

    placement = {}
    for f, (sp, _) in enumerate(model.mix.units):
        for nid in model.graph.node_ids():
            n = _rounded(x, model.n_idx[(f, nid)])
            if n:
                placement[(sp.kind, sp.size_index, nid)] = n

    line_status = {}
    for line in model.damaged_order:
        line_status[line] = tuple(_rounded(x, model.u_idx[(line, t)])
                                  for t in range(T))
    crew_visit = {}
    crew_work = {}
    for m in range(model.n_crews):
        for line in model.damaged_order:
            crew_visit[(m, line)] = tuple(_rounded(x, model.a_idx[(m, line, t)])
                                          for t in range(T))
            crew_work[(m, line)] = tuple(_rounded(x, model.b_idx[(m, line, t)])
                                         for t in range(T))

    nodes = {}
    served_mw = [0.0] * T
    for nd in model.graph.nodes:
        rec = {
            "p_served_mw": [], "q_served_mvar": [], "v_pu": [], "sources": {},
        }
        for t in range(T):
            p = min(max(float(x[model.pl_idx[(nd.id, t)]]),
                        nd.p_crit_mw[t] / s_base), nd.p_mw[t] / s_base)
            q = min(max(float(x[model.ql_idx[(nd.id, t)]]),
                        nd.q_crit_mvar[t] / s_base), nd.q_mvar[t] / s_base)
            rec["p_served_mw"].append(p * s_base)
            rec["q_served_mvar"].append(q * s_base)
            rec["v_pu"].append(
                math.sqrt(max(float(x[model.v_idx[(nd.id, t)]]), 0.0)))
            served_mw[t] += p * s_base
        for seq, der in enumerate(nd.ders):
            label = model.der_label[(nd.id, seq)]
            src = {"p_mw": [float(x[model.der_p[(nd.id, seq, t)]]) * s_base
                            for t in range(T)],
                   "q_mvar": [float(x[model.der_q[(nd.id, seq, t)]]) * s_base
                              for t in range(T)]}
            if (nd.id, seq, 0) in model.der_loss:
                src["p_loss_mw"] = [
                    float(x[model.der_loss[(nd.id, seq, t)]]) * s_base
                    for t in range(T)]
                src["r_e"] = der.r_e
                src["r_ct"] = der.r_ct
                src["s_mva"] = der.s_mva
            rec["sources"][label] = src
        for f, (sp, _) in enumerate(model.mix.units):
            n_here = _rounded(x, model.n_idx[(f, nd.id)])
            if n_here == 0:
                continue
            label = f"{sp.kind}[{sp.size_index}]"
            src = {"p_mw": [float(x[model.mer_p[(f, nd.id, t)]]) * s_base
                            for t in range(T)],
                   "q_mvar": [float(x[model.mer_q[(f, nd.id, t)]]) * s_base
                              for t in range(T)]}
            if (f, nd.id, 0) in model.mer_loss:
                src["p_loss_mw"] = [
                    float(x[model.mer_loss[(f, nd.id, t)]]) * s_base
                    for t in range(T)]
                src["r_e"] = sp.r_e
                src["r_ct"] = sp.r_ct
                src["s_mva"] = sp.s_mva * n_here
            rec["sources"][label] = src
        if (nd.id, 0) in model.grid_p_idx or (nd.id, 0) in model.grid_q_idx:
            src = {"p_mw": [float(x[model.grid_p_idx[(nd.id, t)]]) * s_base
                            if (nd.id, t) in model.grid_p_idx else 0.0
                            for t in range(T)],
                   "q_mvar": [float(x[model.grid_q_idx[(nd.id, t)]]) * s_base
                              if (nd.id, t) in model.grid_q_idx else 0.0
                              for t in range(T)]}
            rec["sources"]["grid"] = src
        nodes[nd.id] = rec

    flows = {}
    for e in model.graph.edges:
        on = (line_status[e.line_id] if e.damaged else (1,) * T)
        flows[e.line_id] = {
            "p_mw": [float(x[model.pf_idx[(e.line_id, t)]]) * s_base * on[t]
                     for t in range(T)],
            "q_mvar": [float(x[model.qf_idx[(e.line_id, t)]]) * s_base * on[t]
                       for t in range(T)],
            "l_pu": [float(x[model.lf_idx[(e.line_id, t)]]) * on[t]
                     for t in range(T)],
        }

    unserved = tuple(model.ter_mwh[t] - served_mw[t] * dt for t in range(T))
    objective = sum(unserved)
    return RestorationPlan(
        mer_placement=placement, line_status=line_status,
        crew_visit=crew_visit, crew_work=crew_work,
        dispatch={"nodes": nodes, "flows": flows},
        unserved_mwh=unserved, objective_mwh=objective,
        ter_mwh=model.ter_mwh, status=result.status, gap=result.gap,
        bound_mwh=result.bound, node_count=result.node_count,
        wall_time=result.wall_time, n_periods=T, dt_hours=dt)


def extract_energy_series(plan: RestorationPlan, graph: SuperNodeGraph,
                          horizon: StudyHorizon) -> EnergySeries:
    """Per-period required vs supplied energy, recomputed from the plan."""
    T = horizon.n_periods
    dt = horizon.dt_hours
    ter = tuple(sum(nd.p_mw[t] for nd in graph.nodes) * dt for t in range(T))
    tes = tuple(sum(plan.dispatch["nodes"][nd.id]["p_served_mw"][t]
                    for nd in graph.nodes) * dt for t in range(T))
    return EnergySeries(ter_mwh=ter, tes_mwh=tes)


# ---------------------------------------------------------------------------
# solver-independent plan verification


def check_plan_invariants(plan: RestorationPlan, graph: SuperNodeGraph,
                          scenario: DamageScenario | None = None,
                          mix: MerMixDecision | None = None,
                          tol: float = 1e-6) -> tuple[str, ...]:
    """Verify a solved plan against the model's invariants, without a solver.

    Always checked:

    * line statuses are 0/1 and non-decreasing (a repaired line stays on);
    * a damaged line carries zero flow and zero squared current while off;
    * each crew sits at no more than one site per period, works only where
      it sits, and no line is worked by two crews at once;
    * nodal active/reactive balance holds to ``tol`` per-unit: sources plus
      arriving flow (net of line losses) cover served load plus leaving flow;
    * served load stays inside the critical-floor/total-demand box and
      voltage magnitudes inside each node's band (within ``tol``);
    * per-period unserved energy equals required minus supplied energy, and
      the reported objective equals the sum of the per-period values.

    With ``scenario``: a line turns on only after enough completed work
    periods, no crew is on site before its initial travel elapses, and
    successive visits to different sites respect the pairwise travel times.
    With ``mix``: per-fleet placements sum to at most the fleet size and
    mobile dispatch appears only at nodes that received units.

    Returns human-readable violation messages; an empty tuple means the plan
    passes.
    """
    bad: list[str] = []
    T = plan.n_periods
    dt = plan.dt_hours
    s_base = graph.s_base_mva
    nodes = plan.dispatch["nodes"]
    flows = plan.dispatch["flows"]

    for line, status in plan.line_status.items():
        if any(v not in (0, 1) for v in status):
            bad.append(f"line {line}: status values must be 0/1, got {status}")
        for t in range(1, T):
            if status[t] < status[t - 1]:
                bad.append(f"line {line}: energized at t={t - 1} but off at "
                           f"t={t} (status must be non-decreasing)")

    for e in graph.edges:
        if not e.damaged:
            continue
        status = plan.line_status.get(e.line_id)
        if status is None:
            bad.append(f"line {e.line_id}: damaged edge missing from line_status")
            continue
        rec = flows[e.line_id]
        for t in range(T):
            if status[t]:
                continue
            if (abs(rec["p_mw"][t]) > tol * s_base
                    or abs(rec["q_mvar"][t]) > tol * s_base
                    or abs(rec["l_pu"][t]) > tol):
                bad.append(f"line {e.line_id}: nonzero flow at t={t} while "
                           "de-energized")

    crews = sorted({m for m, _ in plan.crew_visit})
    lines = sorted({l for _, l in plan.crew_visit})
    for m in crews:
        for t in range(T):
            here = sum(plan.crew_visit[(m, l)][t] for l in lines
                       if (m, l) in plan.crew_visit)
            if here > 1:
                bad.append(f"crew {m}: at {here} sites in period t={t}")
    for (m, l), work in plan.crew_work.items():
        visit = plan.crew_visit[(m, l)]
        for t in range(T):
            if work[t] > visit[t]:
                bad.append(f"crew {m}: works line {l} at t={t} without being "
                           "on site")
    for l in lines:
        for t in range(T):
            working = sum(plan.crew_work[(m, l)][t] for m in crews
                          if (m, l) in plan.crew_work)
            if working > 1:
                bad.append(f"line {l}: {working} crews working at once at t={t}")

    into: dict[str, list] = {nd.id: [] for nd in graph.nodes}
    out_of: dict[str, list] = {nd.id: [] for nd in graph.nodes}
    for e in graph.edges:
        into[e.to_node].append(e)
        out_of[e.from_node].append(e)
    for nd in graph.nodes:
        rec = nodes[nd.id]
        for t in range(T):
            p_res = -rec["p_served_mw"][t] / s_base
            q_res = -rec["q_served_mvar"][t] / s_base
            for src in rec["sources"].values():
                p_res += src["p_mw"][t] / s_base
                q_res += src["q_mvar"][t] / s_base
            for e in into[nd.id]:
                f = flows[e.line_id]
                p_res += f["p_mw"][t] / s_base - e.r_pu * f["l_pu"][t]
                q_res += f["q_mvar"][t] / s_base - e.x_pu * f["l_pu"][t]
            for e in out_of[nd.id]:
                f = flows[e.line_id]
                p_res -= f["p_mw"][t] / s_base
                q_res -= f["q_mvar"][t] / s_base
            if abs(p_res) > tol:
                bad.append(f"node {nd.id}: active-power imbalance "
                           f"{p_res:.3e} pu at t={t}")
            if abs(q_res) > tol:
                bad.append(f"node {nd.id}: reactive-power imbalance "
                           f"{q_res:.3e} pu at t={t}")
            p = rec["p_served_mw"][t]
            if p < nd.p_crit_mw[t] - tol * s_base or p > nd.p_mw[t] + tol * s_base:
                bad.append(f"node {nd.id}: served load {p:.6f} MW outside "
                           f"[{nd.p_crit_mw[t]:.6f}, {nd.p_mw[t]:.6f}] at t={t}")
            v = rec["v_pu"][t]
            if v < nd.vmin_pu - tol or v > nd.vmax_pu + tol:
                bad.append(f"node {nd.id}: voltage {v:.6f} pu outside "
                           f"[{nd.vmin_pu}, {nd.vmax_pu}] at t={t}")

    for t in range(T):
        ter = sum(nd.p_mw[t] for nd in graph.nodes) * dt
        tes = sum(nodes[nd.id]["p_served_mw"][t] for nd in graph.nodes) * dt
        if abs(plan.ter_mwh[t] - ter) > tol:
            bad.append(f"period t={t}: recorded requirement {plan.ter_mwh[t]:.6f}"
                       f" MWh differs from the graph's {ter:.6f} MWh")
        if abs(plan.unserved_mwh[t] - (ter - tes)) > tol:
            bad.append(f"period t={t}: unserved {plan.unserved_mwh[t]:.6f} MWh "
                       f"!= required - supplied = {ter - tes:.6f} MWh")
    if abs(plan.objective_mwh - sum(plan.unserved_mwh)) > tol:
        bad.append(f"objective {plan.objective_mwh:.6f} MWh != sum of "
                   f"per-period unserved {sum(plan.unserved_mwh):.6f} MWh")

    if scenario is not None:
        if set(plan.line_status) != set(scenario.damaged_lines):
            bad.append("plan line_status does not cover exactly the "
                       "scenario's damaged lines")
        init = scenario.initial_travel or (0,) * len(scenario.damaged_lines)
        for li, l in enumerate(scenario.damaged_lines):
            rt = scenario.repair_periods[l]
            status = plan.line_status.get(l, (0,) * T)
            for t in range(T):
                if not status[t]:
                    continue
                done = sum(plan.crew_work[(m, l)][tau]
                           for m in crews for tau in range(t)
                           if (m, l) in plan.crew_work)
                if done < rt:
                    bad.append(f"line {l}: energized at t={t} after only "
                               f"{done} of {rt} work periods")
                break  # statuses are monotone; first on-period suffices
            for m in crews:
                visit = plan.crew_visit.get((m, l), (0,) * T)
                for t in range(min(init[li], T)):
                    if visit[t]:
                        bad.append(f"crew {m}: at line {l} at t={t} before "
                                   f"initial travel of {init[li]} periods")
        for m in crews:
            for bi, lb in enumerate(scenario.damaged_lines):
                for ai, la in enumerate(scenario.damaged_lines):
                    if ai == bi:
                        continue
                    tt = scenario.travel_periods[bi][ai]
                    for t in range(T):
                        if not plan.crew_visit.get((m, la), (0,) * T)[t]:
                            continue
                        for tau in range(1, tt + 1):
                            if t + tau < T and \
                                    plan.crew_visit.get((m, lb), (0,) * T)[t + tau]:
                                bad.append(
                                    f"crew {m}: at line {la} at t={t} and line "
                                    f"{lb} at t={t + tau}, closer than the "
                                    f"{tt}-period travel time")

    if mix is not None:
        placed: dict[tuple[str, int], int] = {}
        for (kind, size, _nid), n in plan.mer_placement.items():
            if n < 0:
                bad.append(f"negative placement count for {kind}[{size}]")
            placed[(kind, size)] = placed.get((kind, size), 0) + n
        fleet = {(sp.kind, sp.size_index): count for sp, count in mix.units}
        for key, n in placed.items():
            if key not in fleet:
                bad.append(f"placement of {key[0]}[{key[1]}] not in the mix")
            elif n > fleet[key]:
                bad.append(f"{key[0]}[{key[1]}]: {n} units placed but only "
                           f"{fleet[key]} in the fleet")
        for nd in graph.nodes:
            for label, src in nodes[nd.id]["sources"].items():
                if "[" not in label or label == "grid":
                    continue
                kind, rest = label.split("[", 1)
                size = int(rest.rstrip("]"))
                if kind not in ("MDG", "MESS", "MPV"):
                    continue
                if plan.mer_placement.get((kind, size, nd.id), 0) == 0 and \
                        any(abs(v) > tol * s_base for v in src["p_mw"] + src["q_mvar"]):
                    bad.append(f"node {nd.id}: dispatch from {label} without "
                               "any unit placed there")

    return tuple(bad)


# ---------------------------------------------------------------------------
# plan (de)serialization


def _json_number(v: float) -> float | None:
    """Strict JSON has no Infinity/NaN; those serialize as null."""
    return float(v) if math.isfinite(v) else None


def plan_to_dict(plan: RestorationPlan) -> dict:
    return {
        "mer_placement": [
            {"kind": k, "size_index": j, "node": nid, "count": n}
            for (k, j, nid), n in sorted(plan.mer_placement.items())],
        "line_status": {l: list(v) for l, v in plan.line_status.items()},
        "crew_visit": {f"{m}:{l}": list(v)
                       for (m, l), v in plan.crew_visit.items()},
        "crew_work": {f"{m}:{l}": list(v)
                      for (m, l), v in plan.crew_work.items()},
        "dispatch": plan.dispatch,
        "unserved_mwh": list(plan.unserved_mwh),
        "objective_mwh": plan.objective_mwh,
        "ter_mwh": list(plan.ter_mwh),
        "status": plan.status,
        "gap": _json_number(plan.gap),
        "bound_mwh": _json_number(plan.bound_mwh),
        "node_count": plan.node_count,
        "wall_time": plan.wall_time,
        "n_periods": plan.n_periods,
        "dt_hours": plan.dt_hours,
    }


def parse_plan(data: dict) -> RestorationPlan:
    def crew_map(rec: dict) -> dict:
        out = {}
        for key, vals in rec.items():
            m, line = key.split(":", 1)
            out[(int(m), line)] = tuple(int(v) for v in vals)
        return out

    return RestorationPlan(
        mer_placement={(r["kind"], int(r["size_index"]), r["node"]): int(r["count"])
                       for r in data.get("mer_placement", [])},
        line_status={l: tuple(int(v) for v in vals)
                     for l, vals in data.get("line_status", {}).items()},
        crew_visit=crew_map(data.get("crew_visit", {})),
        crew_work=crew_map(data.get("crew_work", {})),
        dispatch=data["dispatch"],
        unserved_mwh=tuple(data["unserved_mwh"]),
        objective_mwh=float(data["objective_mwh"]),
        ter_mwh=tuple(data["ter_mwh"]),
        status=data["status"],
        gap=math.inf if data["gap"] is None else float(data["gap"]),
        bound_mwh=(-math.inf if data["bound_mwh"] is None
                   else float(data["bound_mwh"])),
        node_count=int(data["node_count"]),
        wall_time=float(data.get("wall_time", 0.0)),
        n_periods=int(data["n_periods"]),
        dt_hours=float(data["dt_hours"]),
    )
