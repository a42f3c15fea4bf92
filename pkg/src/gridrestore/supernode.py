"""Island detection and aggregation of a damaged feeder into super-nodes.

After a damage scenario removes lines, the surviving network splits into
connected components ("islands").  Each island is contracted into a single
aggregated node carrying the summed load series, the collected surviving
resources, the intersected voltage band and the summed bulk-grid supply of
its members.  Damaged lines whose endpoints fall in different islands become
the only edges of the reduced graph; damaged lines internal to an island
remain repair jobs but carry no power flow in the reduced model.

The same graph container also represents the unreduced network (one node per
bus, every line an edge) so the restoration builder is agnostic to whether
reduction was applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InfeasibleBounds, ValidationError
from .netmodel import (
    DamageScenario,
    DerUnit,
    FeederModel,
    StudyHorizon,
    _number,
    _parse_der,
    _parse_horizon,
    _parse_scenario,
    _require,
    _series,
    bus_sort_key,
    der_to_dict,
)


@dataclass(frozen=True)
class IslandSet:
    """Connected components over intact lines, each a sorted bus tuple.

    Islands are ordered by their smallest member bus id; together they
    partition the feeder's buses.
    """

    islands: tuple[tuple[str, ...], ...]

    def __len__(self) -> int:
        return len(self.islands)

    def index_of(self, bus_id: str) -> int:
        for k, isl in enumerate(self.islands):
            if bus_id in isl:
                return k
        raise KeyError(bus_id)


@dataclass(frozen=True)
class SuperNode:
    id: str
    members: tuple[str, ...]
    vmin_pu: float
    vmax_pu: float
    p_mw: tuple[float, ...]
    q_mvar: tuple[float, ...]
    p_crit_mw: tuple[float, ...]
    q_crit_mvar: tuple[float, ...]
    ders: tuple[DerUnit, ...]
    grid_p_mw: tuple[float, ...]
    grid_q_mvar: tuple[float, ...]


@dataclass(frozen=True)
class SuperEdge:
    line_id: str
    from_node: str
    to_node: str
    r_pu: float
    x_pu: float
    smax_mva: float
    i2max_pu: float
    damaged: bool


@dataclass(frozen=True)
class SuperNodeGraph:
    s_base_mva: float
    v_base_kv: float
    horizon: StudyHorizon
    nodes: tuple[SuperNode, ...]
    edges: tuple[SuperEdge, ...]
    repair_only: tuple[str, ...] = ()

    def node(self, node_id: str) -> SuperNode:
        for nd in self.nodes:
            if nd.id == node_id:
                return nd
        raise KeyError(node_id)

    def node_ids(self) -> tuple[str, ...]:
        return tuple(nd.id for nd in self.nodes)

    def damaged_edges(self) -> tuple[SuperEdge, ...]:
        return tuple(e for e in self.edges if e.damaged)


def detect_islands(feeder: FeederModel, scenario: DamageScenario) -> IslandSet:
    """Connected components of the feeder graph restricted to intact lines."""
    damaged = set(scenario.damaged_lines)
    adj: dict[str, list[str]] = {b.id: [] for b in feeder.buses}
    for ln in feeder.lines:
        if ln.id in damaged:
            continue
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)

    unseen = set(feeder.bus_ids())
    comps: list[tuple[str, ...]] = []
    for start in sorted(unseen, key=bus_sort_key):
        if start not in unseen:
            continue
        stack = [start]
        unseen.discard(start)
        comp = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v in unseen:
                    unseen.discard(v)
                    comp.append(v)
                    stack.append(v)
        comps.append(tuple(sorted(comp, key=bus_sort_key)))
    comps.sort(key=lambda c: bus_sort_key(c[0]))
    return IslandSet(islands=tuple(comps))


def _sum_series(acc: list[float], series: tuple[float, ...]) -> None:
    for t, v in enumerate(series):
        acc[t] += v


def aggregate(feeder: FeederModel, scenario: DamageScenario,
              islands: IslandSet | None = None) -> SuperNodeGraph:
    """Contract each island to one super-node; damaged lines become edges.

    Raises:
        InfeasibleBounds: if intersecting member voltage bands leaves an
            island with vmin >= vmax.
    """
    if islands is None:
        islands = detect_islands(feeder, scenario)
    n = feeder.horizon.n_periods

    nodes: list[SuperNode] = []
    member_to_node: dict[str, str] = {}
    for k, members in enumerate(islands.islands):
        node_id = f"S{k + 1}"
        vmin = max(feeder.bus(b).vmin_pu for b in members)
        vmax = min(feeder.bus(b).vmax_pu for b in members)
        if vmin >= vmax:
            raise InfeasibleBounds(
                f"island {node_id} ({members[0]}...): intersected voltage band "
                f"[{vmin}, {vmax}] is empty")
        p = [0.0] * n
        q = [0.0] * n
        pc = [0.0] * n
        qc = [0.0] * n
        gp = [0.0] * n
        gq = [0.0] * n
        ders: list[DerUnit] = []
        for b in members:
            member_to_node[b] = node_id
            ld = feeder.load_at(b)
            if ld is not None:
                _sum_series(p, ld.p_mw)
                _sum_series(q, ld.q_mvar)
                _sum_series(pc, ld.p_crit_mw)
                _sum_series(qc, ld.q_crit_mvar)
            ders.extend(feeder.ders_at(b))
            if b in scenario.grid_p_mw:
                _sum_series(gp, scenario.grid_p_mw[b])
                _sum_series(gq, scenario.grid_q_mvar[b])
        nodes.append(SuperNode(
            id=node_id, members=members, vmin_pu=vmin, vmax_pu=vmax,
            p_mw=tuple(p), q_mvar=tuple(q), p_crit_mw=tuple(pc),
            q_crit_mvar=tuple(qc), ders=tuple(ders),
            grid_p_mw=tuple(gp), grid_q_mvar=tuple(gq)))

    edges: list[SuperEdge] = []
    repair_only: list[str] = []
    for lid in scenario.damaged_lines:
        ln = feeder.line(lid)
        a = member_to_node[ln.from_bus]
        b = member_to_node[ln.to_bus]
        if a == b:
            repair_only.append(lid)
            continue
        edges.append(SuperEdge(line_id=lid, from_node=a, to_node=b,
                               r_pu=ln.r_pu, x_pu=ln.x_pu, smax_mva=ln.smax_mva,
                               i2max_pu=ln.i2max_pu, damaged=True))

    return SuperNodeGraph(s_base_mva=feeder.s_base_mva, v_base_kv=feeder.v_base_kv,
                          horizon=feeder.horizon, nodes=tuple(nodes),
                          edges=tuple(edges), repair_only=tuple(repair_only))


def full_graph(feeder: FeederModel, scenario: DamageScenario) -> SuperNodeGraph:
    """Unreduced view: one node per bus, every line an edge (damaged flagged)."""
    n = feeder.horizon.n_periods
    zero = tuple(0.0 for _ in range(n))
    nodes = []
    for b in feeder.buses:
        ld = feeder.load_at(b.id)
        nodes.append(SuperNode(
            id=b.id, members=(b.id,), vmin_pu=b.vmin_pu, vmax_pu=b.vmax_pu,
            p_mw=ld.p_mw if ld else zero,
            q_mvar=ld.q_mvar if ld else zero,
            p_crit_mw=ld.p_crit_mw if ld else zero,
            q_crit_mvar=ld.q_crit_mvar if ld else zero,
            ders=feeder.ders_at(b.id),
            grid_p_mw=scenario.grid_p_mw.get(b.id, zero),
            grid_q_mvar=scenario.grid_q_mvar.get(b.id, zero)))
    damaged = set(scenario.damaged_lines)
    edges = tuple(SuperEdge(line_id=ln.id, from_node=ln.from_bus, to_node=ln.to_bus,
                            r_pu=ln.r_pu, x_pu=ln.x_pu, smax_mva=ln.smax_mva,
                            i2max_pu=ln.i2max_pu, damaged=ln.id in damaged)
                  for ln in feeder.lines)
    return SuperNodeGraph(s_base_mva=feeder.s_base_mva, v_base_kv=feeder.v_base_kv,
                          horizon=feeder.horizon, nodes=tuple(nodes), edges=edges)


def justify_reduction(feeder: FeederModel, scenario: DamageScenario,
                      threshold_pu: float = 0.05) -> dict:
    """Bound the voltage spread hidden by aggregation, island by island.

    For each island the full aggregate peak load is assumed to flow over the
    island's heaviest internal path; the linearized squared-voltage drop
    2*(r*P + x*Q) accumulated along that path is converted to a magnitude
    drop at nominal voltage.  Aggregation is considered justified when every
    island's worst-case drop stays below ``threshold_pu``.
    """
    islands = detect_islands(feeder, scenario)
    damaged = set(scenario.damaged_lines)
    s_base = feeder.s_base_mva
    report_islands = []
    worst = 0.0
    for k, members in enumerate(islands.islands):
        member_set = set(members)
        adj: dict[str, list[tuple[str, float]]] = {b: [] for b in members}
        peak_p = max((sum(feeder.load_at(b).p_mw[t] for b in members
                          if feeder.load_at(b)) for t in feeder.horizon.periods()),
                     default=0.0) / s_base
        peak_q = max((sum(feeder.load_at(b).q_mvar[t] for b in members
                          if feeder.load_at(b)) for t in feeder.horizon.periods()),
                     default=0.0) / s_base
        for ln in feeder.lines:
            if ln.id in damaged or ln.from_bus not in member_set \
                    or ln.to_bus not in member_set:
                continue
            w = 2.0 * (ln.r_pu * peak_p + ln.x_pu * peak_q)
            adj[ln.from_bus].append((ln.to_bus, w))
            adj[ln.to_bus].append((ln.from_bus, w))

        # heaviest simple path in the island tree: DFS from every node
        def farthest(start: str) -> float:
            best = 0.0
            stack = [(start, None, 0.0)]
            while stack:
                u, parent, dist = stack.pop()
                best = max(best, dist)
                for v, w in adj[u]:
                    if v != parent:
                        stack.append((v, u, dist + w))
            return best

        drop_sq = max((farthest(b) for b in members), default=0.0)
        drop_mag = 1.0 - (max(0.0, 1.0 - drop_sq)) ** 0.5
        drop_kv = drop_mag * feeder.v_base_kv
        report_islands.append({
            "island": f"S{k + 1}",
            "n_buses": len(members),
            "peak_p_pu": peak_p,
            "peak_q_pu": peak_q,
            "worst_path_drop_squared_pu": drop_sq,
            "worst_path_drop_pu": drop_mag,
            "worst_path_drop_kv": drop_kv,
            "within_threshold": drop_mag <= threshold_pu,
        })
        worst = max(worst, drop_mag)
    return {
        "threshold_pu": threshold_pu,
        "worst_drop_pu": worst,
        "justified": worst <= threshold_pu,
        "islands": report_islands,
    }


def scenario_for_graph(data: dict, graph: SuperNodeGraph) -> DamageScenario:
    """Parse a damage scenario against a reduced graph instead of a feeder.

    Damaged-line references must resolve against the graph's edges or its
    repair-only lines.  A ``grid_supply`` block, if present, is dropped:
    bulk-grid injections were already folded into the graph's nodes when the
    graph was built, so re-validating them against original bus ids here
    would reject perfectly consistent inputs.
    """
    payload = {k: v for k, v in data.items() if k != "grid_supply"}
    known = {e.line_id for e in graph.edges} | set(graph.repair_only)
    return _parse_scenario(payload, known, graph.horizon, set(graph.node_ids()))


def graph_to_dict(graph: SuperNodeGraph) -> dict:
    """Inverse of :func:`parse_graph` (fixpoint under parse -> serialize)."""
    return {
        "s_base_mva": graph.s_base_mva,
        "v_base_kv": graph.v_base_kv,
        "horizon": {"n_periods": graph.horizon.n_periods,
                    "dt_hours": graph.horizon.dt_hours},
        "nodes": [{
            "id": nd.id,
            "members": list(nd.members),
            "vmin_pu": nd.vmin_pu,
            "vmax_pu": nd.vmax_pu,
            "p_mw": list(nd.p_mw),
            "q_mvar": list(nd.q_mvar),
            "p_crit_mw": list(nd.p_crit_mw),
            "q_crit_mvar": list(nd.q_crit_mvar),
            "ders": [der_to_dict(d) for d in nd.ders],
            "grid_p_mw": list(nd.grid_p_mw),
            "grid_q_mvar": list(nd.grid_q_mvar),
        } for nd in graph.nodes],
        "edges": [{
            "line_id": e.line_id,
            "from": e.from_node,
            "to": e.to_node,
            "r_pu": e.r_pu,
            "x_pu": e.x_pu,
            "smax_mva": e.smax_mva,
            "i2max_pu": ("inf" if e.i2max_pu == math.inf else e.i2max_pu),
            "damaged": e.damaged,
        } for e in graph.edges],
        "repair_only": list(graph.repair_only),
    }


def parse_graph(data: dict) -> SuperNodeGraph:
    """Read a reduced network written by :func:`graph_to_dict`."""
    ctx = "graph"
    horizon = _parse_horizon(_require(data, "horizon", ctx), f"{ctx}.horizon")
    T = horizon.n_periods
    s_base = _number(_require(data, "s_base_mva", ctx), ctx, "s_base_mva",
                     minimum=0.0, strict=True)
    v_base = _number(_require(data, "v_base_kv", ctx), ctx, "v_base_kv",
                     minimum=0.0, strict=True)

    nodes = []
    seen: set[str] = set()
    for k, rec in enumerate(_require(data, "nodes", ctx)):
        nctx = f"{ctx}.nodes[{k}]"
        nid = str(_require(rec, "id", nctx))
        if nid in seen:
            raise ValidationError(f"{nctx}: duplicate node id '{nid}'",
                                  record=nctx, field="id")
        seen.add(nid)
        vmin = _number(rec.get("vmin_pu", 0.95), nctx, "vmin_pu", minimum=0.0)
        vmax = _number(rec.get("vmax_pu", 1.05), nctx, "vmax_pu", minimum=0.0)
        if vmax < vmin:
            raise ValidationError(f"{nctx}: vmax_pu below vmin_pu",
                                  record=nctx, field="vmax_pu")
        zero = (0.0,) * T
        nodes.append(SuperNode(
            id=nid,
            members=tuple(str(m) for m in rec.get("members", (nid,))),
            vmin_pu=vmin, vmax_pu=vmax,
            p_mw=_series(rec.get("p_mw", zero), T, nctx, "p_mw", minimum=0.0),
            q_mvar=_series(rec.get("q_mvar", zero), T, nctx, "q_mvar", minimum=0.0),
            p_crit_mw=_series(rec.get("p_crit_mw", zero), T, nctx,
                              "p_crit_mw", minimum=0.0),
            q_crit_mvar=_series(rec.get("q_crit_mvar", zero), T, nctx,
                                "q_crit_mvar", minimum=0.0),
            ders=tuple(_parse_der(d, T, i)
                       for i, d in enumerate(rec.get("ders", ()))),
            grid_p_mw=_series(rec.get("grid_p_mw", zero), T, nctx,
                              "grid_p_mw", minimum=0.0),
            grid_q_mvar=_series(rec.get("grid_q_mvar", zero), T, nctx,
                                "grid_q_mvar", minimum=0.0)))

    node_ids = {nd.id for nd in nodes}
    edges = []
    edge_ids: set[str] = set()
    for k, rec in enumerate(_require(data, "edges", ctx)):
        ectx = f"{ctx}.edges[{k}]"
        lid = str(_require(rec, "line_id", ectx))
        if lid in edge_ids:
            raise ValidationError(f"{ectx}: duplicate line id '{lid}'",
                                  record=ectx, field="line_id")
        edge_ids.add(lid)
        frm = str(_require(rec, "from", ectx))
        to = str(_require(rec, "to", ectx))
        for endpoint in (frm, to):
            if endpoint not in node_ids:
                raise ValidationError(f"{ectx}: unknown endpoint '{endpoint}'",
                                      record=ectx, field="from")
        i2 = rec.get("i2max_pu", "inf")
        i2 = math.inf if i2 == "inf" else _number(i2, ectx, "i2max_pu", minimum=0.0)
        edges.append(SuperEdge(
            line_id=lid, from_node=frm, to_node=to,
            r_pu=_number(_require(rec, "r_pu", ectx), ectx, "r_pu", minimum=0.0),
            x_pu=_number(_require(rec, "x_pu", ectx), ectx, "x_pu", minimum=0.0),
            smax_mva=_number(_require(rec, "smax_mva", ectx), ectx, "smax_mva",
                             minimum=0.0, strict=True),
            i2max_pu=i2,
            damaged=bool(rec.get("damaged", False))))

    return SuperNodeGraph(
        s_base_mva=s_base, v_base_kv=v_base, horizon=horizon,
        nodes=tuple(nodes), edges=tuple(edges),
        repair_only=tuple(str(l) for l in data.get("repair_only", ())))
