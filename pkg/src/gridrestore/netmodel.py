"""Feeder, scenario, forecast and resource-catalog data model.

All file formats are JSON.  Electrical quantities in files use physical units
(MW, MVAr, MWh, MVA, hours) except line impedances, which are already
per-unit on the feeder's (s_base, v_base).  Model builders convert powers to
per-unit at construction time; the dataclasses below store file units
verbatim so that serialize -> parse -> serialize is a fixpoint.

Voltage bounds are magnitudes in per-unit; optimization models internally
work with squared magnitudes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    DimensionError,
    ParseError,
    UnknownLine,
    ValidationError,
)

DER_KINDS = ("DG", "ESS", "PV")
MER_KINDS = ("MDG", "MESS", "MPV")


def bus_sort_key(bus_id: str):
    """Deterministic ordering for bus ids: numeric ids first, by value."""
    try:
        return (0, int(bus_id), bus_id)
    except ValueError:
        return (1, 0, bus_id)


@dataclass(frozen=True)
class StudyHorizon:
    """Uniform time grid: ``n_periods`` steps of ``dt_hours`` each."""

    n_periods: int
    dt_hours: float

    @property
    def hours(self) -> float:
        return self.n_periods * self.dt_hours

    def periods(self) -> range:
        return range(self.n_periods)


@dataclass(frozen=True)
class Bus:
    id: str
    vmin_pu: float
    vmax_pu: float


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    r_pu: float
    x_pu: float
    smax_mva: float
    i2max_pu: float

    def other_end(self, bus_id: str) -> str:
        return self.to_bus if bus_id == self.from_bus else self.from_bus


@dataclass(frozen=True)
class LoadProfile:
    """Per-period demand at one bus; critical demand is the must-serve floor."""

    bus: str
    p_mw: tuple[float, ...]
    q_mvar: tuple[float, ...]
    p_crit_mw: tuple[float, ...]
    q_crit_mvar: tuple[float, ...]


@dataclass(frozen=True)
class DerUnit:
    """A surviving distributed resource.

    ``kind`` is one of DG (dispatchable generator, capacity ``p_mw`` scalar),
    PV (profile-limited generator, ``p_series_mw`` per period) or ESS
    (discharge-only storage with energy ``e_mwh``, apparent power ``s_mva``,
    surplus energy available ``e_surplus_mwh`` and loss resistances
    ``r_e``/``r_ct`` in per-unit).
    """

    bus: str
    kind: str
    p_mw: float | None = None
    p_series_mw: tuple[float, ...] | None = None
    e_mwh: float | None = None
    s_mva: float | None = None
    e_surplus_mwh: float | None = None
    r_e: float | None = None
    r_ct: float | None = None
    k1: float = 0.2
    k2: float = 0.6


@dataclass(frozen=True)
class MerSpec:
    """One catalog entry for a mobile emergency resource size."""

    kind: str
    size_index: int
    cost: float
    p_mw: float | None = None
    e_mwh: float | None = None
    s_mva: float | None = None
    r_e: float | None = None
    r_ct: float | None = None
    k1: float = 0.2
    k2: float = 0.6

    @property
    def label(self) -> str:
        if self.kind == "MESS":
            return f"MESS[{self.e_mwh}MWh/{self.s_mva}MVA]"
        return f"{self.kind}[{self.p_mw}MW]"


@dataclass(frozen=True)
class FeederModel:
    s_base_mva: float
    v_base_kv: float
    horizon: StudyHorizon
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    loads: tuple[LoadProfile, ...]
    ders: tuple[DerUnit, ...]

    def bus(self, bus_id: str) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def line(self, line_id: str) -> Line:
        for ln in self.lines:
            if ln.id == line_id:
                return ln
        raise KeyError(line_id)

    def bus_ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.buses)

    def load_at(self, bus_id: str) -> LoadProfile | None:
        for ld in self.loads:
            if ld.bus == bus_id:
                return ld
        return None

    def ders_at(self, bus_id: str) -> tuple[DerUnit, ...]:
        return tuple(d for d in self.ders if d.bus == bus_id)

    def adjacency(self) -> dict[str, list[Line]]:
        adj: dict[str, list[Line]] = {b.id: [] for b in self.buses}
        for ln in self.lines:
            adj[ln.from_bus].append(ln)
            adj[ln.to_bus].append(ln)
        return adj


@dataclass(frozen=True)
class DamageScenario:
    """Damaged lines, repair durations (periods), crew travel data and any
    remaining bulk-grid supply."""

    damaged_lines: tuple[str, ...]
    repair_periods: Mapping[str, int]
    travel_periods: tuple[tuple[int, ...], ...]
    n_crews: int
    initial_travel: tuple[int, ...] = ()
    grid_p_mw: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    grid_q_mvar: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def damaged_index(self, line_id: str) -> int:
        return self.damaged_lines.index(line_id)


@dataclass(frozen=True)
class ShortageForecast:
    """Area-wide shortage forecast used by the pre-event sizing model."""

    horizon: StudyHorizon
    p_total_mw: tuple[float, ...]
    q_total_mvar: tuple[float, ...]
    p_crit_mw: tuple[float, ...]
    q_crit_mvar: tuple[float, ...]
    ders: tuple[DerUnit, ...]


# ---------------------------------------------------------------------------
# parsing helpers


def fixture_path(name: str) -> Path:
    """Path of a packaged study-case data file (see ``gridrestore/fixtures``)."""
    path = Path(__file__).resolve().parent / "fixtures" / name
    if not path.exists():
        raise ParseError(f"no packaged fixture named '{name}'")
    return path


def _read_json(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top-level value must be an object")
    return data


def _require(data: dict, key: str, ctx: str):
    if key not in data:
        raise ParseError(f"{ctx}: missing required key '{key}'")
    return data[key]


def _number(value, ctx: str, field_name: str, *, minimum=None, strict=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{ctx}: '{field_name}' must be a number",
                              record=ctx, field=field_name)
    v = float(value)
    if not math.isfinite(v):
        raise ValidationError(f"{ctx}: '{field_name}' must be finite",
                              record=ctx, field=field_name)
    if minimum is not None:
        if strict and not v > minimum:
            raise ValidationError(f"{ctx}: '{field_name}' must be > {minimum}",
                                  record=ctx, field=field_name)
        if not strict and not v >= minimum:
            raise ValidationError(f"{ctx}: '{field_name}' must be >= {minimum}",
                                  record=ctx, field=field_name)
    return v


def _series(value, n: int, ctx: str, field_name: str, *, minimum=None) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ValidationError(f"{ctx}: '{field_name}' must be an array",
                              record=ctx, field=field_name)
    if len(value) != n:
        raise DimensionError(
            f"{ctx}: '{field_name}' has length {len(value)}, expected {n}",
            record=ctx, field=field_name)
    return tuple(_number(v, ctx, f"{field_name}[{i}]", minimum=minimum)
                 for i, v in enumerate(value))


def _parse_horizon(data: dict, ctx: str) -> StudyHorizon:
    n = _require(data, "n_periods", ctx)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValidationError(f"{ctx}: n_periods must be a positive integer",
                              record=ctx, field="n_periods")
    dt = _number(_require(data, "dt_hours", ctx), ctx, "dt_hours", minimum=0.0, strict=True)
    return StudyHorizon(n_periods=n, dt_hours=dt)


def _parse_der(rec: dict, n_periods: int, idx: int) -> DerUnit:
    ctx = f"der[{idx}]"
    bus = str(_require(rec, "bus", ctx))
    kind = _require(rec, "kind", ctx)
    if kind not in DER_KINDS:
        raise ValidationError(f"{ctx}: unknown kind '{kind}'", record=ctx, field="kind")
    k1 = _number(rec.get("k1", 0.2), ctx, "k1", minimum=0.0)
    k2 = _number(rec.get("k2", 0.6), ctx, "k2", minimum=0.0)
    if k2 < k1:
        raise ValidationError(f"{ctx}: k2 must be >= k1", record=ctx, field="k2")
    if kind == "DG":
        p = _number(_require(rec, "p_mw", ctx), ctx, "p_mw", minimum=0.0, strict=True)
        return DerUnit(bus=bus, kind="DG", p_mw=p, k1=k1, k2=k2)
    if kind == "PV":
        series = _series(_require(rec, "p_series_mw", ctx), n_periods, ctx,
                         "p_series_mw", minimum=0.0)
        return DerUnit(bus=bus, kind="PV", p_series_mw=series, k1=k1, k2=k2)
    e = _number(_require(rec, "e_mwh", ctx), ctx, "e_mwh", minimum=0.0, strict=True)
    s = _number(_require(rec, "s_mva", ctx), ctx, "s_mva", minimum=0.0, strict=True)
    surplus = _number(rec.get("e_surplus_mwh", e), ctx, "e_surplus_mwh", minimum=0.0)
    if surplus > e + 1e-12:
        raise ValidationError(f"{ctx}: e_surplus_mwh exceeds e_mwh",
                              record=ctx, field="e_surplus_mwh")
    r_e = rec.get("r_e")
    r_ct = rec.get("r_ct")
    if r_e is not None:
        r_e = _number(r_e, ctx, "r_e", minimum=0.0)
    if r_ct is not None:
        r_ct = _number(r_ct, ctx, "r_ct", minimum=0.0)
    if r_e is not None and r_ct is not None and r_ct > r_e:
        raise ValidationError(f"{ctx}: r_ct must not exceed r_e", record=ctx, field="r_ct")
    return DerUnit(bus=bus, kind="ESS", e_mwh=e, s_mva=s, e_surplus_mwh=surplus,
                   r_e=r_e, r_ct=r_ct, k1=k1, k2=k2)


def parse_feeder(data: dict) -> FeederModel:
    """Build and validate a :class:`FeederModel` from a parsed JSON object."""
    s_base = _number(_require(data, "s_base_mva", "feeder"), "feeder", "s_base_mva",
                     minimum=0.0, strict=True)
    v_base = _number(_require(data, "v_base_kv", "feeder"), "feeder", "v_base_kv",
                     minimum=0.0, strict=True)
    horizon = _parse_horizon(_require(data, "horizon", "feeder"), "feeder.horizon")

    buses = []
    seen = set()
    for i, rec in enumerate(_require(data, "buses", "feeder")):
        ctx = f"bus[{i}]"
        bid = str(_require(rec, "id", ctx))
        if not bid:
            raise ValidationError(f"{ctx}: empty bus id", record=ctx, field="id")
        if bid in seen:
            raise ValidationError(f"{ctx}: duplicate bus id '{bid}'", record=bid, field="id")
        seen.add(bid)
        vmin = _number(rec.get("vmin_pu", 0.95), ctx, "vmin_pu", minimum=0.0, strict=True)
        vmax = _number(rec.get("vmax_pu", 1.05), ctx, "vmax_pu", minimum=0.0, strict=True)
        if vmin >= vmax:
            raise ValidationError(f"bus '{bid}': vmin_pu must be < vmax_pu",
                                  record=bid, field="vmin_pu")
        buses.append(Bus(id=bid, vmin_pu=vmin, vmax_pu=vmax))
    bus_ids = {b.id for b in buses}

    lines = []
    line_ids = set()
    for i, rec in enumerate(_require(data, "lines", "feeder")):
        ctx = f"line[{i}]"
        lid = str(_require(rec, "id", ctx))
        if lid in line_ids:
            raise ValidationError(f"{ctx}: duplicate line id '{lid}'", record=lid, field="id")
        line_ids.add(lid)
        fb = str(_require(rec, "from", ctx))
        tb = str(_require(rec, "to", ctx))
        for end, name in ((fb, "from"), (tb, "to")):
            if end not in bus_ids:
                raise ValidationError(f"line '{lid}': unknown bus '{end}'",
                                      record=lid, field=name)
        if fb == tb:
            raise ValidationError(f"line '{lid}': self-loop", record=lid, field="to")
        r = _number(_require(rec, "r_pu", ctx), ctx, "r_pu", minimum=0.0)
        x = _number(_require(rec, "x_pu", ctx), ctx, "x_pu", minimum=0.0)
        smax = _number(_require(rec, "smax_mva", ctx), ctx, "smax_mva",
                       minimum=0.0, strict=True)
        default_i2 = (smax / s_base) ** 2 / min(b.vmin_pu for b in buses) ** 2
        i2max = _number(rec.get("i2max_pu", default_i2), ctx, "i2max_pu",
                        minimum=0.0, strict=True)
        lines.append(Line(id=lid, from_bus=fb, to_bus=tb, r_pu=r, x_pu=x,
                          smax_mva=smax, i2max_pu=i2max))

    n = horizon.n_periods
    loads = []
    load_buses = set()
    for i, rec in enumerate(data.get("loads", [])):
        ctx = f"load[{i}]"
        bus = str(_require(rec, "bus", ctx))
        if bus not in bus_ids:
            raise ValidationError(f"{ctx}: unknown bus '{bus}'", record=bus, field="bus")
        if bus in load_buses:
            raise ValidationError(f"{ctx}: duplicate load at bus '{bus}'",
                                  record=bus, field="bus")
        load_buses.add(bus)
        p = _series(_require(rec, "p_mw", ctx), n, ctx, "p_mw", minimum=0.0)
        q = _series(_require(rec, "q_mvar", ctx), n, ctx, "q_mvar", minimum=0.0)
        pc = _series(rec.get("p_crit_mw", [0.0] * n), n, ctx, "p_crit_mw", minimum=0.0)
        qc = _series(rec.get("q_crit_mvar", [0.0] * n), n, ctx, "q_crit_mvar", minimum=0.0)
        for t in range(n):
            if pc[t] > p[t] + 1e-12:
                raise ValidationError(
                    f"load at '{bus}': p_crit_mw[{t}] exceeds p_mw[{t}]",
                    record=bus, field="p_crit_mw")
            if qc[t] > q[t] + 1e-12:
                raise ValidationError(
                    f"load at '{bus}': q_crit_mvar[{t}] exceeds q_mvar[{t}]",
                    record=bus, field="q_crit_mvar")
        loads.append(LoadProfile(bus=bus, p_mw=p, q_mvar=q, p_crit_mw=pc, q_crit_mvar=qc))

    ders = []
    for i, rec in enumerate(data.get("ders", [])):
        der = _parse_der(rec, n, i)
        if der.bus not in bus_ids:
            raise ValidationError(f"der[{i}]: unknown bus '{der.bus}'",
                                  record=der.bus, field="bus")
        ders.append(der)

    model = FeederModel(s_base_mva=s_base, v_base_kv=v_base, horizon=horizon,
                        buses=tuple(buses), lines=tuple(lines),
                        loads=tuple(loads), ders=tuple(ders))
    _check_connected(model)
    return model


def _check_connected(model: FeederModel) -> None:
    if not model.buses:
        raise ValidationError("feeder has no buses", record="feeder", field="buses")
    adj = model.adjacency()
    start = model.buses[0].id
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for ln in adj[u]:
            v = ln.other_end(u)
            if v not in seen:
                seen.add(v)
                stack.append(v)
    missing = set(model.bus_ids()) - seen
    if missing:
        some = sorted(missing, key=bus_sort_key)[0]
        raise ValidationError(
            f"feeder graph is not connected (bus '{some}' unreachable)",
            record=some, field="lines")


def load_feeder(path: str | Path) -> FeederModel:
    return parse_feeder(_read_json(path))


def feeder_to_dict(model: FeederModel) -> dict:
    """Inverse of :func:`parse_feeder` (fixpoint under parse -> serialize)."""
    out = {
        "s_base_mva": model.s_base_mva,
        "v_base_kv": model.v_base_kv,
        "horizon": {"n_periods": model.horizon.n_periods,
                    "dt_hours": model.horizon.dt_hours},
        "buses": [{"id": b.id, "vmin_pu": b.vmin_pu, "vmax_pu": b.vmax_pu}
                  for b in model.buses],
        "lines": [{"id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
                   "r_pu": ln.r_pu, "x_pu": ln.x_pu, "smax_mva": ln.smax_mva,
                   "i2max_pu": ln.i2max_pu} for ln in model.lines],
        "loads": [{"bus": ld.bus, "p_mw": list(ld.p_mw), "q_mvar": list(ld.q_mvar),
                   "p_crit_mw": list(ld.p_crit_mw), "q_crit_mvar": list(ld.q_crit_mvar)}
                  for ld in model.loads],
        "ders": [der_to_dict(d) for d in model.ders],
    }
    return out


def der_to_dict(der: DerUnit) -> dict:
    rec: dict = {"bus": der.bus, "kind": der.kind, "k1": der.k1, "k2": der.k2}
    if der.kind == "DG":
        rec["p_mw"] = der.p_mw
    elif der.kind == "PV":
        rec["p_series_mw"] = list(der.p_series_mw)
    else:
        rec["e_mwh"] = der.e_mwh
        rec["s_mva"] = der.s_mva
        rec["e_surplus_mwh"] = der.e_surplus_mwh
        if der.r_e is not None:
            rec["r_e"] = der.r_e
        if der.r_ct is not None:
            rec["r_ct"] = der.r_ct
    return rec


def parse_scenario(data: dict, feeder: FeederModel) -> DamageScenario:
    return _parse_scenario(data, {ln.id for ln in feeder.lines},
                           feeder.horizon, set(feeder.bus_ids()))


def _parse_scenario(data: dict, known_lines: set[str], horizon: StudyHorizon,
                    known_buses: set[str]) -> DamageScenario:
    """Validation core shared by the feeder- and graph-based entry points."""
    damaged_raw = _require(data, "damaged_lines", "scenario")
    if not isinstance(damaged_raw, list):
        raise ValidationError("scenario: damaged_lines must be an array",
                              record="scenario", field="damaged_lines")
    known = known_lines
    damaged = []
    for lid in damaged_raw:
        lid = str(lid)
        if lid not in known:
            raise UnknownLine(f"scenario: damaged line '{lid}' not in the network",
                              record=lid, field="damaged_lines")
        if lid in damaged:
            raise ValidationError(f"scenario: line '{lid}' listed twice",
                                  record=lid, field="damaged_lines")
        damaged.append(lid)

    dt = horizon.dt_hours
    hours = data.get("repair_time_hours")
    periods = data.get("repair_time_periods")
    if hours is not None and periods is not None:
        raise ValidationError(
            "scenario: give repair_time_hours or repair_time_periods, not both",
            record="scenario", field="repair_time_periods")
    repair: dict[str, int] = {}
    if periods is not None:
        src, quantize = periods, False
    elif hours is not None:
        src, quantize = hours, True
    else:
        raise ParseError("scenario: missing repair_time_hours/repair_time_periods")
    for lid in damaged:
        if lid not in src:
            raise ValidationError(f"scenario: no repair time for line '{lid}'",
                                  record=lid, field="repair_time")
        val = _number(src[lid], "scenario", f"repair_time[{lid}]", minimum=0.0, strict=True)
        rp = math.ceil(val / dt - 1e-12) if quantize else int(round(val))
        if quantize:
            rp = max(rp, 1)
        if not quantize and (abs(val - rp) > 1e-9 or rp < 1):
            raise ValidationError(
                f"scenario: repair_time_periods[{lid}] must be a positive integer",
                record=lid, field="repair_time_periods")
        repair[lid] = rp

    m = len(damaged)
    travel_raw = data.get("travel_time_periods")
    if travel_raw is None:
        travel = tuple(tuple(0 for _ in range(m)) for _ in range(m))
    else:
        if not isinstance(travel_raw, list) or len(travel_raw) != m or any(
                not isinstance(row, list) or len(row) != m for row in travel_raw):
            raise DimensionError(
                f"scenario: travel_time_periods must be a {m}x{m} matrix",
                record="scenario", field="travel_time_periods")
        travel = []
        for i, row in enumerate(travel_raw):
            trow = []
            for j, v in enumerate(row):
                fv = _number(v, "scenario", f"travel_time_periods[{i}][{j}]", minimum=0.0)
                iv = int(round(fv))
                if abs(fv - iv) > 1e-9:
                    raise ValidationError(
                        f"scenario: travel_time_periods[{i}][{j}] must be an integer",
                        record="scenario", field="travel_time_periods")
                trow.append(iv)
            travel.append(tuple(trow))
        for i in range(m):
            if travel[i][i] != 0:
                raise ValidationError("scenario: travel matrix diagonal must be zero",
                                      record="scenario", field="travel_time_periods")
            for j in range(m):
                if travel[i][j] != travel[j][i]:
                    raise ValidationError("scenario: travel matrix must be symmetric",
                                          record="scenario", field="travel_time_periods")
        travel = tuple(travel)

    init_raw = data.get("initial_travel_periods", [0] * m)
    if not isinstance(init_raw, list) or len(init_raw) != m:
        raise DimensionError(
            f"scenario: initial_travel_periods must have length {m}",
            record="scenario", field="initial_travel_periods")
    initial = tuple(int(_number(v, "scenario", f"initial_travel_periods[{i}]",
                                minimum=0.0)) for i, v in enumerate(init_raw))

    n_crews = _require(data, "n_crews", "scenario")
    if isinstance(n_crews, bool) or not isinstance(n_crews, int) or n_crews < 1:
        raise ValidationError("scenario: n_crews must be a positive integer",
                              record="scenario", field="n_crews")

    n = horizon.n_periods
    grid_p: dict[str, tuple[float, ...]] = {}
    grid_q: dict[str, tuple[float, ...]] = {}
    for bus, rec in data.get("grid_supply", {}).items():
        bus = str(bus)
        if bus not in known_buses:
            raise ValidationError(f"scenario: grid_supply at unknown bus '{bus}'",
                                  record=bus, field="grid_supply")
        grid_p[bus] = _series(_require(rec, "p_mw", f"grid_supply[{bus}]"), n,
                              f"grid_supply[{bus}]", "p_mw", minimum=0.0)
        grid_q[bus] = _series(rec.get("q_mvar", [0.0] * n), n,
                              f"grid_supply[{bus}]", "q_mvar", minimum=0.0)

    return DamageScenario(damaged_lines=tuple(damaged), repair_periods=repair,
                          travel_periods=travel, n_crews=n_crews,
                          initial_travel=initial, grid_p_mw=grid_p, grid_q_mvar=grid_q)


def load_scenario(path: str | Path, feeder: FeederModel) -> DamageScenario:
    return parse_scenario(_read_json(path), feeder)


def scenario_to_dict(scenario: DamageScenario) -> dict:
    out = {
        "damaged_lines": list(scenario.damaged_lines),
        "repair_time_periods": {lid: scenario.repair_periods[lid]
                                for lid in scenario.damaged_lines},
        "travel_time_periods": [list(row) for row in scenario.travel_periods],
        "initial_travel_periods": list(scenario.initial_travel),
        "n_crews": scenario.n_crews,
    }
    if scenario.grid_p_mw:
        out["grid_supply"] = {
            bus: {"p_mw": list(scenario.grid_p_mw[bus]),
                  "q_mvar": list(scenario.grid_q_mvar[bus])}
            for bus in scenario.grid_p_mw}
    return out


def parse_forecast(data: dict) -> ShortageForecast:
    horizon = _parse_horizon(_require(data, "horizon", "forecast"), "forecast.horizon")
    n = horizon.n_periods
    p = _series(_require(data, "p_total_mw", "forecast"), n, "forecast",
                "p_total_mw", minimum=0.0)
    q = _series(_require(data, "q_total_mvar", "forecast"), n, "forecast",
                "q_total_mvar", minimum=0.0)
    frac = _number(data.get("critical_fraction", 0.6), "forecast",
                   "critical_fraction", minimum=0.0)
    if frac > 1.0:
        raise ValidationError("forecast: critical_fraction exceeds 1",
                              record="forecast", field="critical_fraction")
    pc = _series(data.get("p_crit_mw", [frac * v for v in p]), n, "forecast",
                 "p_crit_mw", minimum=0.0)
    qc = _series(data.get("q_crit_mvar", [frac * v for v in q]), n, "forecast",
                 "q_crit_mvar", minimum=0.0)
    for t in range(n):
        if pc[t] > p[t] + 1e-12:
            raise ValidationError(f"forecast: p_crit_mw[{t}] exceeds p_total_mw[{t}]",
                                  record="forecast", field="p_crit_mw")
        if qc[t] > q[t] + 1e-12:
            raise ValidationError(f"forecast: q_crit_mvar[{t}] exceeds q_total_mvar[{t}]",
                                  record="forecast", field="q_crit_mvar")
    ders = tuple(_parse_der(rec, n, i) for i, rec in enumerate(data.get("ders", [])))
    return ShortageForecast(horizon=horizon, p_total_mw=p, q_total_mvar=q,
                            p_crit_mw=pc, q_crit_mvar=qc, ders=ders)


def load_forecast(path: str | Path) -> ShortageForecast:
    return parse_forecast(_read_json(path))


def forecast_to_dict(fc: ShortageForecast) -> dict:
    return {
        "horizon": {"n_periods": fc.horizon.n_periods, "dt_hours": fc.horizon.dt_hours},
        "p_total_mw": list(fc.p_total_mw),
        "q_total_mvar": list(fc.q_total_mvar),
        "p_crit_mw": list(fc.p_crit_mw),
        "q_crit_mvar": list(fc.q_crit_mvar),
        "ders": [der_to_dict(d) for d in fc.ders],
    }


def parse_catalog(data: dict) -> tuple[MerSpec, ...]:
    specs: list[MerSpec] = []
    for kind, key in (("MDG", "mdg"), ("MESS", "mess"), ("MPV", "mpv")):
        for j, rec in enumerate(data.get(key, [])):
            ctx = f"{key}[{j}]"
            cost = _number(_require(rec, "cost", ctx), ctx, "cost", minimum=0.0, strict=True)
            k1 = _number(rec.get("k1", 0.2), ctx, "k1", minimum=0.0)
            k2 = _number(rec.get("k2", 0.6), ctx, "k2", minimum=0.0)
            if kind == "MESS":
                e = _number(_require(rec, "e_mwh", ctx), ctx, "e_mwh",
                            minimum=0.0, strict=True)
                s = _number(_require(rec, "s_mva", ctx), ctx, "s_mva",
                            minimum=0.0, strict=True)
                r_e = _number(rec.get("r_e", 0.05), ctx, "r_e", minimum=0.0)
                r_ct = _number(rec.get("r_ct", 0.02), ctx, "r_ct", minimum=0.0)
                if r_ct > r_e:
                    raise ValidationError(f"{ctx}: r_ct must not exceed r_e",
                                          record=ctx, field="r_ct")
                specs.append(MerSpec(kind=kind, size_index=j, cost=cost, e_mwh=e,
                                     s_mva=s, r_e=r_e, r_ct=r_ct, k1=k1, k2=k2))
            else:
                p = _number(_require(rec, "p_mw", ctx), ctx, "p_mw",
                            minimum=0.0, strict=True)
                specs.append(MerSpec(kind=kind, size_index=j, cost=cost, p_mw=p,
                                     k1=k1, k2=k2))
    return tuple(specs)


def load_catalog(path: str | Path) -> tuple[MerSpec, ...]:
    return parse_catalog(_read_json(path))


def catalog_to_dict(specs: tuple[MerSpec, ...]) -> dict:
    out: dict = {"mdg": [], "mess": [], "mpv": []}
    for sp in specs:
        if sp.kind == "MESS":
            out["mess"].append({"e_mwh": sp.e_mwh, "s_mva": sp.s_mva, "cost": sp.cost,
                                "r_e": sp.r_e, "r_ct": sp.r_ct, "k1": sp.k1, "k2": sp.k2})
        else:
            out["mdg" if sp.kind == "MDG" else "mpv"].append(
                {"p_mw": sp.p_mw, "cost": sp.cost, "k1": sp.k1, "k2": sp.k2})
    return out


def dump_json(obj: dict, path: str | Path) -> None:
    """Write JSON deterministically (sorted keys, fixed layout)."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def gen_travel_matrix(n: int, seed: int, max_periods: int = 3) -> np.ndarray:
    """Random symmetric travel-time matrix with zero diagonal.

    Off-diagonal entries are whole periods drawn uniformly from
    ``{1, ..., max_periods}`` using a seeded generator, so the result is
    reproducible for a given ``(n, seed, max_periods)``.
    """
    if n < 0:
        raise ValidationError("n must be nonnegative", record="gen_travel", field="n")
    if max_periods < 1:
        raise ValidationError("max_periods must be >= 1",
                              record="gen_travel", field="max_periods")
    rng = np.random.default_rng(seed)
    draw = rng.integers(1, max_periods + 1, size=(n, n))
    mat = np.triu(draw, k=1)
    mat = mat + mat.T
    np.fill_diagonal(mat, 0)
    return mat.astype(int)
