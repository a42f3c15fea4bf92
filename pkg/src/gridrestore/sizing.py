"""Pre-event sizing of the mobile emergency resource fleet.

Given an area-wide shortage forecast and the predicted surviving resources,
choose the cheapest mix of mobile generators (MDG), mobile storage (MESS) and
mobile PV (MPV) from a catalog such that, in every period, served load can be
held between the critical and total shortage.  The model is a small
mixed-integer SOCP: integer unit counts, linear energy/capacity limits, and
one MVA cone per storage class and period (the MESS cone's radius is affine
in the counts).  All power quantities are in MW/MVAr/MWh here — no network
is modeled at this stage.

Storage is discharge-only over the window (no charging source is assumed to
exist), so state of charge appears as running-sum prefix bounds without loss
terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import Infeasible, ModelError, SolverFailure
from .netmodel import DerUnit, MerSpec, ShortageForecast, StudyHorizon
from .solver import BnBConfig, ClarabelBackend, ConicProgram, solve_michp

KINDS = ("MDG", "MESS", "MPV")


@dataclass(frozen=True)
class MerMixDecision:
    """Chosen fleet: counts per (kind, size_index), with catalog data attached."""

    units: tuple[tuple[MerSpec, int], ...]  # entries with count > 0 only
    total_cost: float
    mpv_profile: tuple[float, ...] | None = None

    @property
    def counts(self) -> dict[tuple[str, int], int]:
        return {(sp.kind, sp.size_index): n for sp, n in self.units}

    def fleet(self, kind: str) -> tuple[tuple[MerSpec, int], ...]:
        return tuple((sp, n) for sp, n in self.units if sp.kind == kind)


@dataclass
class SizingSolution:
    mix: MerMixDecision
    dispatch: dict[str, tuple[float, ...]]  # per-class series, MW / MVAr
    served_p_mw: tuple[float, ...]
    served_q_mvar: tuple[float, ...]
    status: str
    gap: float
    node_count: int
    params: dict


@dataclass
class SizingModel:
    """A built sizing program plus the variable index maps to read it back."""

    program: ConicProgram
    forecast: ShortageForecast
    catalog: tuple[MerSpec, ...]
    n_index: dict[tuple[str, int], int]
    series_index: dict[str, list[int]]  # class name -> per-period var indices
    pv_param: tuple[float, ...]  # fixed PV output series (MW)
    mpv_profile: tuple[float, ...]
    params: dict


def default_pv_profile(horizon: StudyHorizon, start_hour: float = 8.0,
                       sunrise: float = 6.0, sunset: float = 18.0,
                       peak: float = 1.0) -> tuple[float, ...]:
    """Per-period mean availability of a half-sine daylight profile.

    The profile is sin(pi * (h - sunrise)/(sunset - sunrise)) scaled by
    ``peak`` during daylight and zero otherwise, averaged over each period of
    the horizon; the horizon's first period starts at ``start_hour`` and the
    pattern repeats every 24 h.
    """
    length = sunset - sunrise
    if length <= 0:
        raise ModelError("sunset must be after sunrise")

    def integral(a: float, b: float) -> float:
        # integral of the daylight sine over clock-hour window [a, b], b-a<=24
        total = 0.0
        # split on 24h boundaries
        segments = []
        lo = a
        while lo < b - 1e-12:
            hi = min(b, math.floor(lo / 24.0) * 24.0 + 24.0)
            segments.append((lo % 24.0, (lo % 24.0) + (hi - lo)))
            lo = hi
        for s0, s1 in segments:
            lo_d = max(s0, sunrise)
            hi_d = min(s1, sunset)
            if hi_d > lo_d:
                total += (length / math.pi) * (
                    math.cos(math.pi * (lo_d - sunrise) / length)
                    - math.cos(math.pi * (hi_d - sunrise) / length))
        return total

    out = []
    for t in range(horizon.n_periods):
        a = start_hour + t * horizon.dt_hours
        b = a + horizon.dt_hours
        out.append(peak * integral(a, b) / horizon.dt_hours)
    return tuple(round(v, 6) for v in out)


def _uniform_policy(items, what: str) -> tuple[float, float]:
    policies = {(it.k1, it.k2) for it in items}
    if len(policies) > 1:
        raise ModelError(f"mixed reactive-power policies within {what}: {policies}")
    return next(iter(policies))


def _count_bound(cover_power: float, unit_power: float,
                 cover_energy: float = 0.0, unit_energy: float = 0.0) -> int:
    """Units of one size sufficient to cover the need alone, plus headroom."""
    need = 0.0
    if unit_power > 0:
        need = max(need, cover_power / unit_power)
    if unit_energy > 0:
        need = max(need, cover_energy / unit_energy)
    return int(math.ceil(need - 1e-9)) + 1


def build_sizing_model(forecast: ShortageForecast, catalog: tuple[MerSpec, ...],
                       horizon: StudyHorizon | None = None,
                       mpv_profile: tuple[float, ...] | None = None) -> SizingModel:
    """Assemble the fleet-sizing MISOCP.

    Args:
        forecast: shortage series and surviving resources.
        catalog: available MER sizes with costs.
        horizon: must match the forecast horizon when given.
        mpv_profile: per-period availability factor in [0, 1] for mobile PV;
            defaults to a documented half-sine daylight profile.

    Raises:
        ModelError: on horizon/profile length mismatch or mixed reactive
            policies within one resource class.
    """
    if horizon is None:
        horizon = forecast.horizon
    if horizon != forecast.horizon:
        raise ModelError("explicit horizon differs from the forecast horizon")
    T = horizon.n_periods
    dt = horizon.dt_hours
    if mpv_profile is None:
        mpv_profile = default_pv_profile(horizon)
    if len(mpv_profile) != T:
        raise ModelError(
            f"PV availability profile has length {len(mpv_profile)}, expected {T}")

    prog = ConicProgram()
    peak_p = max(forecast.p_crit_mw, default=0.0)
    peak_q = max(forecast.q_crit_mvar, default=0.0)
    e_crit = sum(forecast.p_crit_mw) * dt

    # fleet count variables
    n_index: dict[tuple[str, int], int] = {}
    for sp in catalog:
        if sp.kind == "MDG":
            cover = max(peak_p, peak_q / sp.k2 if sp.k2 > 0 else peak_p)
            ub = _count_bound(cover, sp.p_mw)
        elif sp.kind == "MESS":
            ub = _count_bound(max(peak_p, peak_q), sp.s_mva, e_crit, sp.e_mwh)
        else:  # MPV
            amax = max(mpv_profile)
            cover = max(peak_p, peak_q / sp.k2 if sp.k2 > 0 else peak_p)
            ub = _count_bound(cover, amax * sp.p_mw) if amax * sp.p_mw > 0 else 0
        idx = prog.add_var(f"N[{sp.kind},{sp.size_index}]", 0, ub, "integer")
        n_index[(sp.kind, sp.size_index)] = idx
        prog.set_objective_coeff(idx, sp.cost)

    mdg_specs = [sp for sp in catalog if sp.kind == "MDG"]
    mess_specs = [sp for sp in catalog if sp.kind == "MESS"]
    mpv_specs = [sp for sp in catalog if sp.kind == "MPV"]
    dg_units = [d for d in forecast.ders if d.kind == "DG"]
    es_units = [d for d in forecast.ders if d.kind == "ESS"]
    pv_units = [d for d in forecast.ders if d.kind == "PV"]

    pv_param = tuple(sum(u.p_series_mw[t] for u in pv_units) for t in range(T))

    series: dict[str, list[int]] = {}

    def add_series(name: str, lb=0.0, ub=math.inf) -> list[int]:
        idxs = [prog.add_var(f"{name}[{t}]", lb, ub) for t in range(T)]
        series[name] = idxs
        return idxs

    i_pl = [prog.add_var(f"pL[{t}]", forecast.p_crit_mw[t], forecast.p_total_mw[t])
            for t in range(T)]
    i_ql = [prog.add_var(f"qL[{t}]", forecast.q_crit_mvar[t], forecast.q_total_mvar[t])
            for t in range(T)]
    series["pL"] = i_pl
    series["qL"] = i_ql

    p_bal: list[dict[int, float]] = [{i_pl[t]: -1.0} for t in range(T)]
    q_bal: list[dict[int, float]] = [{i_ql[t]: -1.0} for t in range(T)]

    def policy_rows(name: str, k1: float, k2: float, p_idx: list[int],
                    q_idx: list[int]) -> None:
        for t in range(T):
            prog.add_linear({q_idx[t]: 1.0, p_idx[t]: -k2}, "<=", 0.0,
                            name=f"{name}_qmax[{t}]")
            prog.add_linear({q_idx[t]: -1.0, p_idx[t]: k1}, "<=", 0.0,
                            name=f"{name}_qmin[{t}]")

    if mdg_specs:
        k1, k2 = _uniform_policy(mdg_specs, "MDG catalog entries")
        ip = add_series("pMDG")
        iq = add_series("qMDG")
        for t in range(T):
            cap = {ip[t]: 1.0}
            for sp in mdg_specs:
                cap[n_index[("MDG", sp.size_index)]] = -sp.p_mw
            prog.add_linear(cap, "<=", 0.0, name=f"mdg_cap[{t}]")
            p_bal[t][ip[t]] = 1.0
            q_bal[t][iq[t]] = 1.0
        policy_rows("mdg", k1, k2, ip, iq)

    if mess_specs:
        ip = add_series("pMES")
        iq = add_series("qMES")
        for t in range(T):
            p_bal[t][ip[t]] = 1.0
            q_bal[t][iq[t]] = 1.0
            # MVA cone with count-affine radius
            radius = {n_index[("MESS", sp.size_index)]: sp.s_mva for sp in mess_specs}
            prog.add_soc([({ip[t]: 1.0}, 0.0), ({iq[t]: 1.0}, 0.0)], radius, 0.0,
                         name=f"mess_mva[{t}]")
        for t in range(T):
            # prefix of discharged energy never exceeds carried energy
            row = {ip[tau]: dt for tau in range(t + 1)}
            for sp in mess_specs:
                row[n_index[("MESS", sp.size_index)]] = -sp.e_mwh
            prog.add_linear(row, "<=", 0.0, name=f"mess_soc[{t}]")

    if mpv_specs:
        k1, k2 = _uniform_policy(mpv_specs, "MPV catalog entries")
        iq = add_series("qMPV")
        for t in range(T):
            # active output is availability * fleet nameplate (non-dispatchable)
            for sp in mpv_specs:
                idx = n_index[("MPV", sp.size_index)]
                p_bal[t][idx] = p_bal[t].get(idx, 0.0) + mpv_profile[t] * sp.p_mw
            q_bal[t][iq[t]] = 1.0
            qmax = {iq[t]: 1.0}
            qmin = {iq[t]: -1.0}
            for sp in mpv_specs:
                idx = n_index[("MPV", sp.size_index)]
                qmax[idx] = qmax.get(idx, 0.0) - k2 * mpv_profile[t] * sp.p_mw
                qmin[idx] = qmin.get(idx, 0.0) + k1 * mpv_profile[t] * sp.p_mw
            prog.add_linear(qmax, "<=", 0.0, name=f"mpv_qmax[{t}]")
            prog.add_linear(qmin, "<=", 0.0, name=f"mpv_qmin[{t}]")

    if dg_units:
        k1, k2 = _uniform_policy(dg_units, "DG units")
        cap = sum(u.p_mw for u in dg_units)
        ip = add_series("pDG", 0.0, cap)
        iq = add_series("qDG")
        for t in range(T):
            p_bal[t][ip[t]] = 1.0
            q_bal[t][iq[t]] = 1.0
        policy_rows("dg", k1, k2, ip, iq)

    if es_units:
        surplus = sum(u.e_surplus_mwh for u in es_units)
        s_cap = sum(u.s_mva for u in es_units)
        ip = add_series("pES")
        iq = add_series("qES")
        for t in range(T):
            p_bal[t][ip[t]] = 1.0
            q_bal[t][iq[t]] = 1.0
            prog.add_soc([({ip[t]: 1.0}, 0.0), ({iq[t]: 1.0}, 0.0)], {}, s_cap,
                         name=f"ess_mva[{t}]")
            prog.add_linear({ip[tau]: dt for tau in range(t + 1)}, "<=", surplus,
                            name=f"ess_soc[{t}]")

    if pv_units:
        k1, k2 = _uniform_policy(pv_units, "PV units")
        iq = [prog.add_var(f"qPV[{t}]", k1 * pv_param[t], k2 * pv_param[t])
              for t in range(T)]
        series["qPV"] = iq
        for t in range(T):
            q_bal[t][iq[t]] = 1.0

    for t in range(T):
        rhs_p = -pv_param[t]  # fixed PV output moves to the right-hand side
        prog.add_linear(p_bal[t], "==", rhs_p, name=f"balance_p[{t}]")
        prog.add_linear(q_bal[t], "==", 0.0, name=f"balance_q[{t}]")

    params = {
        "mpv_profile": list(mpv_profile),
        "n_periods": T,
        "dt_hours": dt,
    }
    return SizingModel(program=prog, forecast=forecast, catalog=tuple(catalog),
                       n_index=n_index, series_index=series, pv_param=pv_param,
                       mpv_profile=tuple(mpv_profile), params=params)


def solve_sizing(model: SizingModel, config: BnBConfig | None = None,
                 backend: ClarabelBackend | None = None) -> SizingSolution:
    """Solve the sizing program to the configured gap (default 1e-4).

    Raises:
        Infeasible: the shortage cannot be covered by any affordable fleet
            within the catalog bounds (e.g. empty catalog with positive
            critical shortage).
        SolverFailure: search hit a limit without an incumbent.
    """
    cfg = config or BnBConfig(gap=1e-4)
    priorities = {idx: 3 for idx in model.n_index.values()}
    result = solve_michp(model.program, cfg, backend, branch_priority=priorities)
    if result.status == "infeasible":
        raise Infeasible("forecast shortage cannot be met with the given "
                         "catalog and surviving resources")
    if result.x is None:
        raise SolverFailure(f"sizing search stopped ({result.status}) "
                            "without a feasible mix")
    x = result.x

    units = []
    total_cost = 0.0
    for sp in model.catalog:
        n = int(round(x[model.n_index[(sp.kind, sp.size_index)]]))
        if n > 0:
            units.append((sp, n))
            total_cost += n * sp.cost
    mix = MerMixDecision(units=tuple(units), total_cost=total_cost,
                         mpv_profile=model.mpv_profile)

    T = model.forecast.horizon.n_periods
    dispatch: dict[str, tuple[float, ...]] = {}
    for name, idxs in model.series_index.items():
        if name in ("pL", "qL"):
            continue
        dispatch[name] = tuple(float(x[i]) for i in idxs)
    # reconstruct the non-dispatchable outputs for reporting
    mpv_counts = {sp.size_index: int(round(x[model.n_index[("MPV", sp.size_index)]]))
                  for sp in model.catalog if sp.kind == "MPV"}
    if mpv_counts:
        dispatch["pMPV"] = tuple(
            model.mpv_profile[t] * sum(sp.p_mw * mpv_counts[sp.size_index]
                                       for sp in model.catalog if sp.kind == "MPV")
            for t in range(T))
    if any(model.pv_param):
        dispatch["pPV"] = model.pv_param

    served_p = tuple(float(x[i]) for i in model.series_index["pL"])
    served_q = tuple(float(x[i]) for i in model.series_index["qL"])
    return SizingSolution(mix=mix, dispatch=dispatch, served_p_mw=served_p,
                          served_q_mvar=served_q, status=result.status,
                          gap=result.gap, node_count=result.node_count,
                          params=dict(model.params))


# ---------------------------------------------------------------------------
# mix (de)serialization — self-contained for the restoration stage


def _spec_to_dict(sp: MerSpec) -> dict:
    rec = {"kind": sp.kind, "size_index": sp.size_index, "cost": sp.cost,
           "k1": sp.k1, "k2": sp.k2}
    if sp.kind == "MESS":
        rec.update(e_mwh=sp.e_mwh, s_mva=sp.s_mva, r_e=sp.r_e, r_ct=sp.r_ct)
    else:
        rec.update(p_mw=sp.p_mw)
    return rec


def _spec_from_dict(rec: dict) -> MerSpec:
    kind = rec["kind"]
    if kind == "MESS":
        return MerSpec(kind=kind, size_index=int(rec["size_index"]),
                       cost=float(rec["cost"]), e_mwh=float(rec["e_mwh"]),
                       s_mva=float(rec["s_mva"]),
                       r_e=float(rec.get("r_e", 0.05)),
                       r_ct=float(rec.get("r_ct", 0.02)),
                       k1=float(rec.get("k1", 0.2)), k2=float(rec.get("k2", 0.6)))
    return MerSpec(kind=kind, size_index=int(rec["size_index"]),
                   cost=float(rec["cost"]), p_mw=float(rec["p_mw"]),
                   k1=float(rec.get("k1", 0.2)), k2=float(rec.get("k2", 0.6)))


def mix_to_dict(mix: MerMixDecision) -> dict:
    out = {
        "units": [dict(_spec_to_dict(sp), count=n) for sp, n in mix.units],
        "total_cost": mix.total_cost,
    }
    if mix.mpv_profile is not None:
        out["mpv_profile"] = list(mix.mpv_profile)
    return out


def parse_mix(data: dict) -> MerMixDecision:
    units = []
    for rec in data.get("units", []):
        n = int(rec["count"])
        if n < 0:
            raise ModelError("mix counts must be nonnegative")
        if n > 0:
            units.append((_spec_from_dict(rec), n))
    profile = data.get("mpv_profile")
    return MerMixDecision(units=tuple(units),
                          total_cost=float(data.get("total_cost",
                                                    sum(sp.cost * n
                                                        for sp, n in units))),
                          mpv_profile=tuple(profile) if profile else None)
