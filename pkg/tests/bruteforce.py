"""Independent fleet-sizing oracle used by the test suite.

Enumerates candidate fleets in ascending cost order and checks each with a
feasibility SOCP assembled directly on clarabel (its own variable layout and
matrix assembly, sharing nothing with the library's model builder).  The
first cost level containing a feasible fleet is optimal; all feasible fleets
at that level are returned so tests can also assert uniqueness.
"""

from __future__ import annotations

import math

import clarabel
import numpy as np
from scipy import sparse

SOLVED = {"Solved", "AlmostSolved"}


class _Rows:
    """Tiny assembler for clarabel's  A x + s = b,  s in K  form."""

    def __init__(self, n_vars: int):
        self.n = n_vars
        self.data: list[float] = []
        self.ri: list[int] = []
        self.ci: list[int] = []
        self.b: list[float] = []
        self.cones: list = []
        self._row = 0

    def _append(self, coeffs: dict[int, float], rhs: float) -> None:
        for c, v in coeffs.items():
            self.data.append(v)
            self.ri.append(self._row)
            self.ci.append(c)
        self.b.append(rhs)
        self._row += 1

    def eq(self, coeffs: dict[int, float], rhs: float) -> None:
        self._append(coeffs, rhs)
        self.cones.append(clarabel.ZeroConeT(1))

    def le(self, coeffs: dict[int, float], rhs: float) -> None:
        # coeffs . x <= rhs
        self._append(coeffs, rhs)
        self.cones.append(clarabel.NonnegativeConeT(1))

    def ge(self, coeffs: dict[int, float], rhs: float) -> None:
        self.le({c: -v for c, v in coeffs.items()}, -rhs)

    def soc(self, radius: float, parts: list[int]) -> None:
        # ||x[parts]|| <= radius
        self._append({}, radius)
        for idx in parts:
            self._append({idx: -1.0}, 0.0)
        self.cones.append(clarabel.SecondOrderConeT(1 + len(parts)))

    def feasible(self) -> bool:
        A = sparse.csc_matrix(
            (self.data, (self.ri, self.ci)), shape=(self._row, self.n))
        P = sparse.csc_matrix((self.n, self.n))
        q = np.zeros(self.n)
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        solver = clarabel.DefaultSolver(P, q, A, np.array(self.b), self.cones,
                                        settings)
        sol = solver.solve()
        status = str(sol.status)
        if status in SOLVED:
            return True
        if "Infeasible" in status:
            return False
        raise RuntimeError(f"oracle solve ended with status {status}")


def mix_feasible(forecast, catalog, counts: dict, mpv_profile) -> bool:
    """Can fleet ``counts`` (keyed (kind, size_index)) cover the shortage?"""
    T = forecast.horizon.n_periods
    dt = forecast.horizon.dt_hours
    by_key = {(sp.kind, sp.size_index): sp for sp in catalog}
    for key in counts:
        if key not in by_key:
            raise KeyError(f"unknown catalog entry {key}")

    def fleet_sum(kind: str, attr: str) -> float:
        return sum(getattr(by_key[k], attr) * n for k, n in counts.items()
                   if k[0] == kind and n > 0)

    mdg_p = fleet_sum("MDG", "p_mw")
    mes_e = fleet_sum("MESS", "e_mwh")
    mes_s = fleet_sum("MESS", "s_mva")
    mpv_p = fleet_sum("MPV", "p_mw")
    kset = {(by_key[k].k1, by_key[k].k2) for k, n in counts.items() if n > 0}
    if len(kset) > 1:
        raise ValueError("oracle assumes one reactive policy across the fleet")
    k1, k2 = kset.pop() if kset else (0.2, 0.6)

    dg_cap = sum(d.p_mw for d in forecast.ders if d.kind == "DG")
    dg_pol = {(d.k1, d.k2) for d in forecast.ders if d.kind == "DG"} or {(k1, k2)}
    dg_k1, dg_k2 = dg_pol.pop()
    es_e = sum(d.e_surplus_mwh for d in forecast.ders if d.kind == "ESS")
    es_s = sum(d.s_mva for d in forecast.ders if d.kind == "ESS")
    pv_out = [sum(d.p_series_mw[t] for d in forecast.ders if d.kind == "PV")
              for t in range(T)]
    pv_pol = {(d.k1, d.k2) for d in forecast.ders if d.kind == "PV"} or {(k1, k2)}
    pv_k1, pv_k2 = pv_pol.pop()
    mpv_out = [mpv_profile[t] * mpv_p for t in range(T)]

    # per-period variable block: 0 pMDG, 1 qMDG, 2 pMES, 3 qMES, 4 qMPV,
    # 5 pDG, 6 qDG, 7 pES, 8 qES, 9 qPV, 10 pL, 11 qL
    W = 12
    rows = _Rows(W * T)
    v = lambda t, j: W * t + j  # noqa: E731

    for t in range(T):
        for j in (0, 1, 2, 3, 4, 5, 6, 7, 8):
            rows.ge({v(t, j): 1.0}, 0.0)
        rows.le({v(t, 0): 1.0}, mdg_p)
        rows.le({v(t, 1): 1.0, v(t, 0): -k2}, 0.0)
        rows.ge({v(t, 1): 1.0, v(t, 0): -k1}, 0.0)
        rows.soc(mes_s, [v(t, 2), v(t, 3)])
        rows.le({v(t, 4): 1.0}, k2 * mpv_out[t])
        rows.ge({v(t, 4): 1.0}, k1 * mpv_out[t])
        rows.le({v(t, 5): 1.0}, dg_cap)
        rows.le({v(t, 6): 1.0, v(t, 5): -dg_k2}, 0.0)
        rows.ge({v(t, 6): 1.0, v(t, 5): -dg_k1}, 0.0)
        rows.soc(es_s, [v(t, 7), v(t, 8)])
        rows.le({v(t, 9): 1.0}, pv_k2 * pv_out[t])
        rows.ge({v(t, 9): 1.0}, pv_k1 * pv_out[t])
        rows.ge({v(t, 10): 1.0}, forecast.p_crit_mw[t])
        rows.le({v(t, 10): 1.0}, forecast.p_total_mw[t])
        rows.ge({v(t, 11): 1.0}, forecast.q_crit_mvar[t])
        rows.le({v(t, 11): 1.0}, forecast.q_total_mvar[t])
        rows.eq({v(t, 0): 1.0, v(t, 2): 1.0, v(t, 5): 1.0, v(t, 7): 1.0,
                 v(t, 10): -1.0}, -(mpv_out[t] + pv_out[t]))
        rows.eq({v(t, 1): 1.0, v(t, 3): 1.0, v(t, 4): 1.0, v(t, 6): 1.0,
                 v(t, 8): 1.0, v(t, 9): 1.0, v(t, 11): -1.0}, 0.0)
        rows.le({v(tau, 2): dt for tau in range(t + 1)}, mes_e)
        rows.le({v(tau, 7): dt for tau in range(t + 1)}, es_e)

    return rows.feasible()


def _count_vectors(costs: list[float], budget: float):
    """All count vectors with total cost <= budget, via bounded DFS."""
    out = []

    def rec(i: int, left: float, acc: list[int]):
        if i == len(costs):
            out.append(tuple(acc))
            return
        n_max = int(math.floor(left / costs[i] + 1e-9)) if costs[i] > 0 else 0
        for n in range(n_max + 1):
            rec(i + 1, left - n * costs[i], acc + [n])

    rec(0, budget, [])
    return out


def optimal_by_bruteforce(forecast, catalog, mpv_profile, cost_cap: float = 6000.0):
    """(optimal cost, all feasible fleets at that cost), by exhaustive search.

    Returns (None, []) when nothing within ``cost_cap`` is feasible.
    """
    entries = list(catalog)
    costs = [sp.cost for sp in entries]
    by_cost: dict[float, list[tuple[int, ...]]] = {}
    for vec in _count_vectors(costs, cost_cap):
        c = sum(n * costs[i] for i, n in enumerate(vec))
        by_cost.setdefault(round(c, 6), []).append(vec)
    for level in sorted(by_cost):
        winners = []
        for vec in by_cost[level]:
            counts = {(entries[i].kind, entries[i].size_index): n
                      for i, n in enumerate(vec) if n > 0}
            if mix_feasible(forecast, catalog, counts, mpv_profile):
                winners.append(counts)
        if winners:
            return level, winners
    return None, []
