"""Intermediate representation for mixed-integer second-order-cone programs.

A program is

    minimize    c'x + c0
    subject to  lo_i <= x_i <= up_i
                a'x  (<=, ==, >=)  rhs          (linear rows)
                || F x + g ||_2 <= h'x + k      (second-order cones)
                x_i integer for declared variables

The IR is deliberately plain: dict-of-index sparse rows, no expression trees.
Model builders construct it directly; the backend compiles it once and then
re-solves with updated variable bounds during branch and bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"

_SENSES = ("<=", ">=", "==")


@dataclass
class VarDef:
    name: str
    lb: float
    ub: float
    kind: str = CONTINUOUS


@dataclass
class LinearRow:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    name: str = ""


@dataclass
class SocRow:
    """|| [coeffs_j . x + const_j]_j ||_2 <= rhs_coeffs . x + rhs_const."""

    rows: list[tuple[dict[int, float], float]]
    rhs_coeffs: dict[int, float]
    rhs_const: float
    name: str = ""


@dataclass
class ConicProgram:
    variables: list[VarDef] = field(default_factory=list)
    linear: list[LinearRow] = field(default_factory=list)
    soc: list[SocRow] = field(default_factory=list)
    obj_coeffs: dict[int, float] = field(default_factory=dict)
    obj_const: float = 0.0
    _by_name: dict[str, int] = field(default_factory=dict)

    # -- construction -------------------------------------------------------

    def add_var(self, name: str, lb: float = -math.inf, ub: float = math.inf,
                kind: str = CONTINUOUS) -> int:
        if name in self._by_name:
            raise ValueError(f"duplicate variable name '{name}'")
        if kind not in (CONTINUOUS, BINARY, INTEGER):
            raise ValueError(f"unknown variable kind '{kind}'")
        if kind == BINARY:
            lb = max(lb, 0.0)
            ub = min(ub, 1.0)
        if lb > ub:
            raise ValueError(f"variable '{name}': empty bound interval [{lb}, {ub}]")
        idx = len(self.variables)
        self.variables.append(VarDef(name=name, lb=float(lb), ub=float(ub), kind=kind))
        self._by_name[name] = idx
        return idx

    def index(self, name: str) -> int:
        return self._by_name[name]

    def has_var(self, name: str) -> bool:
        return name in self._by_name

    def add_linear(self, coeffs: dict[int, float], sense: str, rhs: float,
                   name: str = "") -> None:
        if sense not in _SENSES:
            raise ValueError(f"unknown sense '{sense}'")
        clean = {i: float(c) for i, c in coeffs.items() if c != 0.0}
        self.linear.append(LinearRow(coeffs=clean, sense=sense, rhs=float(rhs), name=name))

    def add_soc(self, rows: list[tuple[dict[int, float], float]],
                rhs_coeffs: dict[int, float], rhs_const: float = 0.0,
                name: str = "") -> None:
        clean_rows = [({i: float(c) for i, c in r.items() if c != 0.0}, float(g))
                      for r, g in rows]
        self.soc.append(SocRow(rows=clean_rows,
                               rhs_coeffs={i: float(c) for i, c in rhs_coeffs.items()
                                           if c != 0.0},
                               rhs_const=float(rhs_const), name=name))

    def fix_var(self, idx: int, value: float) -> None:
        v = self.variables[idx]
        if value < v.lb - 1e-12 or value > v.ub + 1e-12:
            raise ValueError(
                f"variable '{v.name}': fixing to {value} outside [{v.lb}, {v.ub}]")
        v.lb = v.ub = float(value)

    def set_objective_coeff(self, idx: int, coeff: float) -> None:
        if coeff == 0.0:
            self.obj_coeffs.pop(idx, None)
        else:
            self.obj_coeffs[idx] = float(coeff)

    def add_objective_coeff(self, idx: int, coeff: float) -> None:
        self.set_objective_coeff(idx, self.obj_coeffs.get(idx, 0.0) + coeff)

    # -- queries ------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def integer_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.kind != CONTINUOUS]

    def count_kind(self, kind: str) -> int:
        return sum(1 for v in self.variables if v.kind == kind)

    def objective_value(self, x: np.ndarray) -> float:
        return sum(c * x[i] for i, c in self.obj_coeffs.items()) + self.obj_const

    def check_point(self, x: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Return human-readable descriptions of all constraint violations."""
        out: list[str] = []
        for i, v in enumerate(self.variables):
            if x[i] < v.lb - tol:
                out.append(f"{v.name}: below lower bound by {v.lb - x[i]:.3e}")
            if x[i] > v.ub + tol:
                out.append(f"{v.name}: above upper bound by {x[i] - v.ub:.3e}")
            if v.kind != CONTINUOUS and abs(x[i] - round(x[i])) > tol:
                out.append(f"{v.name}: fractional value {x[i]!r}")
        for row in self.linear:
            val = sum(c * x[i] for i, c in row.coeffs.items())
            if row.sense == "<=" and val > row.rhs + tol:
                out.append(f"linear '{row.name}': {val:.6g} > {row.rhs:.6g}")
            elif row.sense == ">=" and val < row.rhs - tol:
                out.append(f"linear '{row.name}': {val:.6g} < {row.rhs:.6g}")
            elif row.sense == "==" and abs(val - row.rhs) > tol:
                out.append(f"linear '{row.name}': {val:.6g} != {row.rhs:.6g}")
        for cone in self.soc:
            lhs = math.sqrt(sum(
                (sum(c * x[i] for i, c in r.items()) + g) ** 2 for r, g in cone.rows))
            rhs = sum(c * x[i] for i, c in cone.rhs_coeffs.items()) + cone.rhs_const
            if lhs > rhs + tol:
                out.append(f"soc '{cone.name}': {lhs:.6g} > {rhs:.6g}")
        return out

    def is_feasible(self, x: np.ndarray, tol: float = 1e-6) -> bool:
        return not self.check_point(x, tol)

    # -- serialization (debug replay) ---------------------------------------

    def to_dict(self) -> dict:
        def num(v: float):
            if v == math.inf:
                return "inf"
            if v == -math.inf:
                return "-inf"
            return v

        return {
            "variables": [{"name": v.name, "lb": num(v.lb), "ub": num(v.ub),
                           "kind": v.kind} for v in self.variables],
            "linear": [{"coeffs": {str(i): c for i, c in r.coeffs.items()},
                        "sense": r.sense, "rhs": r.rhs, "name": r.name}
                       for r in self.linear],
            "soc": [{"rows": [[{str(i): c for i, c in rr.items()}, g]
                              for rr, g in s.rows],
                     "rhs_coeffs": {str(i): c for i, c in s.rhs_coeffs.items()},
                     "rhs_const": s.rhs_const, "name": s.name}
                    for s in self.soc],
            "objective": {"coeffs": {str(i): c for i, c in self.obj_coeffs.items()},
                          "const": self.obj_const},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConicProgram":
        def num(v) -> float:
            if v == "inf":
                return math.inf
            if v == "-inf":
                return -math.inf
            return float(v)

        prog = cls()
        for rec in data["variables"]:
            prog.add_var(rec["name"], num(rec["lb"]), num(rec["ub"]), rec["kind"])
        for rec in data["linear"]:
            prog.add_linear({int(i): c for i, c in rec["coeffs"].items()},
                            rec["sense"], rec["rhs"], rec.get("name", ""))
        for rec in data["soc"]:
            prog.add_soc([({int(i): c for i, c in rr.items()}, g)
                          for rr, g in rec["rows"]],
                         {int(i): c for i, c in rec["rhs_coeffs"].items()},
                         rec["rhs_const"], rec.get("name", ""))
        for i, c in data["objective"]["coeffs"].items():
            prog.set_objective_coeff(int(i), c)
        prog.obj_const = float(data["objective"]["const"])
        return prog

    def to_json(self, bounds: dict[int, tuple[float, float]] | None = None) -> str:
        payload = self.to_dict()
        if bounds:
            payload["node_bounds"] = {
                str(i): [lo if math.isfinite(lo) else "-inf",
                         hi if math.isfinite(hi) else "inf"]
                for i, (lo, hi) in bounds.items()}
        return json.dumps(payload, sort_keys=True)
