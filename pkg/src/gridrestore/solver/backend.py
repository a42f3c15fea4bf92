"""Continuous conic backend built on the Clarabel interior-point solver.

The adapter compiles a :class:`~gridrestore.solver.program.ConicProgram` into
Clarabel's ``Ax + s = b, s in K`` form once, keeping the sparse structure
cached.  Branch-and-bound nodes only tighten variable bounds, which live in a
dedicated block of inequality rows, so each node solve reuses the cached
matrix and rewrites a handful of entries of ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

import clarabel

from ..errors import NumericalFailure
from .program import CONTINUOUS, ConicProgram

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class ContinuousSolution:
    status: str
    x: np.ndarray | None
    objective: float | None
    iterations: int = 0


class _Prepared:
    """Cached Clarabel-form data for one program."""

    def __init__(self, program: ConicProgram):
        self.signature = _signature(program)
        n = program.n_vars
        rows: list[dict[int, float]] = []
        consts: list[float] = []
        cones: list = []

        eq_rows = [r for r in program.linear if r.sense == "=="]
        ineq_rows = [r for r in program.linear if r.sense != "=="]

        for r in eq_rows:
            rows.append(r.coeffs)
            consts.append(r.rhs)
        if eq_rows:
            cones.append(clarabel.ZeroConeT(len(eq_rows)))

        n_ineq = 0
        for r in ineq_rows:
            if r.sense == "<=":
                rows.append(r.coeffs)
                consts.append(r.rhs)
            else:
                rows.append({i: -c for i, c in r.coeffs.items()})
                consts.append(-r.rhs)
            n_ineq += 1

        # Bound rows: x_i <= ub  and  -x_i <= -lb.  Integer variables always
        # get both rows (branching needs them even when the root bound is
        # infinite is impossible here: integers are required to be bounded).
        self.ub_row = np.full(n, -1, dtype=int)
        self.lb_row = np.full(n, -1, dtype=int)
        for i, v in enumerate(program.variables):
            want = v.kind != CONTINUOUS
            if want and not (math.isfinite(v.lb) and math.isfinite(v.ub)):
                raise ValueError(f"integer variable '{v.name}' must have finite bounds")
            if math.isfinite(v.ub) or want:
                self.ub_row[i] = len(rows)
                rows.append({i: 1.0})
                consts.append(v.ub)
                n_ineq += 1
            if math.isfinite(v.lb) or want:
                self.lb_row[i] = len(rows)
                rows.append({i: -1.0})
                consts.append(-v.lb)
                n_ineq += 1
        if n_ineq:
            cones.append(clarabel.NonnegativeConeT(n_ineq))

        for cone in program.soc:
            # s_0 = rhs - lhs_0 with the epigraph row first, then the norm rows.
            rows.append({i: -c for i, c in cone.rhs_coeffs.items()})
            consts.append(cone.rhs_const)
            for r, g in cone.rows:
                rows.append({i: -c for i, c in r.items()})
                consts.append(g)
            cones.append(clarabel.SecondOrderConeT(len(cone.rows) + 1))

        m = len(rows)
        data, ri, ci = [], [], []
        for k, row in enumerate(rows):
            for i, c in row.items():
                ri.append(k)
                ci.append(i)
                data.append(c)
        self.A = sparse.csc_matrix((data, (ri, ci)), shape=(m, n))
        self.b0 = np.array(consts, dtype=float)
        self.P = sparse.csc_matrix((n, n))
        self.q = np.zeros(n)
        for i, c in program.obj_coeffs.items():
            self.q[i] = c
        self.cones = cones
        self.obj_const = program.obj_const
        self.base_lb = np.array([v.lb for v in program.variables])
        self.base_ub = np.array([v.ub for v in program.variables])


def _make_settings(**overrides) -> "clarabel.DefaultSettings":
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    # Keep the deterministic single-threaded code path.
    for key, val in overrides.items():
        setattr(settings, key, val)
    return settings


# Settings retried in order when the interior-point method stalls.  Fixing a
# variable through its paired bound rows (lb == ub) removes the strict
# interior, which the default light regularization sometimes cannot cope
# with; heavier static regularization, then disabling equilibration, then
# slightly relaxed termination targets rescue nearly all such solves.  Each
# entry is applied on top of the backend's configured overrides.
_RESCUE_LADDER: tuple[dict, ...] = (
    {"static_regularization_constant": 1e-6, "max_iter": 400},
    {"static_regularization_constant": 1e-6, "max_iter": 400,
     "equilibrate_enable": False},
    {"static_regularization_constant": 1e-5, "max_iter": 600,
     "tol_gap_abs": 1e-7, "tol_gap_rel": 1e-7, "tol_feas": 1e-7,
     "tol_ktratio": 1e-5},
)


def _signature(program: ConicProgram) -> tuple[int, int, int, int]:
    return (program.n_vars, len(program.linear), len(program.soc),
            len(program.obj_coeffs))


class ClarabelBackend:
    """Compiles programs for Clarabel and solves them, caching structure.

    The compiled form is stored on the program object itself, so it is
    recomputed automatically if the program is rebuilt (and shared between
    backend instances, which is safe because compilation does not depend on
    solver settings).
    """

    def __init__(self, **settings_overrides):
        self._settings_overrides = settings_overrides

    def prepare(self, program: ConicProgram) -> _Prepared:
        prep = getattr(program, "_prepared", None)
        if prep is None or prep.signature != _signature(program):
            prep = _Prepared(program)
            program._prepared = prep
        return prep

    def invalidate(self, program: ConicProgram) -> None:
        if hasattr(program, "_prepared"):
            del program._prepared

    def solve(self, program: ConicProgram,
              lb_override: dict[int, float] | None = None,
              ub_override: dict[int, float] | None = None) -> ContinuousSolution:
        """Solve the continuous relaxation with optionally tightened bounds."""
        prep = self.prepare(program)
        b = prep.b0.copy()
        if ub_override:
            for i, v in ub_override.items():
                row = prep.ub_row[i]
                if row < 0:
                    raise ValueError(
                        f"variable {i} has no upper-bound row to override")
                b[row] = v
        if lb_override:
            for i, v in lb_override.items():
                row = prep.lb_row[i]
                if row < 0:
                    raise ValueError(
                        f"variable {i} has no lower-bound row to override")
                b[row] = -v
        # Empty bound box: infeasible without calling the solver.
        if lb_override or ub_override:
            for i in set(lb_override or ()) | set(ub_override or ()):
                lo = (lb_override or {}).get(i, prep.base_lb[i])
                hi = (ub_override or {}).get(i, prep.base_ub[i])
                if lo > hi + 1e-12:
                    return ContinuousSolution(status=INFEASIBLE, x=None, objective=None)

        status = ""
        for rescue in (None, *_RESCUE_LADDER):
            overrides = dict(self._settings_overrides)
            if rescue:
                overrides.update(rescue)
            settings = _make_settings(**overrides)
            solver = clarabel.DefaultSolver(prep.P, prep.q, prep.A, b,
                                            prep.cones, settings)
            sol = solver.solve()
            status = str(sol.status)
            if status in ("Solved", "AlmostSolved"):
                x = np.asarray(sol.x, dtype=float)
                return ContinuousSolution(status=OPTIMAL, x=x,
                                          objective=float(sol.obj_val) + prep.obj_const,
                                          iterations=int(sol.iterations))
            if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
                return ContinuousSolution(status=INFEASIBLE, x=None, objective=None)
            if status in ("DualInfeasible", "AlmostDualInfeasible"):
                return ContinuousSolution(status=UNBOUNDED, x=None, objective=None)
        bounds = {}
        for i in range(program.n_vars):
            lo = (lb_override or {}).get(i, prep.base_lb[i])
            hi = (ub_override or {}).get(i, prep.base_ub[i])
            if (lo, hi) != (prep.base_lb[i], prep.base_ub[i]):
                bounds[i] = (lo, hi)
        raise NumericalFailure(
            f"continuous backend returned status '{status}' after "
            f"{1 + len(_RESCUE_LADDER)} attempts",
            node_dump=program.to_json(bounds=bounds))


_DEFAULT_BACKEND: ClarabelBackend | None = None


def solve_continuous(program: ConicProgram,
                     lb_override: dict[int, float] | None = None,
                     ub_override: dict[int, float] | None = None) -> ContinuousSolution:
    """Solve a continuous conic program with the default backend."""
    global _DEFAULT_BACKEND
    if _DEFAULT_BACKEND is None:
        _DEFAULT_BACKEND = ClarabelBackend()
    return _DEFAULT_BACKEND.solve(program, lb_override, ub_override)
