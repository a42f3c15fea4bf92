"""Branch-and-bound search for mixed-integer second-order-cone programs.

Design contract:

* best-bound node selection with a LIFO tie-break (later nodes first among
  equal bounds), implemented as a heap keyed by ``(bound, -counter)``;
* branching on the lowest caller-supplied priority rank among fractional
  variables, then the most fractional within that rank (fractionalities
  within 1e-3 tie-break by lowest variable index); without priorities this
  is plain most-fractional branching;
* incumbents always come from a re-solve with every integer fixed, so the
  returned point satisfies all constraints to solver accuracy;
* relative gap ``(incumbent - bound) / max(1, |incumbent|)``;
* fully deterministic for a fixed program + config: no wall-clock values feed
  any decision except the optional time limit.

With ``threads > 1`` open nodes are evaluated in parallel batches.  The final
objective is unchanged but the node count may differ from a serial run; the
serial path is the reference behaviour.
"""

from __future__ import annotations

import heapq
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..errors import NumericalFailure, Unbounded
from .backend import ClarabelBackend, INFEASIBLE, OPTIMAL, UNBOUNDED
from .program import ConicProgram

_TIE_TOL = 1e-3


@dataclass
class BnBConfig:
    gap: float = 1e-3
    int_tol: float = 1e-6
    node_limit: int = 500_000
    time_limit: float | None = None
    threads: int = 1
    log_interval: int = 0  # nodes between progress lines; 0 silences


@dataclass
class MipSolution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "node_limit" | "time_limit"
    x: np.ndarray | None
    objective: float | None
    bound: float
    gap: float
    node_count: int
    wall_time: float = 0.0
    incumbent_count: int = 0


@dataclass(order=True)
class _Node:
    key: tuple[float, int]
    lb: dict[int, float] = field(compare=False)
    ub: dict[int, float] = field(compare=False)


def _relative_gap(incumbent: float, bound: float) -> float:
    if incumbent == math.inf:
        return math.inf
    return (incumbent - bound) / max(1.0, abs(incumbent))


def solve_michp(program: ConicProgram,
                config: BnBConfig | None = None,
                backend: ClarabelBackend | None = None,
                *,
                branch_priority: dict[int, int] | None = None,
                repair: Callable[[np.ndarray], dict[int, int] | None] | None = None,
                initial_points: Iterable[dict[int, int]] | None = None) -> MipSolution:
    """Minimize a mixed-integer conic program by branch and bound.

    Args:
        program: the program to solve; integer variables must have finite
            bounds.
        config: search parameters.
        backend: continuous solver adapter (a fresh Clarabel adapter by
            default).
        branch_priority: optional map index -> rank used to break branching
            ties (lower rank branches first).
        repair: optional heuristic.  Given a fractional relaxation point it
            may propose a full integer assignment to probe as an incumbent.
        initial_points: integer assignments probed before the search starts.

    Returns:
        MipSolution.  ``status`` is "optimal" when the gap criterion holds
        (this includes proving infeasibility exhausted the tree with an
        incumbent in hand).
    """
    cfg = config or BnBConfig()
    be = backend or ClarabelBackend()
    t_start = time.monotonic()

    int_idx = program.integer_indices()
    priorities = branch_priority or {}

    incumbent_x: np.ndarray | None = None
    incumbent_obj = math.inf
    incumbent_count = 0
    node_count = 0
    tried_fixings: set[tuple[tuple[int, int], ...]] = set()

    def out_of_time() -> bool:
        if cfg.time_limit is None:
            return False
        return time.monotonic() - t_start > cfg.time_limit

    def probe_fixing(assign: dict[int, int]) -> tuple[float, np.ndarray] | None:
        """Solve with all integers fixed; return (objective, x) if feasible.

        Probes only hunt for incumbents, so a numerically stalled probe is
        simply discarded — correctness never depends on any probe succeeding.
        """
        key = tuple(sorted((i, int(v)) for i, v in assign.items()))
        if key in tried_fixings:
            return None
        tried_fixings.add(key)
        fixed = {i: float(v) for i, v in assign.items()}
        try:
            sol = be.solve(program, lb_override=fixed, ub_override=fixed)
        except NumericalFailure:
            return None
        if sol.status != OPTIMAL:
            return None
        return sol.objective, sol.x

    def register_incumbent(obj: float, x: np.ndarray) -> None:
        nonlocal incumbent_obj, incumbent_x, incumbent_count
        if obj < incumbent_obj - 1e-12:
            incumbent_obj = obj
            incumbent_x = x
            incumbent_count += 1

    # No integers: a single continuous solve.
    if not int_idx:
        sol = be.solve(program)
        wall = time.monotonic() - t_start
        if sol.status == INFEASIBLE:
            return MipSolution("infeasible", None, None, math.inf, math.inf, 1, wall)
        if sol.status == UNBOUNDED:
            return MipSolution("unbounded", None, None, -math.inf, math.inf, 1, wall)
        return MipSolution("optimal", sol.x, sol.objective, sol.objective, 0.0, 1,
                           wall, 1)

    for point in initial_points or ():
        res = probe_fixing(point)
        if res is not None:
            register_incumbent(*res)

    counter = 0
    heap: list[_Node] = [_Node(key=(-math.inf, 0), lb={}, ub={})]
    status = "optimal"
    best_bound = -math.inf
    next_log = cfg.log_interval

    def snap_assignment(x: np.ndarray) -> dict[int, int]:
        return {i: int(math.floor(x[i] + 0.5)) for i in int_idx}

    def select_branch_var(x: np.ndarray) -> int | None:
        fracs = []
        for i in int_idx:
            f = abs(x[i] - math.floor(x[i] + 0.5))
            if f > cfg.int_tol:
                fracs.append((i, f))
        if not fracs:
            return None
        best_rank = min(priorities.get(i, 0) for i, _ in fracs)
        ranked = [(i, f) for i, f in fracs if priorities.get(i, 0) == best_rank]
        f_max = max(f for _, f in ranked)
        return min(i for i, f in ranked if f >= f_max - _TIE_TOL)

    def process(node: _Node, sol) -> None:
        """Handle one solved relaxation: prune, bound, branch, repair."""
        nonlocal counter
        if sol.status == INFEASIBLE:
            return
        if sol.status == UNBOUNDED:
            raise Unbounded("relaxation unbounded below; add bounds to the model")
        bound = sol.objective
        if bound >= incumbent_obj - 1e-9:
            return
        x = sol.x
        branch_var = select_branch_var(x)
        if branch_var is None:
            res = probe_fixing(snap_assignment(x))
            if res is not None:
                register_incumbent(*res)
            return
        if repair is not None:
            proposal = repair(x)
            if proposal is not None:
                res = probe_fixing(proposal)
                if res is not None:
                    register_incumbent(*res)
        lo = math.floor(x[branch_var])
        for child_lb, child_ub in (({}, {branch_var: float(lo)}),
                                   ({branch_var: float(lo + 1)}, {})):
            lb = dict(node.lb)
            ub = dict(node.ub)
            lb.update(child_lb)
            ub.update(child_ub)
            counter += 1
            heapq.heappush(heap, _Node(key=(bound, -counter), lb=lb, ub=ub))

    pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        while heap:
            if node_count >= cfg.node_limit:
                status = "node_limit"
                break
            if out_of_time():
                status = "time_limit"
                break
            best_bound = heap[0].key[0]
            if _relative_gap(incumbent_obj, best_bound) <= cfg.gap:
                status = "optimal"
                break

            batch: list[_Node] = []
            width = min(cfg.threads, len(heap)) if pool else 1
            while heap and len(batch) < width:
                node = heapq.heappop(heap)
                if node.key[0] >= incumbent_obj - 1e-9:
                    continue
                batch.append(node)
            if not batch:
                continue
            if pool:
                sols = list(pool.map(
                    lambda nd: be.solve(program, lb_override=nd.lb, ub_override=nd.ub),
                    batch))
            else:
                sols = [be.solve(program, lb_override=nd.lb, ub_override=nd.ub)
                        for nd in batch]
            for node, sol in zip(batch, sols):
                node_count += 1
                process(node, sol)
            if cfg.log_interval and node_count >= next_log:
                next_log = node_count + cfg.log_interval
                print(f"[bnb] nodes={node_count} open={len(heap)} "
                      f"inc={incumbent_obj:.6f} bound={best_bound:.6f} "
                      f"gap={_relative_gap(incumbent_obj, best_bound):.2e} "
                      f"t={time.monotonic() - t_start:.1f}s",
                      file=sys.stderr)
        else:
            best_bound = incumbent_obj
    finally:
        if pool:
            pool.shutdown(wait=False, cancel_futures=True)

    wall = time.monotonic() - t_start
    if incumbent_x is None:
        if status in ("node_limit", "time_limit"):
            return MipSolution(status, None, None, best_bound, math.inf,
                               node_count, wall, 0)
        return MipSolution("infeasible", None, None, math.inf, math.inf,
                           node_count, wall, 0)
    gap = max(0.0, _relative_gap(incumbent_obj, best_bound))
    return MipSolution(status, incumbent_x, incumbent_obj, best_bound, gap,
                       node_count, wall, incumbent_count)
