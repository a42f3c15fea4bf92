"""Release gate: the externally agreed behavior, with pinned tolerances.

Every test here checks one promised property of the package end to end on
the packaged study cases.  Tolerances and runtime budgets are part of the
contract; loosening them is a release decision, not a test fix.
"""

from __future__ import annotations

import itertools
import json
import re
import time
from pathlib import Path

import pytest

from conftest import load_case
from gridrestore import (
    build_sizing_model,
    check_plan_invariants,
    detect_islands,
    fixture_path,
    load_catalog,
    load_forecast,
    solve_sizing,
)
from gridrestore.cli import main
from gridrestore.solver import ClarabelBackend

# --------------------------------------------------------------------------
# 1. island detection


@pytest.mark.parametrize("tag,n_islands", [("13", 4), ("37", 7), ("123", 9)])
def test_island_detection(request, tag, n_islands):
    feeder, scenario, _ = request.getfixturevalue(f"case{tag}")
    t0 = time.perf_counter()
    result = detect_islands(feeder, scenario)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    assert len(result.islands) == n_islands
    # the islands partition the feeder's buses
    members = [b for island in result.islands for b in island]
    assert sorted(members) == sorted(feeder.bus_ids())
    assert len(members) == len(set(members))


# --------------------------------------------------------------------------
# 2. fleet sizing: optimal mixes, cross-checked against exhaustive search


SIZING_EXPECTED = {
    "37": ({("MDG", 1): 1}, 1500.0),
    "123": ({("MDG", 0): 1, ("MESS", 1): 1}, 2500.0),
}


def _cheapest_feasible_cost(model, backend, max_units=4):
    """Minimum-cost mix by trying every count vector in ascending cost order.

    Feasibility of a candidate mix is decided by a continuous dispatch solve
    with the unit counts pinned; the first feasible candidate in cost order
    is therefore a true optimum of the integer problem.
    """
    combos = sorted(
        itertools.product(range(max_units + 1), repeat=len(model.catalog)),
        key=lambda c: (sum(n * s.cost for n, s in zip(c, model.catalog)), c))
    for counts in combos:
        pin = {model.n_index[(s.kind, s.size_index)]: float(n)
               for s, n in zip(model.catalog, counts)}
        sol = backend.solve(model.program, lb_override=pin, ub_override=pin)
        if sol.status == "optimal":
            return sum(n * s.cost for n, s in zip(counts, model.catalog))
    raise AssertionError("no feasible mix within the enumeration bound")


@pytest.mark.parametrize("tag", ["37", "123"])
def test_sizing_mix_is_globally_optimal(tag):
    t0 = time.perf_counter()
    catalog = load_catalog(fixture_path("catalog.json"))
    forecast = load_forecast(fixture_path(f"forecast{tag}.json"))
    model = build_sizing_model(forecast, catalog)
    sol = solve_sizing(model)
    assert sol.status == "optimal"

    exp_units, exp_cost = SIZING_EXPECTED[tag]
    assert {(s.kind, s.size_index): n for s, n in sol.mix.units} == exp_units
    assert sol.mix.total_cost == pytest.approx(exp_cost, abs=1e-6)

    brute = _cheapest_feasible_cost(model, ClarabelBackend())
    assert sol.mix.total_cost == pytest.approx(brute, abs=1e-6)
    assert time.perf_counter() - t0 < 60.0


# --------------------------------------------------------------------------
# 3. study-case restoration: everything repaired, service never regresses


def _energized_counts(plan):
    return [sum(status[t] for status in plan.line_status.values())
            for t in range(plan.n_periods)]


@pytest.mark.parametrize("name,n_damaged", [("plan37", 6), ("plan123", 8)])
def test_restoration_completes_and_improves(request, name, n_damaged):
    _, plan = request.getfixturevalue(name)
    assert len(plan.line_status) == n_damaged
    assert all(status[-1] == 1 for status in plan.line_status.values()), \
        "every damaged line must be energized by the end of the horizon"

    counts = _energized_counts(plan)
    unserved = plan.unserved_mwh
    for t in range(1, plan.n_periods):
        assert counts[t] >= counts[t - 1]
        if counts[t] > counts[t - 1]:
            # energizing more lines must strictly reduce unserved energy
            assert unserved[t] < unserved[t - 1] - 1e-9


def test_restoration_37_within_budget(plan37):
    _, plan = plan37
    assert plan.status == "optimal"
    assert plan.gap <= 1e-3
    assert plan.wall_time < 300.0
    # frozen regression value for the deterministic default configuration
    assert plan.objective_mwh == pytest.approx(24.361793, rel=1e-4)


def test_restoration_123_finds_verified_optimum(plan123):
    """The fixed node budget must reproduce the exhaustively verified optimum.

    The continuous relaxation's bound plateaus far below the integer optimum
    on this case, so the run is truncated by node count rather than gap; the
    incumbent it returns was verified optimal by enumerating every
    energization profile.
    """
    _, plan = plan123
    assert plan.objective_mwh == pytest.approx(42.010609, rel=1e-4)


# --------------------------------------------------------------------------
# 4. network reduction: objective error within one percent


def test_reduction_objective_error_below_one_percent(plan13, plan13_full):
    _, reduced = plan13
    _, full = plan13_full
    assert reduced.status == "optimal"
    assert full.status == "optimal"
    rel_err = abs(reduced.objective_mwh - full.objective_mwh) / full.objective_mwh
    assert rel_err <= 0.01
    assert reduced.wall_time + full.wall_time < 600.0


# --------------------------------------------------------------------------
# 5. branch and bound agrees with exhaustive schedule enumeration


def test_solver_matches_enumeration(plan13, oracle13):
    _, plan = plan13
    result, elapsed = oracle13
    assert plan.objective_mwh == pytest.approx(result["best_objective"], rel=1e-4)
    assert plan.wall_time + elapsed < 120.0


# --------------------------------------------------------------------------
# 6. relaxation soundness: sampled nonconvex equations never leave the hull


def test_hull_soundness_report(tmp_path):
    out = tmp_path / "hull.json"
    rc = main(["validate", "--check", "hull", "--samples", "10000",
               "--seed", "0", "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["ok"] is True
    assert report["n_samples"] == 10000

    line_checks = report["line_flow"]["checks"]
    # every line of every packaged feeder is covered
    assert len(line_checks) == sum(
        len(load_case(tag)[0].lines) for tag in ("13", "37", "123"))
    assert all(c["n_violations"] == 0 for c in line_checks)
    assert all(c["max_violation"] <= 1e-9 for c in line_checks)

    storage = report["storage_loss"]["checks"]
    scaled = [c for c in storage if c["variant"] == "scaled"]
    appendix = [c for c in storage if c["variant"] == "appendix"]
    assert scaled and all(c["max_violation"] <= 1e-9 for c in scaled)
    # the rejected tighter variant stays archived in the report, with the
    # measured manifold violations that disqualify it as a default
    assert appendix
    assert max(c["max_violation"] for c in appendix) > 1e-3


# --------------------------------------------------------------------------
# 7. every solved plan passes the full invariant audit


@pytest.mark.parametrize("name", ["plan13", "plan13_full", "plan37", "plan123"])
def test_solved_plans_pass_invariant_audit(request, name):
    graph, plan = request.getfixturevalue(name)
    tag = re.fullmatch(r"plan(\d+)(?:_full)?", name).group(1)
    _, scenario, mix = request.getfixturevalue(f"case{tag}")
    violations = check_plan_invariants(plan, graph, scenario=scenario, mix=mix)
    assert violations == ()


# --------------------------------------------------------------------------
# 8. honest statement of what the reference results do not reproduce


def test_readme_discloses_unreproduced_reference_results():
    readme = (Path(__file__).resolve().parents[1] / "README.md").read_text()
    heading = re.search(r"^#+ .*reproduc.*$", readme,
                        flags=re.IGNORECASE | re.MULTILINE)
    assert heading, "README must have a section on reproducibility"
    section = readme[heading.start():]
    nxt = re.search(r"^#+ ", section[heading.end() - heading.start():],
                    flags=re.MULTILINE)
    if nxt:
        section = section[:heading.end() - heading.start() + nxt.start()]
    assert "19.72" in section and "21.57" in section
