"""Regenerate the packaged study-case data under ``src/gridrestore/fixtures``.

Three radial study areas are produced, each as a feeder + damage scenario
(plus, for the two larger areas, a pre-disaster shortage forecast and the
fleet the sizing stage selects for it):

* ``area13``  — 13-bus feeder, 3 damaged lines, 1 crew.  Small enough for
  exhaustive schedule enumeration and for solving without island
  contraction, so it anchors the oracle and reduction-accuracy tests.
* ``area37``  — 37-bus feeder split into 7 islands by 6 damaged lines,
  2 crews, diurnal demand peaking at 2.46 MW.
* ``area123`` — 123-bus feeder split into 9 islands by 8 damaged lines,
  2 crews, diurnal demand peaking at 3.49 MW.

Design rules the numbers below implement:

- Area demand follows a repeating four-period (16 h) pattern at 4 h per
  period; per-bus demand is a fixed weight times the area pattern, with
  weights chosen so that every island a crew reconnects adds enough new
  demand (or new generation) that total unserved energy drops strictly at
  each reconnection, whatever optimal storage dispatch does.
- Surviving grid-tied units (DG/ESS/PV) sit in the source-side island of
  the two larger areas, so island restoration order never starves the
  bulk of the network of their output.
- Travel times between damage sites are one period, generated from a
  seeded symmetric matrix; repair durations are given in hours and are
  quantized to whole periods by the scenario parser.
- The fleet files hold the cost-minimal mix for each area's forecast; the
  generator re-verifies optimality and uniqueness by brute-force
  enumeration before writing anything.

Run from the repository root::

    python3 tools/make_fixtures.py [--check-only]

Output files are deterministic (sorted keys, fixed float repr).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "tests"))

from gridrestore import (  # noqa: E402
    StudyHorizon,
    default_pv_profile,
    detect_islands,
    dump_json,
    gen_travel_matrix,
    mix_to_dict,
    parse_catalog,
    parse_feeder,
    parse_forecast,
    parse_mix,
    parse_scenario,
)
from gridrestore.sizing import MerMixDecision  # noqa: E402
from bruteforce import optimal_by_bruteforce  # noqa: E402

OUT_DIR = ROOT / "src" / "gridrestore" / "fixtures"

HORIZON = {"n_periods": 8, "dt_hours": 4.0}
H8 = StudyHorizon(n_periods=8, dt_hours=4.0)

# One mobile-PV availability value per 4 h period, first period starting at
# 08:00, daylight 05:30-19:00, clear-sky peak availability 0.7.  The same
# shape scales every PV unit (mobile or grid-tied) in all three areas.
PV_SHAPE = {"start_hour": 8.0, "sunrise": 5.5, "sunset": 19.0, "peak": 0.7}
PV_PROFILE = default_pv_profile(H8, **PV_SHAPE)

# Area demand patterns (MW per period, repeating) and reactive ratios.
PATTERN_37 = (2.21, 2.46, 2.33, 2.09)
PATTERN_123 = (3.14, 3.49, 3.32, 2.97)
QRATIO_37 = math.tan(math.acos(0.9))        # power factor 0.9
QRATIO_123 = 0.75
# Critical-demand fractions (active, reactive) used in the forecasts.
CRIT_37 = (0.65, 0.60)
CRIT_123 = (0.50, 0.76)

# Purchasable mobile units: two sizes per kind.
CATALOG = {
    "mdg": [
        {"p_mw": 1.0, "cost": 1000.0},
        {"p_mw": 1.5, "cost": 1500.0},
    ],
    "mess": [
        {"e_mwh": 1.5, "s_mva": 0.5, "cost": 1000.0, "r_e": 0.05, "r_ct": 0.02},
        {"e_mwh": 2.5, "s_mva": 1.0, "cost": 1500.0, "r_e": 0.05, "r_ct": 0.02},
    ],
    "mpv": [
        {"p_mw": 0.3, "cost": 1000.0},
        {"p_mw": 0.4, "cost": 1500.0},
    ],
}

# Default electrical data for every line: short, heavily built segments so
# that in-island losses and voltage drop stay small relative to the 4 MVA
# rating (the contraction-accuracy test quantifies the effect).
LINE_R_PU = 0.0005
LINE_X_PU = 0.001
LINE_SMAX = 4.0


# ---------------------------------------------------------------------------
# area 13 — oracle-scale feeder

EDGES_13 = [
    ("650", "632"), ("632", "633"), ("633", "634"), ("632", "645"),
    ("645", "646"), ("632", "671"), ("671", "684"), ("684", "611"),
    ("684", "652"), ("671", "680"), ("671", "692"), ("692", "675"),
]
# Flat demand (MW, constant across periods).
LOADS_13 = {
    "632": 0.10, "633": 0.10, "634": 0.15, "645": 0.15, "646": 0.10,
    "671": 0.20, "684": 0.05, "611": 0.05, "652": 0.10, "680": 0.05,
    "692": 0.15, "675": 0.20,
}
QRATIO_13 = 0.484
DERS_13 = [
    {"bus": "634", "kind": "DG", "p_mw": 0.1},
    {"bus": "675", "kind": "ESS", "e_mwh": 0.2, "s_mva": 0.05,
     "r_e": 0.05, "r_ct": 0.02},
    {"bus": "611", "kind": "PV",
     "p_series_mw": [round(0.15 * a, 9) for a in PV_PROFILE]},
]
DAMAGE_13 = ["632-645", "632-671", "671-692"]
SCENARIO_13 = {
    "damaged_lines": DAMAGE_13,
    "repair_time_periods": {lid: 2 for lid in DAMAGE_13},
    "n_crews": 1,
}
MIX_13 = [("MDG", 0, 1)]            # one 1.0 MW mobile generator


# ---------------------------------------------------------------------------
# area 37 — 6 damaged lines, 7 islands

EDGES_37 = [
    ("799", "701"), ("701", "702"), ("702", "705"), ("702", "713"),
    ("702", "703"), ("705", "742"), ("705", "712"), ("713", "704"),
    ("704", "714"), ("714", "718"), ("704", "720"), ("720", "707"),
    ("707", "724"), ("707", "722"), ("720", "706"), ("706", "725"),
    ("703", "727"), ("703", "730"), ("727", "744"), ("744", "728"),
    ("744", "729"), ("730", "709"), ("709", "731"), ("709", "708"),
    ("708", "732"), ("708", "733"), ("733", "734"), ("734", "737"),
    ("734", "710"), ("737", "738"), ("738", "711"), ("711", "741"),
    ("711", "740"), ("710", "735"), ("710", "736"), ("709", "775"),
]
# Demand weight per bus (fraction of the area pattern); weights sum to 1.
# Grouped by post-damage island: source side first, then each cut subtree.
WEIGHTS_37 = {
    # source-side island (22%): spine 799-701-702-703-730-709 plus 713-704-720
    "701": 0.10, "713": 0.03, "720": 0.03, "730": 0.03, "731": 0.03,
    # island behind 709-708 (15%)
    "732": 0.01, "733": 0.02, "734": 0.01, "737": 0.03, "738": 0.025,
    "711": 0.005, "741": 0.01, "740": 0.015, "735": 0.015, "736": 0.01,
    # island behind 703-727 (14%)
    "727": 0.02, "744": 0.03, "728": 0.06, "729": 0.03,
    # island behind 702-705 (13%)
    "742": 0.07, "712": 0.06,
    # island behind 720-707 (12%)
    "724": 0.05, "722": 0.07,
    # island behind 704-714 (12%)
    "714": 0.05, "718": 0.07,
    # island behind 720-706 (12%)
    "706": 0.05, "725": 0.07,
}
DERS_37 = [
    {"bus": "709", "kind": "DG", "p_mw": 0.2},
    {"bus": "720", "kind": "ESS", "e_mwh": 0.2, "s_mva": 0.05,
     "r_e": 0.05, "r_ct": 0.02},
    {"bus": "701", "kind": "PV",
     "p_series_mw": [round(0.5 * a, 9) for a in PV_PROFILE]},
]
DAMAGE_37 = ["709-708", "703-727", "702-705", "720-707", "704-714", "720-706"]
REPAIR_HOURS_37 = {"709-708": 3, "703-727": 4, "702-705": 3,
                   "720-707": 6, "704-714": 5, "720-706": 6}
TRAVEL_SEED_37 = 37
MIX_37 = [("MDG", 1, 1)]            # one 1.5 MW mobile generator


# ---------------------------------------------------------------------------
# area 123 — 8 damaged lines, 9 islands

EDGES_123 = [
    # source-side trunk (27 buses): all surviving units stay connected here
    ("150", "149"), ("149", "1"), ("1", "2"), ("1", "3"), ("3", "4"),
    ("4", "5"), ("5", "6"), ("1", "7"), ("7", "8"), ("8", "12"),
    ("8", "13"), ("13", "18"), ("18", "21"), ("21", "23"), ("23", "25"),
    ("25", "26"), ("25", "28"), ("13", "135"), ("135", "35"), ("35", "36"),
    ("35", "40"), ("40", "52"), ("52", "53"), ("8", "97"), ("97", "160"),
    ("160", "94"),
    # island subtree behind 8-14
    ("8", "14"), ("14", "9"), ("14", "10"), ("14", "11"), ("14", "34"),
    ("34", "15"), ("15", "16"), ("15", "17"),
    # island subtree behind 18-19
    ("18", "19"), ("19", "20"), ("19", "22"), ("19", "24"),
    # island subtree behind 28-29
    ("28", "29"), ("29", "27"), ("27", "31"), ("31", "32"), ("27", "33"),
    ("29", "30"), ("30", "250"),
    # island subtree behind 36-37
    ("36", "37"), ("37", "38"), ("38", "39"), ("37", "41"), ("41", "42"),
    ("42", "43"), ("42", "44"), ("44", "45"), ("45", "46"),
    # island subtree behind 40-47
    ("40", "47"), ("47", "48"), ("48", "49"), ("49", "50"), ("50", "51"),
    ("51", "151"), ("47", "54"), ("54", "55"), ("55", "56"),
    # island subtree behind 53-57
    ("53", "57"), ("57", "58"), ("58", "59"), ("57", "60"), ("60", "61"),
    ("61", "610"), ("60", "62"), ("62", "63"), ("63", "64"), ("64", "65"),
    ("65", "66"),
    # island subtree behind 97-67
    ("97", "67"), ("67", "68"), ("68", "69"), ("69", "70"), ("70", "71"),
    ("67", "72"), ("72", "73"), ("73", "74"), ("74", "75"), ("72", "76"),
    ("76", "77"), ("77", "78"), ("78", "79"), ("78", "80"),
    # island subtree behind 94-98
    ("94", "98"), ("98", "99"), ("99", "100"), ("100", "450"), ("98", "101"),
    ("101", "102"), ("102", "103"), ("103", "104"), ("101", "105"),
    ("105", "106"), ("106", "107"), ("105", "108"), ("108", "109"),
    ("108", "300"), ("109", "110"), ("110", "111"), ("110", "112"),
    ("112", "113"), ("113", "114"), ("98", "81"), ("81", "82"), ("82", "83"),
    ("81", "84"), ("84", "85"), ("81", "86"), ("86", "87"), ("87", "88"),
    ("87", "89"), ("89", "90"), ("89", "91"), ("91", "92"), ("91", "93"),
    ("93", "95"), ("95", "96"),
]
WEIGHTS_123 = {
    # source-side trunk (26%)
    "1": 0.02, "12": 0.02, "18": 0.02, "21": 0.02, "23": 0.02, "25": 0.02,
    "26": 0.02, "28": 0.02, "35": 0.02, "36": 0.02, "52": 0.02, "53": 0.02,
    "94": 0.02,
    # island behind 8-14 (10%)
    "9": 0.02, "10": 0.02, "11": 0.02, "16": 0.02, "17": 0.02,
    # island behind 18-19 (10%)
    "19": 0.025, "20": 0.025, "22": 0.025, "24": 0.025,
    # island behind 28-29 (10%)
    "27": 0.02, "30": 0.02, "31": 0.02, "32": 0.02, "33": 0.02,
    # island behind 36-37 (10%)
    "38": 0.02, "39": 0.02, "43": 0.02, "45": 0.02, "46": 0.02,
    # island behind 40-47 (10%)
    "48": 0.02, "50": 0.02, "55": 0.02, "56": 0.02, "151": 0.02,
    # island behind 53-57 (10%)
    "58": 0.02, "59": 0.02, "62": 0.02, "64": 0.02, "66": 0.02,
    # island behind 97-67 (7%)
    "69": 0.01, "71": 0.01, "74": 0.01, "75": 0.01, "77": 0.01, "79": 0.01,
    "80": 0.01,
    # island behind 94-98 (7%)
    "83": 0.01, "85": 0.01, "88": 0.01, "96": 0.01, "104": 0.01,
    "107": 0.01, "114": 0.01,
}
DERS_123 = [
    {"bus": "94", "kind": "DG", "p_mw": 0.1},
    {"bus": "52", "kind": "DG", "p_mw": 0.2},
    {"bus": "25", "kind": "ESS", "e_mwh": 0.3, "s_mva": 0.075,
     "r_e": 0.05, "r_ct": 0.02},
    {"bus": "18", "kind": "PV",
     "p_series_mw": [round(2.0 * a, 9) for a in PV_PROFILE]},
    {"bus": "35", "kind": "PV",
     "p_series_mw": [round(2.0 * a, 9) for a in PV_PROFILE]},
]
DAMAGE_123 = ["8-14", "18-19", "28-29", "36-37", "40-47", "53-57",
              "97-67", "94-98"]
REPAIR_HOURS_123 = {"8-14": 4, "18-19": 3, "28-29": 4, "36-37": 4,
                    "40-47": 4, "53-57": 2, "97-67": 4, "94-98": 4}
TRAVEL_SEED_123 = 123
MIX_123 = [("MDG", 0, 1), ("MESS", 1, 1)]   # 1.0 MW MDG + 2.5 MWh MESS


# ---------------------------------------------------------------------------
# builders


def _line_id(a: str, b: str) -> str:
    return f"{a}-{b}"


def feeder_dict(v_base_kv: float, edges, loads_mw, q_ratio: float, ders,
                pattern=None) -> dict:
    """Assemble a feeder JSON object.

    ``loads_mw`` maps bus -> flat MW (if ``pattern`` is None) or
    bus -> weight multiplied by the repeating area ``pattern``.
    """
    buses = sorted({b for e in edges for b in e},
                   key=lambda s: (len(s), s))
    n = HORIZON["n_periods"]
    loads = []
    for bus in sorted(loads_mw, key=lambda s: (len(s), s)):
        w = loads_mw[bus]
        if pattern is None:
            p = [round(w, 10)] * n
        else:
            p = [round(w * pattern[t % len(pattern)], 10) for t in range(n)]
        q = [round(v * q_ratio, 10) for v in p]
        loads.append({"bus": bus, "p_mw": p, "q_mvar": q})
    return {
        "s_base_mva": 1.0,
        "v_base_kv": v_base_kv,
        "horizon": dict(HORIZON),
        "buses": [{"id": b} for b in buses],
        "lines": [{"id": _line_id(a, b), "from": a, "to": b,
                   "r_pu": LINE_R_PU, "x_pu": LINE_X_PU,
                   "smax_mva": LINE_SMAX} for a, b in edges],
        "loads": loads,
        "ders": ders,
    }


def forecast_dict(pattern, q_ratio: float, crit, ders) -> dict:
    n = HORIZON["n_periods"]
    f_p, f_q = crit
    p = [pattern[t % len(pattern)] for t in range(n)]
    q = [round(v * q_ratio, 10) for v in p]
    return {
        "horizon": dict(HORIZON),
        "p_total_mw": p,
        "q_total_mvar": q,
        "p_crit_mw": [round(f_p * v, 10) for v in p],
        "q_crit_mvar": [round(f_q * v, 10) for v in q],
        "ders": ders,
    }


def mix_dict(selection) -> dict:
    specs = parse_catalog(CATALOG)
    by_key = {(sp.kind, sp.size_index): sp for sp in specs}
    units = tuple((by_key[(kind, size)], count) for kind, size, count in selection)
    total = sum(sp.cost * n for sp, n in units)
    return mix_to_dict(MerMixDecision(units=units, total_cost=total))


def scenario_dict(damage, repair_hours, n_crews, travel_seed=None) -> dict:
    out = {
        "damaged_lines": list(damage),
        "repair_time_hours": {lid: float(repair_hours[lid]) for lid in damage},
        "n_crews": n_crews,
    }
    if travel_seed is not None:
        mat = gen_travel_matrix(len(damage), seed=travel_seed, max_periods=1)
        out["travel_time_periods"] = [[int(v) for v in row] for row in mat]
    return out


# ---------------------------------------------------------------------------
# verification


def check_area(name: str, feeder_data: dict, scenario_data: dict,
               n_islands: int, source_bus: str,
               forecast_data: dict | None = None,
               mix_data: dict | None = None) -> None:
    feeder = parse_feeder(feeder_data)
    scenario = parse_scenario(scenario_data, feeder)
    islands = detect_islands(feeder, scenario)
    assert len(islands.islands) == n_islands, (
        f"{name}: {len(islands.islands)} islands, wanted {n_islands}")

    # every surviving unit must sit in the source-side island
    if name != "area13":
        src_island = next(isl for isl in islands.islands if source_bus in isl)
        for der in feeder.ders:
            assert der.bus in src_island, (
                f"{name}: DER at {der.bus} not in the source-side island")

    # feeder aggregate must equal the forecast series
    if forecast_data is not None:
        fc = parse_forecast(forecast_data)
        for t in range(feeder.horizon.n_periods):
            agg = sum(ld.p_mw[t] for ld in feeder.loads)
            assert abs(agg - fc.p_total_mw[t]) < 1e-8, (
                f"{name}: aggregate {agg} != forecast {fc.p_total_mw[t]} at {t}")
            agg_q = sum(ld.q_mvar[t] for ld in feeder.loads)
            assert abs(agg_q - fc.q_total_mvar[t]) < 1e-7, (
                f"{name}: reactive aggregate mismatch at {t}")

    # the stored fleet must be the unique cheapest feasible mix
    if mix_data is not None and forecast_data is not None:
        mix = parse_mix(mix_data)
        fc = parse_forecast(forecast_data)
        specs = parse_catalog(CATALOG)
        cost, winners = optimal_by_bruteforce(fc, specs, PV_PROFILE,
                                              cost_cap=4000.0)
        assert abs(cost - mix.total_cost) < 1e-9, (
            f"{name}: stored mix costs {mix.total_cost}, brute force {cost}")
        assert len(winners) == 1, (
            f"{name}: cheapest mix not unique: {winners}")
        assert winners[0] == mix.counts, (
            f"{name}: brute-force winner {winners[0]} != stored {mix.counts}")
    print(f"  {name}: islands={n_islands} ok"
          + ("" if mix_data is None else ", fleet verified by brute force"))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check-only", action="store_true",
                    help="verify the design tables without writing files")
    args = ap.parse_args()

    feeder13 = feeder_dict(4.16, EDGES_13, LOADS_13, QRATIO_13, DERS_13)
    feeder37 = feeder_dict(4.8, EDGES_37, WEIGHTS_37, QRATIO_37, DERS_37,
                           pattern=PATTERN_37)
    feeder123 = feeder_dict(4.16, EDGES_123, WEIGHTS_123, QRATIO_123,
                            DERS_123, pattern=PATTERN_123)
    scen13 = dict(SCENARIO_13)
    scen37 = scenario_dict(DAMAGE_37, REPAIR_HOURS_37, 2, TRAVEL_SEED_37)
    scen123 = scenario_dict(DAMAGE_123, REPAIR_HOURS_123, 2, TRAVEL_SEED_123)
    fc37 = forecast_dict(PATTERN_37, QRATIO_37, CRIT_37, DERS_37)
    fc123 = forecast_dict(PATTERN_123, QRATIO_123, CRIT_123, DERS_123)
    mix13 = mix_dict(MIX_13)
    mix37 = mix_dict(MIX_37)
    mix123 = mix_dict(MIX_123)

    print("verifying design tables:")
    check_area("area13", feeder13, scen13, 4, "650")
    check_area("area37", feeder37, scen37, 7, "799", fc37, mix37)
    check_area("area123", feeder123, scen123, 9, "150", fc123, mix123)

    if args.check_only:
        print("check-only: no files written")
        return 0

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    files = {
        "catalog.json": CATALOG,
        "feeder13.json": feeder13,
        "scenario13.json": scen13,
        "mix13.json": mix13,
        "feeder37.json": feeder37,
        "scenario37.json": scen37,
        "forecast37.json": fc37,
        "mix37.json": mix37,
        "feeder123.json": feeder123,
        "scenario123.json": scen123,
        "forecast123.json": fc123,
        "mix123.json": mix123,
    }
    for fname, data in sorted(files.items()):
        dump_json(data, OUT_DIR / fname)
        print(f"  wrote {OUT_DIR / fname}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
