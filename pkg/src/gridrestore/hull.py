"""Convex-hull (second-order cone) relaxations of the two nonconvex
branch-flow constraints.

Two nonconvex manifolds appear in the restoration model:

* line flow:     p^2 + q^2 = l * v    over x = (p, q, l, v)
* storage loss:  r_e p^2 + r_ct q^2 = p_loss * v   over y = (p, q, p_loss, v)

where v is the *squared* voltage magnitude of the sending bus, l the squared
current, and r_e / r_ct the total and converter loss resistances of a storage
unit.  Each hull is a small set of SOC constraints

    || diag(a) z ||_2 <= b' z + e

plus one linear cut  c' z <= d  tying the relaxation to the voltage band
[w_lo, w_hi] (squared bounds) and the apparent-power rating s_max.

For the storage hull two first-cone variants are provided.  The "appendix"
variant uses diag(sqrt2, sqrt2, 1, 1), which expands to p^2 + q^2 <= p_loss*v
and is *not* a valid relaxation when r_e, r_ct < 1 (the loss manifold lies
outside it); :func:`soundness_check` demonstrates this numerically.  The
default "scaled" variant uses diag(sqrt(2 r_e), sqrt(2 r_ct), 1, 1), whose
expansion r_e p^2 + r_ct q^2 <= p_loss * v contains the manifold and touches
it everywhere, and is therefore the variant used by the restoration builder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleBounds, MissingParameter
from .netmodel import Bus, DerUnit, Line, MerSpec

EQ_LINE_FLOW = "line_flow"
EQ_STORAGE_LOSS = "storage_loss"


def battery_resistance(r_e: float, r_ct: float) -> float:
    """Battery-side resistance: total loss resistance minus converter part.

    Kept behind this accessor so the composition rule lives in one place.
    """
    return r_e - r_ct


@dataclass(frozen=True)
class SocCone:
    """|| diag(a) z ||_2 <= b . z + e  over the 4-vector z."""

    a: tuple[float, float, float, float]
    b: tuple[float, float, float, float]
    e: float = 0.0
    label: str = ""

    def violation(self, z) -> float:
        lhs = math.sqrt(sum((ai * zi) ** 2 for ai, zi in zip(self.a, z)))
        rhs = sum(bi * zi for bi, zi in zip(self.b, z)) + self.e
        return lhs - rhs


@dataclass(frozen=True)
class LinearCut:
    """c . z <= d  over the 4-vector z."""

    c: tuple[float, float, float, float]
    d: float
    label: str = ""

    def violation(self, z) -> float:
        return sum(ci * zi for ci, zi in zip(self.c, z)) - self.d


@dataclass(frozen=True)
class HullConstraintSet:
    """A bundle of SOC cones and linear cuts over one semantic 4-tuple."""

    var_names: tuple[str, str, str, str]
    cones: tuple[SocCone, ...]
    cuts: tuple[LinearCut, ...]
    params: tuple[tuple[str, float], ...] = field(default_factory=tuple)

    def param(self, name: str) -> float:
        for key, val in self.params:
            if key == name:
                return val
        raise KeyError(name)

    def max_violation(self, z) -> float:
        worst = -math.inf
        for cone in self.cones:
            worst = max(worst, cone.violation(z))
        for cut in self.cuts:
            worst = max(worst, cut.violation(z))
        return worst

    def add_to_program(self, program, indices: tuple[int, int, int, int],
                       name_prefix: str = "") -> None:
        """Materialize the hull in a ConicProgram over existing variables."""
        for k, cone in enumerate(self.cones):
            rows = [({idx: ai}, 0.0) for ai, idx in zip(cone.a, indices) if ai != 0.0]
            rhs = {idx: bi for bi, idx in zip(cone.b, indices) if bi != 0.0}
            program.add_soc(rows, rhs, cone.e,
                            name=f"{name_prefix}{cone.label or f'cone{k}'}")
        for k, cut in enumerate(self.cuts):
            coeffs = {idx: ci for ci, idx in zip(cut.c, indices) if ci != 0.0}
            program.add_linear(coeffs, "<=", cut.d,
                               name=f"{name_prefix}{cut.label or f'cut{k}'}")


def _check_band(w_lo: float, w_hi: float) -> None:
    if w_lo < 0 or w_hi < 0 or w_lo > w_hi:
        raise InfeasibleBounds(
            f"invalid squared-voltage band [{w_lo}, {w_hi}]")


def line_flow_hull_set(s_max: float, w_lo: float, w_hi: float) -> HullConstraintSet:
    """Hull of the line-flow manifold over (p, q, l, v), squared bounds given.

    The cone expands to p^2 + q^2 <= l*v (tight on the manifold); the cut
    w_lo*w_hi*l + s_max^2 * v <= (w_hi + w_lo) * s_max^2 caps the squared
    current consistently with the voltage band.  With w_lo == w_hi == w the
    cut degenerates to the exact current cap l <= s_max^2 / w.
    """
    _check_band(w_lo, w_hi)
    r2 = math.sqrt(2.0)
    s2 = s_max * s_max
    cone = SocCone(a=(r2, r2, 1.0, 1.0), b=(0.0, 0.0, 1.0, 1.0), label="flow_cone")
    cut = LinearCut(c=(0.0, 0.0, w_lo * w_hi, s2), d=(w_hi + w_lo) * s2,
                    label="flow_cut")
    return HullConstraintSet(var_names=("p", "q", "l", "v"), cones=(cone,),
                             cuts=(cut,),
                             params=(("s_max", s_max), ("w_lo", w_lo),
                                     ("w_hi", w_hi)))


def storage_loss_hull_set(s_max: float, w_lo: float, w_hi: float,
                          r_e: float, r_ct: float,
                          variant: str = "scaled") -> HullConstraintSet:
    """Hull of the storage-loss manifold over (p, q, p_loss, v).

    Constraints (e = r_e * s_max^2, r_bt = r_e - r_ct):

    * first cone, variant "scaled" (default): r_e p^2 + r_ct q^2 <= p_loss*v;
      variant "appendix": p^2 + q^2 <= p_loss*v (kept for the recorded
      soundness regression -- it cuts off the manifold for r_e, r_ct < 1);
    * second cone: || (sqrt(2 r_bt) q, p_loss, v) || <= p_loss + v + e;
    * cut: w_lo*w_hi*p_loss + e*v <= r_e*(w_hi + w_lo)*s_max^2.
    """
    _check_band(w_lo, w_hi)
    if variant not in ("scaled", "appendix"):
        raise ValueError(f"unknown storage hull variant '{variant}'")
    r_bt = battery_resistance(r_e, r_ct)
    if r_bt < 0:
        raise MissingParameter("storage resistances must satisfy r_ct <= r_e")
    s2 = s_max * s_max
    e = r_e * s2
    if variant == "appendix":
        a1 = (math.sqrt(2.0), math.sqrt(2.0), 1.0, 1.0)
    else:
        a1 = (math.sqrt(2.0 * r_e), math.sqrt(2.0 * r_ct), 1.0, 1.0)
    cone1 = SocCone(a=a1, b=(0.0, 0.0, 1.0, 1.0), label="loss_cone")
    cone2 = SocCone(a=(0.0, math.sqrt(2.0 * r_bt), 1.0, 1.0),
                    b=(0.0, 0.0, 1.0, 1.0), e=e, label="battery_cone")
    cut = LinearCut(c=(0.0, 0.0, w_lo * w_hi, e), d=r_e * (w_hi + w_lo) * s2,
                    label="loss_cut")
    return HullConstraintSet(var_names=("p", "q", "p_loss", "v"),
                             cones=(cone1, cone2), cuts=(cut,),
                             params=(("s_max", s_max), ("w_lo", w_lo),
                                     ("w_hi", w_hi), ("r_e", r_e),
                                     ("r_ct", r_ct), ("variant",
                                                      0.0 if variant == "scaled" else 1.0)))


def hull_line_flow(line: Line, bus: Bus, s_base_mva: float = 1.0) -> HullConstraintSet:
    """Line-flow hull for a specific line and its sending bus."""
    s_max = line.smax_mva / s_base_mva
    return line_flow_hull_set(s_max, bus.vmin_pu ** 2, bus.vmax_pu ** 2)


def hull_storage_loss(storage: DerUnit | MerSpec, bus: Bus,
                      s_base_mva: float = 1.0,
                      variant: str = "scaled") -> HullConstraintSet:
    """Storage-loss hull for a specific storage unit at a bus.

    Raises:
        MissingParameter: the unit lacks s_mva or loss resistances.
    """
    if storage.s_mva is None:
        raise MissingParameter(
            f"storage at '{getattr(storage, 'bus', storage)}' has no s_mva rating")
    if storage.r_e is None or storage.r_ct is None:
        raise MissingParameter(
            "storage loss resistances r_e and r_ct are required for the loss hull")
    s_max = storage.s_mva / s_base_mva
    return storage_loss_hull_set(s_max, bus.vmin_pu ** 2, bus.vmax_pu ** 2,
                                 storage.r_e, storage.r_ct, variant=variant)


# ---------------------------------------------------------------------------
# numerical soundness certification


def sample_line_flow_manifold(rng: np.random.Generator, s_max: float,
                              w_lo: float, w_hi: float,
                              l_max: float | None = None) -> tuple[float, float, float, float]:
    """One point with p^2 + q^2 = l*v inside the variable box."""
    v = rng.uniform(w_lo, w_hi)
    s_cap = s_max
    if l_max is not None:
        s_cap = min(s_cap, math.sqrt(l_max * v))
    s = rng.uniform(0.0, s_cap)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    p = s * math.cos(theta)
    q = s * math.sin(theta)
    return (p, q, s * s / v, v)


def sample_storage_loss_manifold(rng: np.random.Generator, s_max: float,
                                 w_lo: float, w_hi: float, r_e: float,
                                 r_ct: float) -> tuple[float, float, float, float]:
    """One point with r_e p^2 + r_ct q^2 = p_loss * v; discharge side p >= 0."""
    v = rng.uniform(w_lo, w_hi)
    s = rng.uniform(0.0, s_max)
    theta = rng.uniform(-0.5 * math.pi, 0.5 * math.pi)
    p = s * math.cos(theta)
    q = s * math.sin(theta)
    p_loss = (r_e * p * p + r_ct * q * q) / v
    return (p, q, p_loss, v)


def soundness_check(hull: HullConstraintSet, manifold: str,
                    n_samples: int = 10_000, seed: int = 0) -> dict:
    """Sample the exact nonconvex manifold and evaluate every hull constraint.

    Returns a report with the maximum positive violation (<= 0 means the hull
    contains every sampled manifold point), the number of violating samples,
    a few witness points, and the worst absolute residual of the first cone
    at the sampled points ("tightness": for the line-flow hull that cone is
    the graph closure of the manifold, so the residual stays at round-off).
    """
    if manifold not in (EQ_LINE_FLOW, EQ_STORAGE_LOSS):
        raise ValueError(f"unknown manifold '{manifold}'")
    rng = np.random.default_rng(seed)
    s_max = hull.param("s_max")
    w_lo = hull.param("w_lo")
    w_hi = hull.param("w_hi")
    max_violation = 0.0
    n_violations = 0
    witnesses: list[tuple[float, float, float, float]] = []
    tightness = 0.0
    for _ in range(n_samples):
        if manifold == EQ_LINE_FLOW:
            z = sample_line_flow_manifold(rng, s_max, w_lo, w_hi)
        else:
            z = sample_storage_loss_manifold(rng, s_max, w_lo, w_hi,
                                             hull.param("r_e"), hull.param("r_ct"))
        viol = hull.max_violation(z)
        if viol > 1e-9:
            n_violations += 1
            if viol > max_violation and len(witnesses) < 5:
                witnesses.append(z)
        max_violation = max(max_violation, viol)
        tightness = max(tightness, abs(hull.cones[0].violation(z)))
    return {
        "manifold": manifold,
        "n_samples": n_samples,
        "seed": seed,
        "max_violation": max_violation,
        "n_violations": n_violations,
        "violating_points": [list(z) for z in witnesses],
        "first_cone_max_residual": tightness,
    }
