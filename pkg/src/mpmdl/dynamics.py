"""Two-stage dynamic adjustment for fluctuating recycling volumes.

Stage 1 re-optimises the current line setup for a forecast within 25% of
the current volumes, reusing the visit ledger. Stage 2 reassigns the
vehicle models of the two side lines when the volume mix changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .analytics import ParetoArchive
from .codec import VisitLedger
from .errors import FluctuationTooLarge, Overload, ZeroDemand
from .evolve import EvoConfig, run_insga3
from .model import Instance, VehicleModel

AVAILABLE_S_PER_MONTH = 293_150
STAGE1_BAND = Fraction(1, 4)

FUEL, PEV, MIXED = VehicleModel.FUEL, VehicleModel.PEV, VehicleModel.MIXED


@dataclass(frozen=True)
class RecyclingVolumes:
    da_fv: float
    da_pev: float
    da_sl: float

    def __post_init__(self):
        if min(self.da_fv, self.da_pev, self.da_sl) < 0:
            raise ValueError("volumes must be non-negative")

    @property
    def da_t(self) -> float:
        return self.da_fv + self.da_pev

    def per_line_units(self) -> int:
        """Monthly vehicles per line when the total is split over three lines (half rounds up)."""
        return math.floor(Fraction(self.da_t) / 3 + Fraction(1, 2))

    def swapped(self) -> RecyclingVolumes:
        return RecyclingVolumes(self.da_pev, self.da_fv, self.da_sl)


@dataclass(frozen=True)
class LineAssignment:
    side1: VehicleModel
    side3: VehicleModel
    stage: int = 1
    middle: VehicleModel = MIXED

    @property
    def sides(self) -> tuple[VehicleModel, VehicleModel]:
        return (self.side1, self.side3)

    def same_setup(self, other: LineAssignment | None) -> bool:
        return other is not None and (self.side1, self.side3, self.middle) == (other.side1, other.side3, other.middle)

    def models(self) -> tuple[VehicleModel, VehicleModel, VehicleModel]:
        return (self.side1, self.middle, self.side3)


LEGAL_SIDES = {(FUEL, FUEL), (PEV, PEV), (FUEL, PEV)}


def takt_time(available_s: float, units: float) -> int:
    """Available seconds divided by demand, rounded down to whole seconds."""
    if units <= 0:
        raise ZeroDemand(f"demand must be positive, got {units}")
    return math.floor(Fraction(available_s) / Fraction(units))


def assign_line_models(v: RecyclingVolumes, current: LineAssignment | None = None) -> LineAssignment:
    """Side-line vehicle models for the given volumes.

    When the smaller volume fits on one line, the middle mixed line absorbs
    it and both sides take the majority model (equal volumes split the
    sides). Between one and two lines' worth, each side takes one model.
    From two lines' worth upward the rule table has no answer and
    ``Overload`` is raised.
    """
    if v.da_sl <= 0:
        raise ValueError("single-line capacity must be positive")
    low = min(v.da_fv, v.da_pev)
    if low <= v.da_sl:
        if v.da_fv < v.da_pev:
            sides = (PEV, PEV)
        elif v.da_pev < v.da_fv:
            sides = (FUEL, FUEL)
        else:
            sides = (FUEL, PEV)
    elif low < 2 * v.da_sl:
        sides = (FUEL, PEV)
    else:
        raise Overload(f"min(DA_fv, DA_pev) = {low} >= 2 x DA_sl = {2 * v.da_sl}")
    out = LineAssignment(*sides)
    stage = 1 if out.same_setup(current) else 2
    return LineAssignment(sides[0], sides[1], stage)


def vehicle_type_cover(assignment: LineAssignment, types_present) -> bool:
    """True when every recycled vehicle type is routed to at least one line."""
    accepted: set[VehicleModel] = set()
    for m in assignment.models():
        accepted |= {FUEL, PEV} if m is MIXED else {m}
    return set(types_present) <= accepted


def within_band(current: float, forecast: float, band: Fraction = STAGE1_BAND) -> bool:
    """Relative change at most ``band`` (inclusive); exact arithmetic."""
    c, f = Fraction(current), Fraction(forecast)
    if c == 0:
        return f == 0
    return abs(f - c) <= band * c


@dataclass
class Replan:
    takt: int
    instance: Instance
    archive: ParetoArchive
    ledger: VisitLedger


def stage1_replan(
    current: RecyclingVolumes,
    forecast: RecyclingVolumes,
    inst: Instance,
    cfg: EvoConfig,
    *,
    ledger: VisitLedger | None = None,
    available_s: float = AVAILABLE_S_PER_MONTH,
) -> Replan:
    """Re-optimise the unchanged line setup under the forecast's takt, warm-starting the ledger."""
    for name in ("da_fv", "da_pev"):
        if not within_band(getattr(current, name), getattr(forecast, name)):
            raise FluctuationTooLarge(
                f"{name} moves from {getattr(current, name)} to {getattr(forecast, name)}, beyond 25%;"
                " reassess the line models"
            )
    takt = takt_time(available_s, forecast.per_line_units())
    replanned = inst.with_takt(takt)
    ledger = ledger.copy() if ledger is not None else VisitLedger.for_instance(replanned)
    archive = run_insga3(replanned, cfg, ledger=ledger)
    return Replan(takt, replanned, archive, ledger)


# --------------------------------------------------------------------------
# monthly scenarios


@dataclass(frozen=True)
class MonthPlan:
    month: int
    volumes: RecyclingVolumes
    status: str
    """``ok``, ``overload`` or ``zero_demand``."""
    stage: int | None = None
    assignment: LineAssignment | None = None
    takt: int | None = None
    replan: str = "none"
    """``cold`` (fresh ledger), ``warm`` (ledger carried over) or ``none``."""


def plan_months(
    months: Sequence[tuple[int, float, float]], da_sl: float, available_s: float = AVAILABLE_S_PER_MONTH
) -> list[MonthPlan]:
    """Stage decisions month by month.

    The first feasible month bootstraps a stage-2 assignment. Later months
    keep stage 1 while the side-line models are unchanged, re-planning warm
    inside the 25% band and cold outside it; a model change is stage 2.
    """
    plans = []
    current: LineAssignment | None = None
    last: RecyclingVolumes | None = None
    for month, fv, pev in months:
        v = RecyclingVolumes(fv, pev, da_sl)
        try:
            a = assign_line_models(v, current)
        except Overload:
            plans.append(MonthPlan(month, v, "overload"))
            continue
        try:
            takt = takt_time(available_s, v.per_line_units())
        except ZeroDemand:
            plans.append(MonthPlan(month, v, "zero_demand"))
            continue
        if a.stage == 2:
            replan = "cold"
        elif within_band(last.da_fv, v.da_fv) and within_band(last.da_pev, v.da_pev):
            replan = "warm"
        else:
            replan = "cold"
        plans.append(MonthPlan(month, v, "ok", a.stage, a, takt, replan))
        current, last = a, v
    return plans
