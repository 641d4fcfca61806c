"""Objective values and constraint checks for decoded schedules."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .codec import Chromosome, Schedule, decode, schedule_to_assignment
from .model import Instance

REL_EPS = 1e-9


class ObjectiveVector(NamedTuple):
    """(station count, mean worker energy per station, total electrical energy); all minimised."""

    f1: int
    f2: float
    f3: float


def _exact_div(num, den):
    if isinstance(num, int) and isinstance(den, int):
        q, r = divmod(num, den)
        if r == 0:
            return q
    return num / den


def eval_f1(s: Schedule) -> int:
    return s.n_stations


def _exact_sum(values):
    """Integer sum for integer data, otherwise a correctly rounded float sum.

    Either way the result does not depend on the order of ``values``.
    """
    values = list(values)
    if all(isinstance(v, int) for v in values):
        return sum(values)
    return math.fsum(values)


def worker_energy(s: Schedule, inst: Instance):
    """Sum of time x energy rate over all assigned tasks."""
    lines = inst.lines
    return _exact_sum(
        lines[o - 1].tasks[task - 1].time * lines[o - 1].tasks[task - 1].energy_rate
        for _, _, st in s.stations()
        for o, task in st.tasks
    )


def eval_f2(s: Schedule, inst: Instance):
    """Mean worker energy per open station, or None when no station is open."""
    k = s.n_stations
    if k == 0:
        return None
    return _exact_div(worker_energy(s, inst), k)


class F3Terms(NamedTuple):
    ventilation_lighting: float
    disassembly: float
    standby: float

    @property
    def total(self):
        return self.ventilation_lighting + self.disassembly + self.standby


def f3_terms(s: Schedule, inst: Instance) -> F3Terms:
    r = inst.rates
    k = s.n_stations
    capacity = k * inst.takt
    station_time = _exact_sum(st.load for _, _, st in s.stations())
    lines = inst.lines
    assigned = _exact_sum(lines[o - 1].tasks[task - 1].time for _, _, st in s.stations() for o, task in st.tasks)
    return F3Terms(capacity * (r.e1 + r.e2), station_time * r.e3, (capacity - assigned) * r.e4)


def eval_f3(s: Schedule, inst: Instance):
    return f3_terms(s, inst).total


def objectives(s: Schedule, inst: Instance) -> ObjectiveVector:
    f2 = eval_f2(s, inst)
    return ObjectiveVector(eval_f1(s), 0 if f2 is None else f2, eval_f3(s, inst))


def evaluate(c: Chromosome, inst: Instance, rng: random.Random, **decode_kw) -> tuple[Schedule, ObjectiveVector]:
    s = decode(c, inst, rng, **decode_kw)
    return s, objectives(s, inst)


def close(a: float, b: float) -> bool:
    return a == b or math.isclose(a, b, rel_tol=REL_EPS, abs_tol=0.0)


def vectors_equal(u, v) -> bool:
    return u[0] == v[0] and close(u[1], v[1]) and close(u[2], v[2])


def dominates(u, v) -> bool:
    """Minimisation dominance; f1 compared exactly, f2/f3 with a relative epsilon."""
    if vectors_equal(u, v):
        return False
    for a, b in zip(u, v):
        if a > b and not close(a, b):
            return False
    return True


# --------------------------------------------------------------------------
# constraints

CONSTRAINTS = (
    "single_assignment",
    "cycle_time",
    "non_empty",
    "binary",
    "row_feeding",
    "load_identity",
)


@dataclass
class ConstraintResult:
    ok: bool = True
    witnesses: list = field(default_factory=list)

    def fail(self, witness) -> None:
        self.ok = False
        self.witnesses.append(witness)


@dataclass
class ConstraintReport:
    results: dict[str, ConstraintResult]

    @property
    def feasible(self) -> bool:
        return all(r.ok for r in self.results.values())

    def __getitem__(self, name: str) -> ConstraintResult:
        return self.results[name]

    def failures(self) -> list[str]:
        return [k for k, r in self.results.items() if not r.ok]


ALLOWED_LINES = {1: (1, 2), 2: (2, 3)}


def check_constraints(s: Schedule, inst: Instance) -> ConstraintReport:
    """Verify a (possibly corrupt) schedule; failures carry witnesses.

    ``binary`` is structural for a well-formed matrix view and only fails
    when one task is listed twice in the same station.
    """
    res = {name: ConstraintResult() for name in CONSTRAINTS}
    known = {(ln.line_index, t.id) for ln in inst.lines for t in ln.tasks}
    a = schedule_to_assignment(s, inst)
    for i, key in enumerate(a.tasks):
        placed = int(a.x[i].sum())
        if key not in known:
            res["single_assignment"].fail((key, "unknown task"))
        elif placed != 1:
            where = [a.stations[j] for j in a.x[i].nonzero()[0]]
            res["single_assignment"].fail((key, where))
        if a.x.size and a.x[i].max(initial=0) > 1:
            res["binary"].fail((key, "listed twice in one station"))
    lines = inst.lines
    for n, d, st in s.stations():
        if st.load > inst.takt:
            res["cycle_time"].fail(((n, d), st.load))
        if not st.tasks:
            res["non_empty"].fail((n, d))
        recomputed = 0
        for o, task in st.tasks:
            if o not in ALLOWED_LINES[n]:
                res["row_feeding"].fail(((o, task), (n, d)))
            if (o, task) in known:
                recomputed += lines[o - 1].tasks[task - 1].time
        if not (recomputed == st.load or math.isclose(recomputed, st.load, rel_tol=REL_EPS)):
            res["load_identity"].fail(((n, d), st.load, recomputed))
    return ConstraintReport(res)


def dominance_matrix(F) -> np.ndarray:
    """``D[i, j]`` is True when row ``i`` dominates row ``j`` under the epsilon rules of ``dominates``."""
    F = np.asarray(F, dtype=float)
    diff = F[:, None, :] - F[None, :, :]
    mag = np.maximum(np.abs(F[:, None, :]), np.abs(F[None, :, :]))
    tol = REL_EPS * mag
    tol[..., 0] = 0.0
    worse = (diff > tol).any(axis=2)
    better = (diff < -tol).any(axis=2)
    return better & ~worse
