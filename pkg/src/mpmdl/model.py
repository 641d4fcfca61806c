"""Problem model for the three-line mixed-model disassembly layout.

Lines 1 and 3 feed one row of shared workstations each; the middle line 2
may use either row. Tasks carry their duration, worker energy rate and the
hazardous / high-value flags used by the sequence heuristics.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BadLineCount,
    CycleDetected,
    InfeasibleSpec,
    NonPositiveTakt,
    ParseError,
    TaskExceedsTakt,
    TooLarge,
    ValidationError,
)


class VehicleModel(str, enum.Enum):
    FUEL = "fuel"
    PEV = "pev"
    MIXED = "mixed"


@dataclass(frozen=True)
class Task:
    id: int
    time: float
    energy_rate: float = 0.0
    hazardous: bool = False
    high_value: bool = False


@dataclass(frozen=True)
class PrecedenceGraph:
    """Immediate-predecessor relation over tasks ``1..n_tasks``.

    An edge ``(n, m)`` means task ``n`` immediately precedes task ``m``.
    """

    n_tasks: int
    edges: frozenset[tuple[int, int]] = frozenset()

    @classmethod
    def from_edges(cls, n_tasks: int, edges) -> PrecedenceGraph:
        return cls(n_tasks, frozenset((int(a), int(b)) for a, b in edges))

    @cached_property
    def preds(self) -> dict[int, frozenset[int]]:
        out: dict[int, set[int]] = {t: set() for t in range(1, self.n_tasks + 1)}
        for a, b in self.edges:
            out.setdefault(b, set()).add(a)
        return {t: frozenset(s) for t, s in out.items()}

    @cached_property
    def succs(self) -> dict[int, frozenset[int]]:
        out: dict[int, set[int]] = {t: set() for t in range(1, self.n_tasks + 1)}
        for a, b in self.edges:
            out.setdefault(a, set()).add(b)
        return {t: frozenset(s) for t, s in out.items()}

    def matrix(self) -> np.ndarray:
        """Binary priority matrix ``P[n-1, m-1] = 1`` iff ``n`` immediately precedes ``m``."""
        p = np.zeros((self.n_tasks, self.n_tasks), dtype=np.int8)
        for a, b in self.edges:
            p[a - 1, b - 1] = 1
        return p

    def is_topological(self, seq: Sequence[int]) -> bool:
        if sorted(seq) != list(range(1, self.n_tasks + 1)):
            return False
        pos = {t: i for i, t in enumerate(seq)}
        return all(pos[a] < pos[b] for a, b in self.edges)

    def find_cycle(self) -> list[int] | None:
        """Return one cycle as a closed path ``[v0, ..., v0]``, or None if acyclic."""
        succs = self.succs
        color = dict.fromkeys(succs, 0)
        for root in sorted(succs):
            if color[root]:
                continue
            stack = [(root, iter(sorted(succs[root])))]
            path = [root]
            color[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[node] = 2
                    stack.pop()
                    path.pop()
                elif color.get(nxt, 0) == 1:
                    return path[path.index(nxt):] + [nxt]
                elif color.get(nxt, 0) == 0:
                    color[nxt] = 1
                    path.append(nxt)
                    stack.append((nxt, iter(sorted(succs.get(nxt, ())))))
        return None


@dataclass(frozen=True)
class LineSpec:
    line_index: int
    vehicle_model: VehicleModel
    tasks: tuple[Task, ...]
    precedence: PrecedenceGraph

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @cached_property
    def times(self) -> tuple[float, ...]:
        """Task durations indexed by ``id - 1``."""
        return tuple(t.time for t in self.tasks)

    @property
    def work_content(self) -> float:
        return sum(self.times)


@dataclass(frozen=True)
class Rates:
    """Station energy rates per second: ventilation, lighting, disassembly, standby."""

    e1: float = 0.0
    e2: float = 0.0
    e3: float = 0.0
    e4: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.e1, self.e2, self.e3, self.e4)


DEFAULT_RATES = Rates(20, 40, 90, 55)
DEFAULT_TAKT = 650


@dataclass(frozen=True)
class Instance:
    lines: tuple[LineSpec, LineSpec, LineSpec]
    takt: float
    rates: Rates = field(default_factory=Rates)

    def line(self, o: int) -> LineSpec:
        return self.lines[o - 1]

    @property
    def total_tasks(self) -> int:
        return sum(ln.n_tasks for ln in self.lines)

    def with_takt(self, takt: float) -> Instance:
        return validate_instance(Instance(self.lines, takt, self.rates))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(dumps_instance(self).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class InstanceStats:
    task_counts: tuple[int, int, int]
    work_content: tuple[float, float, float]
    row_lower_bounds: tuple[int, int]
    total_lower_bound: int


def instance_stats(inst: Instance) -> InstanceStats:
    work = tuple(ln.work_content for ln in inst.lines)
    lb1 = math.ceil(work[0] / inst.takt)
    lb2 = math.ceil(work[2] / inst.takt)
    total = max(math.ceil(sum(work) / inst.takt), lb1 + lb2)
    return InstanceStats(
        task_counts=tuple(ln.n_tasks for ln in inst.lines),
        work_content=work,
        row_lower_bounds=(lb1, lb2),
        total_lower_bound=total,
    )


# --------------------------------------------------------------------------
# validation


def validate_instance(raw: Instance) -> Instance:
    """Check every model invariant and return the instance unchanged."""
    if not raw.takt > 0:
        raise NonPositiveTakt(f"takt must be positive, got {raw.takt}")
    if len(raw.lines) != 3 or [ln.line_index for ln in raw.lines] != [1, 2, 3]:
        raise BadLineCount("an instance needs exactly 3 lines indexed 1, 2, 3")
    for name, r in zip(("e1", "e2", "e3", "e4"), raw.rates.as_tuple()):
        if r < 0:
            raise ValidationError(f"rate {name} must be non-negative, got {r}")
    for ln in raw.lines:
        o = ln.line_index
        if not isinstance(ln.vehicle_model, VehicleModel):
            raise ValidationError(f"line {o}: unknown vehicle model {ln.vehicle_model!r}")
        if o != 2 and ln.vehicle_model is VehicleModel.MIXED:
            raise ValidationError(f"line {o}: only the middle line may be mixed-model")
        if ln.precedence.n_tasks != len(ln.tasks):
            raise ValidationError(
                f"line {o}: {len(ln.tasks)} tasks but precedence covers {ln.precedence.n_tasks}"
            )
        for pos, task in enumerate(ln.tasks, start=1):
            if task.id != pos:
                raise ValidationError(f"line {o}: task ids must be 1..N in order, got {task.id} at {pos}")
            if not task.time > 0:
                raise TaskExceedsTakt(o, task.id, f"non-positive time {task.time}")
            if task.time > raw.takt:
                raise TaskExceedsTakt(o, task.id, f"time {task.time} > takt {raw.takt}")
            if task.energy_rate < 0:
                raise ValidationError(f"line {o}: task {task.id} has negative energy rate")
        n = ln.precedence.n_tasks
        for a, b in ln.precedence.edges:
            if not (1 <= a <= n and 1 <= b <= n):
                raise ValidationError(f"line {o}: edge ({a}, {b}) references unknown task")
        cycle = ln.precedence.find_cycle()
        if cycle is not None:
            raise CycleDetected(o, cycle)
    return raw


# --------------------------------------------------------------------------
# topological orders

MAX_COUNT_TASKS = 12


def topological_order_count(g: PrecedenceGraph, cap: int = MAX_COUNT_TASKS) -> int:
    """Exact number of linear extensions, by DP over subsets of placed tasks."""
    n = g.n_tasks
    if n > cap:
        raise TooLarge(f"{n} tasks exceeds the counting cap of {cap}")
    pred_mask = [0] * n
    for a, b in g.edges:
        pred_mask[b - 1] |= 1 << (a - 1)
    ways = [0] * (1 << n)
    ways[0] = 1
    for placed in range(1 << n):
        w = ways[placed]
        if not w:
            continue
        for t in range(n):
            bit = 1 << t
            if not placed & bit and pred_mask[t] & placed == pred_mask[t]:
                ways[placed | bit] += w
    return ways[(1 << n) - 1]


def iter_topological_orders(g: PrecedenceGraph) -> Iterator[tuple[int, ...]]:
    """Yield every topological order in lexicographic order."""
    indeg = {t: len(g.preds[t]) for t in range(1, g.n_tasks + 1)}
    seq: list[int] = []

    def rec():
        if len(seq) == g.n_tasks:
            yield tuple(seq)
            return
        for t in sorted(k for k, d in indeg.items() if d == 0):
            indeg[t] = -1
            for s in g.succs[t]:
                indeg[s] -= 1
            seq.append(t)
            yield from rec()
            seq.pop()
            for s in g.succs[t]:
                indeg[s] += 1
            indeg[t] = 0

    yield from rec()


# --------------------------------------------------------------------------
# synthetic instances

SIZE_TASKS = {"small": 20, "medium": 30, "large": 40}


@dataclass(frozen=True)
class GeneratorConfig:
    tasks_per_line: tuple[int, int, int] = (20, 20, 20)
    edge_density: float = 0.15
    time_range: tuple[int, int] = (20, 150)
    energy_range: tuple[float, float] = (0.03, 0.06)
    hazard_fraction: float = 0.1
    high_value_fraction: float = 0.15
    takt: float = DEFAULT_TAKT
    rates: Rates = DEFAULT_RATES
    models: tuple[VehicleModel, VehicleModel, VehicleModel] = (
        VehicleModel.FUEL,
        VehicleModel.MIXED,
        VehicleModel.FUEL,
    )

    @classmethod
    def preset(cls, size: str, **overrides) -> GeneratorConfig:
        if size not in SIZE_TASKS:
            raise InfeasibleSpec(f"unknown size {size!r}; expected one of {sorted(SIZE_TASKS)}")
        n = SIZE_TASKS[size]
        return cls(tasks_per_line=(n, n, n), **overrides)


def _transitive_reduction(n: int, edges: set[tuple[int, int]]) -> set[tuple[int, int]]:
    # edges go low -> high id, so processing targets in increasing order is topological
    succ = {i: set() for i in range(1, n + 1)}
    for a, b in edges:
        succ[a].add(b)
    reach: dict[int, set[int]] = {}
    for v in range(n, 0, -1):
        r: set[int] = set()
        for s in succ[v]:
            r |= reach[s]
        reach[v] = r | succ[v]
    kept = set()
    for a, b in edges:
        if not any(b in reach[s] for s in succ[a] if s != b):
            kept.add((a, b))
    return kept


def generate_instance(spec: GeneratorConfig, seed: int) -> Instance:
    """Seeded random instance; edges only run from lower to higher task ids."""
    lo, hi = spec.time_range
    if not 0 < lo <= hi:
        raise InfeasibleSpec(f"bad time range {spec.time_range}")
    if hi > spec.takt:
        raise InfeasibleSpec(f"time range upper bound {hi} exceeds takt {spec.takt}")
    if not 0 <= spec.edge_density <= 1:
        raise InfeasibleSpec("edge density must lie in [0, 1]")
    rng = random.Random(seed)
    lines = []
    for o, (n, model) in enumerate(zip(spec.tasks_per_line, spec.models), start=1):
        tasks = []
        for i in range(1, n + 1):
            tasks.append(
                Task(
                    id=i,
                    time=rng.randint(lo, hi),
                    energy_rate=round(rng.uniform(*spec.energy_range), 3),
                    hazardous=rng.random() < spec.hazard_fraction,
                    high_value=rng.random() < spec.high_value_fraction,
                )
            )
        edges = {(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1) if rng.random() < spec.edge_density}
        edges = _transitive_reduction(n, edges)
        lines.append(LineSpec(o, model, tuple(tasks), PrecedenceGraph.from_edges(n, edges)))
    return validate_instance(Instance(tuple(lines), spec.takt, spec.rates))


# --------------------------------------------------------------------------
# fixtures

FIG4_EDGES = ((1, 2), (1, 3), (3, 4), (3, 5), (2, 5), (4, 6), (5, 6))
FIG4_TIMES = (100, 200, 150, 120, 180, 90)


def fig4_line(line_index: int = 1, model: VehicleModel = VehicleModel.FUEL) -> LineSpec:
    """Six-task line with task 5 hazardous and task 3 high-value."""
    tasks = tuple(
        Task(i, t, 1, hazardous=(i == 5), high_value=(i == 3)) for i, t in enumerate(FIG4_TIMES, start=1)
    )
    return LineSpec(line_index, model, tasks, PrecedenceGraph.from_edges(6, FIG4_EDGES))


def empty_line(line_index: int, model: VehicleModel | None = None) -> LineSpec:
    if model is None:
        model = VehicleModel.MIXED if line_index == 2 else VehicleModel.FUEL
    return LineSpec(line_index, model, (), PrecedenceGraph(0))


def fig4_instance(rates: Rates = DEFAULT_RATES, takt: float = DEFAULT_TAKT) -> Instance:
    """The fig4 line on line 1; lines 2 and 3 empty."""
    return validate_instance(Instance((fig4_line(1), empty_line(2), empty_line(3)), takt, rates))


def make_line(
    line_index: int,
    times: Sequence[float],
    edges=(),
    energy: Sequence[float] | float = 1,
    hazardous=(),
    high_value=(),
    model: VehicleModel | None = None,
) -> LineSpec:
    """Convenience builder; ``hazardous``/``high_value`` list flagged task ids."""
    if model is None:
        model = VehicleModel.MIXED if line_index == 2 else VehicleModel.FUEL
    if not isinstance(energy, (list, tuple)):
        energy = [energy] * len(times)
    tasks = tuple(
        Task(i, t, e, i in set(hazardous), i in set(high_value))
        for i, (t, e) in enumerate(zip(times, energy), start=1)
    )
    return LineSpec(line_index, model, tasks, PrecedenceGraph.from_edges(len(times), edges))


def make_instance(lines: Sequence[LineSpec], takt: float = DEFAULT_TAKT, rates: Rates = DEFAULT_RATES) -> Instance:
    full = {ln.line_index: ln for ln in lines}
    return validate_instance(
        Instance(tuple(full.get(o) or empty_line(o) for o in (1, 2, 3)), takt, rates)
    )


# --------------------------------------------------------------------------
# file I/O

_TOP_KEYS = {"takt_s", "rates", "lines"}
_RATE_KEYS = {"e1", "e2", "e3", "e4"}
_LINE_KEYS = {"line_index", "vehicle_model", "tasks", "edges"}
_TASK_KEYS = {"id", "time_s", "energy_rate", "hazardous", "high_value"}


def instance_to_dict(inst: Instance) -> dict:
    return {
        "takt_s": inst.takt,
        "rates": dict(zip(("e1", "e2", "e3", "e4"), inst.rates.as_tuple())),
        "lines": [
            {
                "line_index": ln.line_index,
                "vehicle_model": ln.vehicle_model.value,
                "tasks": [
                    {
                        "id": t.id,
                        "time_s": t.time,
                        "energy_rate": t.energy_rate,
                        "hazardous": t.hazardous,
                        "high_value": t.high_value,
                    }
                    for t in ln.tasks
                ],
                "edges": [list(e) for e in sorted(ln.precedence.edges)],
            }
            for ln in inst.lines
        ],
    }


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def _check_keys(obj, expected: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    missing = expected - obj.keys()
    if missing:
        raise ParseError(f"{where}: missing field(s) {sorted(missing)}")
    extra = obj.keys() - expected
    if extra:
        raise ParseError(f"{where}: unknown field(s) {sorted(extra)}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return value


def _flag(value, where: str) -> bool:
    if not isinstance(value, bool):
        raise ParseError(f"{where}: expected true/false, got {value!r}")
    return value


def instance_from_dict(doc) -> Instance:
    _check_keys(doc, _TOP_KEYS, "instance")
    _check_keys(doc["rates"], _RATE_KEYS, "rates")
    rates = Rates(*(_number(doc["rates"][k], f"rates.{k}") for k in ("e1", "e2", "e3", "e4")))
    if not isinstance(doc["lines"], list):
        raise ParseError("lines: expected an array")
    lines = []
    for li, raw in enumerate(doc["lines"]):
        where = f"lines[{li}]"
        _check_keys(raw, _LINE_KEYS, where)
        try:
            model = VehicleModel(raw["vehicle_model"])
        except ValueError:
            raise ParseError(f"{where}.vehicle_model: unknown model {raw['vehicle_model']!r}") from None
        if not isinstance(raw["tasks"], list) or not isinstance(raw["edges"], list):
            raise ParseError(f"{where}: tasks and edges must be arrays")
        tasks = []
        for ti, t in enumerate(raw["tasks"]):
            tw = f"{where}.tasks[{ti}]"
            _check_keys(t, _TASK_KEYS, tw)
            tasks.append(
                Task(
                    id=int(_number(t["id"], f"{tw}.id")),
                    time=_number(t["time_s"], f"{tw}.time_s"),
                    energy_rate=_number(t["energy_rate"], f"{tw}.energy_rate"),
                    hazardous=_flag(t["hazardous"], f"{tw}.hazardous"),
                    high_value=_flag(t["high_value"], f"{tw}.high_value"),
                )
            )
        edges = []
        for ei, e in enumerate(raw["edges"]):
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) for v in e)):
                raise ParseError(f"{where}.edges[{ei}]: expected an [n, m] integer pair")
            edges.append(tuple(e))
        line_index = raw["line_index"]
        if not isinstance(line_index, int):
            raise ParseError(f"{where}.line_index: expected an integer")
        lines.append(LineSpec(line_index, model, tuple(tasks), PrecedenceGraph.from_edges(len(tasks), edges)))
    takt = _number(doc["takt_s"], "takt_s")
    return validate_instance(Instance(tuple(lines), takt, rates))


def read_instance(path) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return instance_from_dict(doc)


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst), encoding="utf-8")
