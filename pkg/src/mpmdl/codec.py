"""Sequence encoding and station decoding.

``encode`` builds one feasible task order per line from the precedence
relation, steered by the hazardous / high-value rules and by a visit ledger
that favours rarely chosen tasks. ``decode`` walks the three orders and
packs tasks greedily into the two rows of shared workstations.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import Instance, LineSpec, PrecedenceGraph

ROW_OF_SIDE_LINE = {1: 0, 3: 1}


@dataclass(frozen=True)
class Chromosome:
    """One task order per line; ``seqs[o - 1]`` belongs to line ``o``."""

    seqs: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]

    @classmethod
    def of(cls, s1: Iterable[int] = (), s2: Iterable[int] = (), s3: Iterable[int] = ()) -> Chromosome:
        return cls((tuple(s1), tuple(s2), tuple(s3)))

    def line(self, o: int) -> tuple[int, ...]:
        return self.seqs[o - 1]

    def replace(self, o: int, seq: Sequence[int]) -> Chromosome:
        seqs = list(self.seqs)
        seqs[o - 1] = tuple(seq)
        return Chromosome(tuple(seqs))

    def is_feasible(self, inst: Instance) -> bool:
        return all(ln.precedence.is_topological(self.line(ln.line_index)) for ln in inst.lines)


@dataclass(frozen=True)
class Station:
    tasks: tuple[tuple[int, int], ...]
    """``(line, task id)`` entries in processing order."""
    load: float


@dataclass(frozen=True)
class Schedule:
    rows: tuple[tuple[Station, ...], tuple[Station, ...]]

    @property
    def k(self) -> tuple[int, int]:
        return (len(self.rows[0]), len(self.rows[1]))

    @property
    def n_stations(self) -> int:
        return len(self.rows[0]) + len(self.rows[1])

    def stations(self) -> Iterable[tuple[int, int, Station]]:
        """Yield ``(row, column, station)`` with 1-based row and column."""
        for n, row in enumerate(self.rows, start=1):
            for d, st in enumerate(row, start=1):
                yield n, d, st


# --------------------------------------------------------------------------
# equivalent task sets


def equivalence_cells(g: PrecedenceGraph) -> tuple[tuple[int, ...], ...]:
    """Partition tasks by identical immediate-predecessor and -successor sets."""
    groups: dict[tuple[frozenset[int], frozenset[int]], list[int]] = {}
    for t in range(1, g.n_tasks + 1):
        groups.setdefault((g.preds[t], g.succs[t]), []).append(t)
    return tuple(sorted(tuple(v) for v in groups.values()))


def instance_cells(inst: Instance) -> dict[int, tuple[tuple[int, ...], ...]]:
    return {ln.line_index: equivalence_cells(ln.precedence) for ln in inst.lines}


# --------------------------------------------------------------------------
# visit ledger


class VisitLedger:
    """Per-line, per-task selection counters; never decrease."""

    def __init__(self, sizes: dict[int, int] | None = None):
        self._counts: dict[int, list[int]] = {o: [0] * n for o, n in (sizes or {}).items()}
        self._lock = threading.Lock()

    @classmethod
    def for_instance(cls, inst: Instance) -> VisitLedger:
        return cls({ln.line_index: ln.n_tasks for ln in inst.lines})

    def _row(self, line: int) -> list[int]:
        return self._counts[line]

    def count(self, line: int, task: int) -> int:
        return self._counts[line][task - 1]

    def counts(self, line: int) -> tuple[int, ...]:
        return tuple(self._counts[line])

    def record(self, line: int, task: int) -> None:
        with self._lock:
            self._counts[line][task - 1] += 1

    def copy(self) -> VisitLedger:
        out = VisitLedger()
        with self._lock:
            out._counts = {o: list(c) for o, c in self._counts.items()}
        return out


# --------------------------------------------------------------------------
# encoder


def encode(
    line: LineSpec,
    ledger: VisitLedger | None,
    rng: random.Random,
    *,
    prefix: Sequence[int] = (),
    use_rules: bool = True,
) -> tuple[int, ...]:
    """Build a topological order of ``line``'s tasks, extending ``prefix``.

    At each step the candidates are the tasks whose predecessors are all
    placed. With several candidates the choice narrows to hazardous tasks,
    then high-value tasks, then the tasks with the lowest ledger count, and
    the final pick is uniform. ``use_rules=False`` skips the two flag
    filters; ``ledger=None`` skips the count filter. A task is recorded in
    the ledger only when it was chosen among several candidates; forced
    picks carry no exploration signal.
    """
    g = line.precedence
    n = g.n_tasks
    preds, succs = g.preds, g.succs
    remaining = [0] + [len(preds[t]) for t in range(1, n + 1)]
    seq = list(prefix)
    for t in seq:
        for s in succs[t]:
            remaining[s] -= 1
    placed = set(seq)
    cand = [t for t in range(1, n + 1) if t not in placed and remaining[t] == 0]
    tasks = line.tasks
    counts = ledger._row(line.line_index) if ledger is not None else None
    while cand:
        if len(cand) == 1:
            pick = cand[0]
        else:
            pool = cand
            if use_rules:
                pool = [t for t in pool if tasks[t - 1].hazardous] or pool
                pool = [t for t in pool if tasks[t - 1].high_value] or pool
            if counts is not None and len(pool) > 1:
                low = min(counts[t - 1] for t in pool)
                pool = [t for t in pool if counts[t - 1] == low]
            pick = pool[rng.randrange(len(pool))] if len(pool) > 1 else pool[0]
            if ledger is not None:
                ledger.record(line.line_index, pick)
        cand.remove(pick)
        seq.append(pick)
        for s in sorted(succs[pick]):
            remaining[s] -= 1
            if remaining[s] == 0:
                cand.append(s)
    return tuple(seq)


def encode_instance(
    inst: Instance, ledger: VisitLedger | None, rng: random.Random, *, use_rules: bool = True
) -> Chromosome:
    return Chromosome(tuple(encode(ln, ledger, rng, use_rules=use_rules) for ln in inst.lines))


# --------------------------------------------------------------------------
# decoder


def middle_line_choice(load1: float, load2: float, t: float, takt: float, rng: random.Random) -> int | None:
    """Row (0 or 1) receiving a line-2 task, or None when neither current station fits.

    When both fit, the station left with less remaining time wins; ties are
    broken uniformly.
    """
    fit1 = load1 + t <= takt
    fit2 = load2 + t <= takt
    if fit1 and fit2:
        rem1 = takt - (load1 + t)
        rem2 = takt - (load2 + t)
        if rem1 < rem2:
            return 0
        if rem2 < rem1:
            return 1
        return rng.randrange(2)
    if fit1:
        return 0
    if fit2:
        return 1
    return None


def decode(c: Chromosome, inst: Instance, rng: random.Random, *, open_policy: str = "random") -> Schedule:
    """Assign the chromosome's tasks to shared workstations.

    Lines with tasks left are drawn uniformly, one task per draw. Side-line
    tasks go to the current station of their row or open a new one there.
    Middle-line tasks use ``middle_line_choice``; when neither station fits
    a new station is opened in a random row (``open_policy="random"``) or
    in the row with less total load (``"min_load"``, ties to row 1).
    """
    if open_policy not in ("random", "min_load"):
        raise ValueError(f"unknown open_policy {open_policy!r}")
    ct = inst.takt
    times = [inst.line(o).times for o in (1, 2, 3)]
    seqs = c.seqs
    pos = [0, 0, 0]
    active = [o for o in (1, 2, 3) if seqs[o - 1]]
    cur_tasks: list[list[tuple[int, int]]] = [[], []]
    cur_load = [0, 0]
    done: list[list[Station]] = [[], []]
    row_total = [0, 0]

    def close(r: int) -> None:
        done[r].append(Station(tuple(cur_tasks[r]), cur_load[r]))
        cur_tasks[r] = []
        cur_load[r] = 0

    while active:
        o = active[rng.randrange(len(active))] if len(active) > 1 else active[0]
        idx = o - 1
        task = seqs[idx][pos[idx]]
        t = times[idx][task - 1]
        if o == 2:
            r = middle_line_choice(cur_load[0], cur_load[1], t, ct, rng)
            if r is None:
                if open_policy == "random":
                    r = rng.randrange(2)
                else:
                    r = 0 if row_total[0] <= row_total[1] else 1
                close(r)
        else:
            r = ROW_OF_SIDE_LINE[o]
            if cur_load[r] + t > ct:
                close(r)
        cur_tasks[r].append((o, task))
        cur_load[r] += t
        row_total[r] += t
        pos[idx] += 1
        if pos[idx] == len(seqs[idx]):
            active.remove(o)
    for r in (0, 1):
        if cur_tasks[r]:
            close(r)
    return Schedule((tuple(done[0]), tuple(done[1])))


# --------------------------------------------------------------------------
# assignment view


@dataclass(frozen=True)
class Assignment:
    """Binary task-to-station matrix; ``x[i, j]`` counts placements of ``tasks[i]`` in ``stations[j]``."""

    tasks: tuple[tuple[int, int], ...]
    stations: tuple[tuple[int, int], ...]
    x: np.ndarray


def schedule_to_assignment(s: Schedule, inst: Instance | None = None) -> Assignment:
    """Matrix view of a schedule.

    Rows cover every task of ``inst`` when given (so missing tasks show as
    zero rows), otherwise every task that appears in the schedule.
    """
    seen: list[tuple[int, int]] = []
    if inst is not None:
        seen = [(ln.line_index, t.id) for ln in inst.lines for t in ln.tasks]
    index = {key: i for i, key in enumerate(seen)}
    stations = []
    entries = []
    for n, d, st in s.stations():
        j = len(stations)
        stations.append((n, d))
        for key in st.tasks:
            if key not in index:
                index[key] = len(seen)
                seen.append(key)
            entries.append((index[key], j))
    x = np.zeros((len(seen), len(stations)), dtype=np.int64)
    for i, j in entries:
        x[i, j] += 1
    return Assignment(tuple(seen), tuple(stations), x)
