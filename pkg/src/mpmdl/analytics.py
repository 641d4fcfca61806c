"""Pareto archives, quality indicators and the exhaustive reference front."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .codec import Chromosome, Schedule, decode
from .errors import EmptyFront, TooLarge
from .evaluator import ObjectiveVector, dominance_matrix, objectives, vectors_equal
from .model import Instance, iter_topological_orders
from .streams import derive_rng


class PointBeyondRef(UserWarning):
    """A front point does not lie inside the hypervolume reference box."""


@dataclass(frozen=True)
class ArchiveEntry:
    vector: ObjectiveVector
    chromosome: Chromosome | None = None
    schedule: Schedule | None = None


@dataclass
class ParetoArchive:
    """Mutually non-dominated entries with distinct objective vectors, sorted by vector."""

    entries: list[ArchiveEntry] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def vectors(self) -> list[ObjectiveVector]:
        return [e.vector for e in self.entries]

    def array(self) -> np.ndarray:
        return np.array([tuple(v) for v in self.vectors()], dtype=float).reshape(-1, 3)

    def best(self, objective: int) -> ArchiveEntry:
        """Entry minimising objective ``objective`` (0-based); ties go to the smaller vector."""
        return min(self.entries, key=lambda e: (e.vector[objective], tuple(e.vector)))


def _as_entry(p) -> ArchiveEntry:
    if isinstance(p, ArchiveEntry):
        return p
    return ArchiveEntry(ObjectiveVector(*p))


def pareto_filter(points: Iterable, provenance: dict | None = None) -> ParetoArchive:
    """Maximal non-dominated subset (minimisation), one entry per distinct vector.

    Among duplicates the first occurrence wins; the result is sorted by
    vector so it does not depend on input order.
    """
    entries = [_as_entry(p) for p in points]
    uniq: list[ArchiveEntry] = []
    for e in sorted(entries, key=lambda e: tuple(e.vector)):
        if not uniq or not vectors_equal(uniq[-1].vector, e.vector):
            uniq.append(e)
        # later duplicates in the sorted order are dropped; sorting is stable
    if not uniq:
        return ParetoArchive([], dict(provenance or {}))
    dom = dominance_matrix(np.array([tuple(e.vector) for e in uniq], dtype=float))
    keep = ~dom.any(axis=0)
    return ParetoArchive([e for e, k in zip(uniq, keep) if k], dict(provenance or {}))


# --------------------------------------------------------------------------
# hypervolume


def _hv2d(points: np.ndarray, ref: Sequence[float]) -> float:
    """Area dominated by 2-D points (already inside the box)."""
    if len(points) == 0:
        return 0.0
    pts = points[np.lexsort((points[:, 1], points[:, 0]))]
    area = 0.0
    best_y = ref[1]
    for x, y in pts:
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return area


def hypervolume(front, ref_point) -> float:
    """Exact dominated volume of a 3-objective front, by slicing along the first axis.

    Points not strictly inside the reference box are excluded with a
    ``PointBeyondRef`` warning listing them.
    """
    pts = np.asarray(front, dtype=float).reshape(-1, 3)
    ref = np.asarray(ref_point, dtype=float)
    inside = np.all(pts < ref, axis=1)
    if not inside.all():
        bad = [tuple(p) for p in pts[~inside]]
        warnings.warn(f"{len(bad)} point(s) outside reference box excluded: {bad}", PointBeyondRef, stacklevel=2)
        pts = pts[inside]
    if len(pts) == 0:
        return 0.0
    pts = pts[np.argsort(pts[:, 0], kind="stable")]
    xs = np.unique(pts[:, 0])
    volume = 0.0
    for i, x in enumerate(xs):
        nxt = xs[i + 1] if i + 1 < len(xs) else ref[0]
        slab = pts[pts[:, 0] <= x][:, 1:]
        volume += (nxt - x) * _hv2d(slab, ref[1:])
    return float(volume)


def igd(front, reference_front) -> float:
    """Mean distance from each reference point to its nearest front point."""
    ref = np.asarray(reference_front, dtype=float).reshape(-1, 3)
    pts = np.asarray(front, dtype=float).reshape(-1, 3)
    if len(ref) == 0:
        raise EmptyFront("reference front is empty")
    if len(pts) == 0:
        raise EmptyFront("front is empty")
    d = np.sqrt(((ref[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    return float(d.min(axis=1).mean())


@dataclass(frozen=True)
class Normalization:
    lower: tuple[float, float, float]
    upper: tuple[float, float, float]
    ref_point: tuple[float, float, float]
    """HV reference point in normalized coordinates."""

    def apply(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        lo = np.array(self.lower)
        span = np.array(self.upper) - lo
        span[span == 0] = 1.0
        return (pts - lo) / span


def comparison_normalization(fronts: Sequence, union_front) -> Normalization:
    """Min-max bounds over every compared point; reference at 1.1 x the union front's max."""
    allpts = np.vstack([np.asarray(f, dtype=float).reshape(-1, 3) for f in fronts])
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    raw_ref = np.asarray(union_front, dtype=float).reshape(-1, 3).max(axis=0) * 1.1
    norm = Normalization(tuple(lo), tuple(hi), (0.0, 0.0, 0.0))
    ref = norm.apply(raw_ref)[0]
    return Normalization(tuple(lo), tuple(hi), tuple(float(v) for v in ref))


# --------------------------------------------------------------------------
# exhaustive oracle

MAX_ORDERS_PER_LINE = 200


def _orders_capped(inst: Instance, cap: int) -> list[list[tuple[int, ...]]]:
    out = []
    for ln in inst.lines:
        orders = list(itertools.islice(iter_topological_orders(ln.precedence), cap + 1))
        if len(orders) > cap:
            raise TooLarge(f"line {ln.line_index} has more than {cap} feasible sequences")
        out.append(orders)
    return out


def brute_force_front(
    inst: Instance,
    decode_samples: int = 1,
    seed: int = 0,
    *,
    cap: int = MAX_ORDERS_PER_LINE,
    open_policy: str = "random",
) -> ParetoArchive:
    """Non-dominated set over every chromosome, each decoded ``decode_samples`` times.

    Without middle-line tasks each row only sees one line, so decoding is
    deterministic and a single sample is taken.
    """
    per_line = _orders_capped(inst, cap)
    if inst.line(2).n_tasks == 0:
        decode_samples = 1
    found = []
    for idx, combo in enumerate(itertools.product(*per_line)):
        c = Chromosome(tuple(combo))
        for s in range(decode_samples):
            sched = decode(c, inst, derive_rng(seed, idx, s), open_policy=open_policy)
            found.append(ArchiveEntry(objectives(sched, inst), c, sched))
    return pareto_filter(found, {"algorithm": "brute_force", "seed": seed, "instance": inst.digest()})


# --------------------------------------------------------------------------
# run summaries

OBJECTIVES = ("f1", "f2", "f3")


@dataclass(frozen=True)
class RunIndicators:
    algorithm: str
    seed: int
    hv: float
    igd: float
    n_points: int


@dataclass
class IndicatorReport:
    objective_stats: dict[tuple[str, str], tuple[float, float, float]]
    """``(algorithm, objective) -> (max, min, ave)``"""
    runs: list[RunIndicators]
    normalization: Normalization | None
    reference_front: list[ObjectiveVector]
    excluded_points: int = 0

    def algorithms(self) -> list[str]:
        seen: list[str] = []
        for alg, _ in self.objective_stats:
            if alg not in seen:
                seen.append(alg)
        return seen

    def hv_values(self, algorithm: str) -> list[float]:
        return [r.hv for r in self.runs if r.algorithm == algorithm]

    def igd_values(self, algorithm: str) -> list[float]:
        return [r.igd for r in self.runs if r.algorithm == algorithm]


def summarize(runs: Sequence[ParetoArchive]) -> IndicatorReport:
    """Table-style extremes/means per algorithm plus per-run HV and IGD.

    All runs form one comparison group: objectives are min-max normalised
    over every archive point, the reference front is the non-dominated
    union, and the HV reference point is 1.1 x the union front's maximum.
    """
    if not runs:
        raise ValueError("summarize needs at least one run")
    by_alg: dict[str, list[ObjectiveVector]] = {}
    for run in runs:
        alg = run.provenance.get("algorithm", "unknown")
        by_alg.setdefault(alg, []).extend(run.vectors())
    stats = {}
    for alg, vecs in by_alg.items():
        if not vecs:
            continue
        arr = np.array([tuple(v) for v in vecs], dtype=float)
        for j, name in enumerate(OBJECTIVES):
            col = arr[:, j]
            stats[(alg, name)] = (_plain(col.max()), _plain(col.min()), _plain(col.mean()))
    union = pareto_filter(v for run in runs for v in run.vectors())
    fronts = [run.array() for run in runs if len(run)]
    if not fronts:
        return IndicatorReport(stats, [], None, [])
    norm = comparison_normalization(fronts, union.array())
    ref_front = norm.apply(union.array())
    indicators = []
    excluded = 0
    for run in runs:
        alg = run.provenance.get("algorithm", "unknown")
        seed = run.provenance.get("seed", 0)
        if not len(run):
            indicators.append(RunIndicators(alg, seed, 0.0, math.inf, 0))
            continue
        pts = norm.apply(run.array())
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", PointBeyondRef)
            hv = hypervolume(pts, norm.ref_point)
        excluded += sum(1 for w in caught if issubclass(w.category, PointBeyondRef))
        indicators.append(RunIndicators(alg, seed, hv, igd(pts, ref_front), len(run)))
    return IndicatorReport(stats, indicators, norm, union.vectors(), excluded)


def _plain(x: float):
    """Integral floats come back as ints so integer data reports exactly."""
    x = float(x)
    return int(x) if x.is_integer() else x
