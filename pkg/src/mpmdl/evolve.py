"""Reference-point NSGA-III engine with equivalent-task-set operators.

The generic loop (``run_generational``) is shared with the vanilla NSGA-III
baseline; ``run_insga3`` plugs in ledger-guided initialisation, the
equivalent-cell crossover and the prefix-preserving re-encoding mutation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .analytics import ArchiveEntry, ParetoArchive, pareto_filter
from .codec import (
    Chromosome,
    Schedule,
    VisitLedger,
    encode,
    encode_instance,
    instance_cells,
)
from .evaluator import ObjectiveVector, dominance_matrix, evaluate
from .model import Instance
from .streams import DECODE, INIT, MATING, VARY, derive_rng

PRESETS = {
    "small": dict(pop_size=20, pc=0.5, pm=0.05),
    "medium": dict(pop_size=40, pc=0.7, pm=0.1),
    "large": dict(pop_size=80, pc=0.9, pm=0.15),
}


@dataclass(frozen=True)
class EvoConfig:
    pop_size: int = 200
    max_gen: int = 20
    pc: float = 0.8
    pm: float = 0.1
    n_obj: int = 3
    divisions: int = 5
    seed: int = 0
    use_rules: bool = True
    open_policy: str = "random"

    def __post_init__(self):
        if self.pop_size <= 0 or self.max_gen <= 0:
            raise ValueError("pop_size and max_gen must be positive")
        if not (0 <= self.pc <= 1 and 0 <= self.pm <= 1):
            raise ValueError("pc and pm must lie in [0, 1]")
        if self.divisions < 1:
            raise ValueError("divisions must be at least 1")

    @classmethod
    def preset(cls, size: str, **overrides) -> EvoConfig:
        """Scale presets with the 100-iteration comparison budget."""
        params = dict(PRESETS[size], max_gen=100)
        params.update(overrides)
        return cls(**params)


@dataclass
class Individual:
    chromosome: Chromosome
    schedule: Schedule
    objectives: ObjectiveVector

    def entry(self) -> ArchiveEntry:
        return ArchiveEntry(self.objectives, self.chromosome, self.schedule)


def _chromosome(x) -> Chromosome:
    return x.chromosome if isinstance(x, Individual) else x


# --------------------------------------------------------------------------
# reference points, sorting and niching


def reference_points(n_obj: int, divisions: int) -> np.ndarray:
    """Das-Dennis lattice: every vector with entries in {0, 1/M, ..., 1} summing to 1."""
    if n_obj < 2 or divisions < 1:
        raise ValueError("need n_obj >= 2 and divisions >= 1")
    pts = []
    for bars in combinations(range(divisions + n_obj - 1), n_obj - 1):
        parts = []
        prev = -1
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(divisions + n_obj - 2 - prev)
        pts.append(parts)
    return np.array(pts, dtype=float) / divisions


def nondominated_sort(vectors) -> list[list[int]]:
    """Indices grouped into successive non-dominated fronts."""
    F = np.asarray([tuple(v) for v in vectors], dtype=float).reshape(-1, 3 if len(vectors) == 0 else len(vectors[0]))
    n = len(F)
    if n == 0:
        return []
    dom = dominance_matrix(F)
    counts = dom.sum(axis=0)
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in np.nonzero(dom[i])[0]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return fronts


def _normalize(F: np.ndarray) -> np.ndarray:
    """Translate by the ideal point and scale by hyperplane intercepts.

    Falls back to the (max - ideal) range when the extreme points give a
    degenerate hyperplane.
    """
    ideal = F.min(axis=0)
    T = F - ideal
    m = F.shape[1]
    nadir_range = T.max(axis=0)
    weights = np.full((m, m), 1e-6) + np.eye(m) * (1 - 1e-6)
    extremes = np.array([T[np.argmin((T / w).max(axis=1))] for w in weights])
    intercepts = None
    try:
        b = np.linalg.solve(extremes, np.ones(m))
        with np.errstate(divide="ignore"):
            cand = 1.0 / b
        if np.all(np.isfinite(cand)) and np.all(cand > 1e-10):
            intercepts = cand
    except np.linalg.LinAlgError:
        pass
    if intercepts is None:
        intercepts = nadir_range
    intercepts = np.where(intercepts > 1e-12, intercepts, 1.0)
    return T / intercepts


def associate(Fn: np.ndarray, refs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest reference direction by perpendicular distance; returns (index, distance)."""
    unit = refs / np.linalg.norm(refs, axis=1, keepdims=True)
    proj = Fn @ unit.T
    dist = np.sqrt(np.maximum((Fn**2).sum(axis=1, keepdims=True) - proj**2, 0.0))
    idx = dist.argmin(axis=1)
    return idx, dist[np.arange(len(Fn)), idx]


def niche_select(
    vectors, fronts: Sequence[Sequence[int]], refs: np.ndarray, n: int, rng: random.Random
) -> list[int]:
    """Survivor indices: whole fronts first, then niche-preserving picks from the boundary front."""
    chosen: list[int] = []
    last: list[int] = []
    for fr in fronts:
        if len(chosen) + len(fr) <= n:
            chosen.extend(fr)
            if len(chosen) == n:
                return chosen
        else:
            last = list(fr)
            break
    if not last:
        return chosen
    members = chosen + last
    F = np.asarray([tuple(vectors[i]) for i in members], dtype=float)
    Fn = _normalize(F)
    ref_idx, dist = associate(Fn, refs)
    niche = np.zeros(len(refs), dtype=int)
    for k in range(len(chosen)):
        niche[ref_idx[k]] += 1
    pool: dict[int, list[int]] = {}
    for k in range(len(chosen), len(members)):
        pool.setdefault(int(ref_idx[k]), []).append(k)
    open_refs = set(pool)
    while len(chosen) < n:
        low = min(niche[j] for j in open_refs)
        j = rng.choice(sorted(r for r in open_refs if niche[r] == low))
        cands = pool[j]
        if niche[j] == 0:
            dmin = min(dist[k] for k in cands)
            ties = [k for k in cands if dist[k] == dmin]
            k = ties[rng.randrange(len(ties))]
        else:
            k = cands[rng.randrange(len(cands))]
        cands.remove(k)
        chosen.append(members[k])
        niche[j] += 1
        if not cands:
            open_refs.discard(j)
    return chosen


def niche_counts(vectors, refs: np.ndarray) -> np.ndarray:
    """Crowding of each individual's reference direction within the population."""
    F = np.asarray([tuple(v) for v in vectors], dtype=float)
    idx, _ = associate(_normalize(F), refs)
    counts = np.bincount(idx, minlength=len(refs))
    return counts[idx]


def tournament(ranks: Sequence[int], crowd: Sequence[int], k: int, rng: random.Random) -> list[int]:
    """Binary tournament on (rank, niche count); ties resolved uniformly."""
    n = len(ranks)
    out = []
    for _ in range(k):
        a, b = rng.randrange(n), rng.randrange(n)
        ka, kb = (ranks[a], crowd[a]), (ranks[b], crowd[b])
        if ka < kb:
            out.append(a)
        elif kb < ka:
            out.append(b)
        else:
            out.append(a if rng.random() < 0.5 else b)
    return out


# --------------------------------------------------------------------------
# equivalent-cell operators


def cell_exchange(seq: Sequence[int], x: int, y: int) -> tuple[int, ...]:
    """Exchange two equivalent tasks.

    Adjacent tasks are swapped. Otherwise the tasks in between are moved to
    follow the pair, which is then swapped: ``a B b -> b a B``.
    """
    seq = list(seq)
    i, j = sorted((seq.index(x), seq.index(y)))
    if j - i == 1:
        seq[i], seq[j] = seq[j], seq[i]
        return tuple(seq)
    block = seq[i + 1 : j]
    return tuple(seq[:i] + [seq[j], seq[i]] + block + seq[j + 1 :])


def crossover(a, b, cells: dict[int, Sequence[Sequence[int]]], pc: float, rng: random.Random):
    """Equivalent-cell crossover; returns two chromosomes.

    Per line, with probability ``pc``, one multi-task cell and two of its
    tasks are drawn and ``cell_exchange`` is applied to both parents'
    sequences with the same pair. Lines without such a cell are copied.
    """
    ca, cb = _chromosome(a), _chromosome(b)
    for o in (1, 2, 3):
        if rng.random() >= pc:
            continue
        eligible = [c for c in cells.get(o, ()) if len(c) > 1]
        if not eligible:
            continue
        cell = eligible[rng.randrange(len(eligible))]
        x, y = rng.sample(list(cell), 2)
        ca = ca.replace(o, cell_exchange(ca.line(o), x, y))
        cb = cb.replace(o, cell_exchange(cb.line(o), x, y))
    return ca, cb


def mutate(
    a,
    inst: Instance,
    cells: dict[int, Sequence[Sequence[int]]],
    ledger: VisitLedger | None,
    pm: float,
    rng: random.Random,
    *,
    use_rules: bool = True,
) -> Chromosome:
    """Keep each mutated line's prefix up to the earliest task of a random cell and re-encode the rest."""
    c = _chromosome(a)
    for o in (1, 2, 3):
        seq = c.line(o)
        if not seq or rng.random() >= pm:
            continue
        line_cells = [cl for cl in cells.get(o, ()) if cl]
        cell = line_cells[rng.randrange(len(line_cells))]
        cut = min(seq.index(t) for t in cell)
        c = c.replace(o, encode(inst.line(o), ledger, rng, prefix=seq[: cut + 1], use_rules=use_rules))
    return c


# --------------------------------------------------------------------------
# generic generational loop

InitFn = Callable[[int, random.Random], Chromosome]
VaryFn = Callable[[Chromosome, Chromosome, random.Random], tuple[Chromosome, Chromosome]]


@dataclass
class RunTrace:
    """Per-generation snapshots of the cumulative elite archive."""

    elite_sizes: list[int] = field(default_factory=list)
    elites: list[list[ObjectiveVector]] = field(default_factory=list)


def run_generational(
    inst: Instance,
    cfg: EvoConfig,
    init: InitFn,
    vary: VaryFn,
    *,
    algorithm: str,
    trace: RunTrace | None = None,
) -> ParetoArchive:
    """NSGA-III loop: tournament mating, variation, (mu + lambda) niching survival.

    Every offspring, including unchanged copies, is decoded with its own
    stream keyed by (seed, generation, index). The returned archive is the
    cumulative non-dominated set of everything evaluated, one entry per
    objective vector.
    """
    refs = reference_points(cfg.n_obj, cfg.divisions)
    seed = cfg.seed

    def evaluate_new(c: Chromosome, gen: int, idx: int) -> Individual:
        s, f = evaluate(c, inst, derive_rng(seed, DECODE, gen, idx), open_policy=cfg.open_policy)
        return Individual(c, s, f)

    pop = [evaluate_new(init(i, derive_rng(seed, INIT, i)), 0, i) for i in range(cfg.pop_size)]
    elite = pareto_filter([ind.entry() for ind in pop])
    if trace is not None:
        trace.elite_sizes.append(len(elite))
        trace.elites.append(elite.vectors())
    for gen in range(1, cfg.max_gen + 1):
        rng = derive_rng(seed, MATING, gen)
        vecs = [ind.objectives for ind in pop]
        ranks = [0] * len(pop)
        for r, fr in enumerate(nondominated_sort(vecs)):
            for i in fr:
                ranks[i] = r
        crowd = niche_counts(vecs, refs)
        parents = tournament(ranks, crowd, cfg.pop_size + cfg.pop_size % 2, rng)
        offspring: list[Individual] = []
        for pair in range(0, len(parents), 2):
            pa, pb = pop[parents[pair]], pop[parents[pair + 1]]
            ca, cb = vary(pa.chromosome, pb.chromosome, derive_rng(seed, VARY, gen, pair))
            for child in (ca, cb):
                if len(offspring) == cfg.pop_size:
                    break
                offspring.append(evaluate_new(child, gen, len(offspring)))
        merged = pop + offspring
        mvecs = [ind.objectives for ind in merged]
        survivors = niche_select(mvecs, nondominated_sort(mvecs), refs, cfg.pop_size, rng)
        pop = [merged[i] for i in survivors]
        elite = pareto_filter(elite.entries + [ind.entry() for ind in offspring])
        if trace is not None:
            trace.elite_sizes.append(len(elite))
            trace.elites.append(elite.vectors())
    elite.provenance = {"algorithm": algorithm, "seed": seed, "instance": inst.digest()}
    return elite


def run_insga3(
    inst: Instance,
    cfg: EvoConfig,
    *,
    ledger: VisitLedger | None = None,
    trace: RunTrace | None = None,
) -> ParetoArchive:
    """Improved NSGA-III: ledger-guided initialisation and equivalent-cell variation.

    ``ledger`` warm-starts the visit counts (it is updated in place); a
    fresh one is created otherwise.
    """
    if ledger is None:
        ledger = VisitLedger.for_instance(inst)
    cells = instance_cells(inst)

    def init(i: int, rng: random.Random) -> Chromosome:
        return encode_instance(inst, ledger, rng, use_rules=cfg.use_rules)

    def vary(a: Chromosome, b: Chromosome, rng: random.Random):
        ca, cb = crossover(a, b, cells, cfg.pc, rng)
        ca = mutate(ca, inst, cells, ledger, cfg.pm, rng, use_rules=cfg.use_rules)
        cb = mutate(cb, inst, cells, ledger, cfg.pm, rng, use_rules=cfg.use_rules)
        return ca, cb

    return run_generational(inst, cfg, init, vary, algorithm="insga3", trace=trace)
