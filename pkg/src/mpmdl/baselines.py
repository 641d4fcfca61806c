"""Comparison optimisers sharing the evaluator: vanilla NSGA-III, MOPSO, NSWOA.

MOPSO and NSWOA search over random-key vectors (one key per task of every
line) which decode to precedence-feasible orders by repeatedly emitting the
available task with the smallest key.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass

import numpy as np

from .analytics import ArchiveEntry, ParetoArchive, pareto_filter
from .codec import Chromosome, encode_instance
from .evaluator import dominates, evaluate
from .evolve import EvoConfig, RunTrace, nondominated_sort, run_generational, run_insga3
from .model import Instance, LineSpec
from .streams import DECODE, SWARM, derive_rng


@dataclass(frozen=True)
class BaselineConfig:
    pop_size: int = 20
    iterations: int = 100
    pc: float = 0.5
    pm: float = 0.05
    c1: float = 0.8
    """Individual learning factor."""
    c2: float = 0.8
    """Group learning factor."""
    inertia: float = 0.5
    spiral_b: float = 1.0
    divisions: int = 5
    seed: int = 0
    open_policy: str = "random"

    @classmethod
    def preset(cls, size: str, **overrides) -> BaselineConfig:
        params = dict(BASELINE_PRESETS[size])
        params.update(overrides)
        return cls(**params)

    def evo(self) -> EvoConfig:
        return EvoConfig(
            pop_size=self.pop_size,
            max_gen=self.iterations,
            pc=self.pc,
            pm=self.pm,
            divisions=self.divisions,
            seed=self.seed,
            open_policy=self.open_policy,
        )


BASELINE_PRESETS = {
    "small": dict(pop_size=20, pc=0.5, pm=0.05, c1=0.8, c2=0.8, inertia=0.5),
    "medium": dict(pop_size=40, pc=0.7, pm=0.1, c1=1.5, c2=1.5, inertia=0.8),
    "large": dict(pop_size=80, pc=0.9, pm=0.15, c1=3.0, c2=3.0, inertia=1.2),
}


# --------------------------------------------------------------------------
# vanilla NSGA-III


def order_crossover(a: tuple[int, ...], b: tuple[int, ...], cut: int) -> tuple[int, ...]:
    """Head of ``a`` up to ``cut``, remaining tasks in ``b``'s order; keeps precedence."""
    head = a[:cut]
    seen = set(head)
    return head + tuple(t for t in b if t not in seen)


def reinsertion_mutation(seq: tuple[int, ...], line: LineSpec, rng: random.Random) -> tuple[int, ...]:
    """Move one task to a random slot between its last predecessor and first successor."""
    g = line.precedence
    task = seq[rng.randrange(len(seq))]
    rest = [t for t in seq if t != task]
    pos = {t: i for i, t in enumerate(rest)}
    lo = max((pos[p] + 1 for p in g.preds[task]), default=0)
    hi = min((pos[s] for s in g.succs[task]), default=len(rest))
    slot = rng.randint(lo, hi)
    return tuple(rest[:slot] + [task] + rest[slot:])


def run_nsga3_vanilla(inst: Instance, cfg: BaselineConfig, *, trace: RunTrace | None = None) -> ParetoArchive:
    ecfg = cfg.evo()

    def init(i: int, rng: random.Random) -> Chromosome:
        return encode_instance(inst, None, rng, use_rules=False)

    def vary(a: Chromosome, b: Chromosome, rng: random.Random):
        ca, cb = a, b
        for o in (1, 2, 3):
            sa, sb = a.line(o), b.line(o)
            if len(sa) > 1 and rng.random() < cfg.pc:
                cut = rng.randint(1, len(sa) - 1)
                ca = ca.replace(o, order_crossover(sa, sb, cut))
                cb = cb.replace(o, order_crossover(sb, sa, cut))
        for o in (1, 2, 3):
            line = inst.line(o)
            if line.n_tasks > 1 and rng.random() < cfg.pm:
                ca = ca.replace(o, reinsertion_mutation(ca.line(o), line, rng))
            if line.n_tasks > 1 and rng.random() < cfg.pm:
                cb = cb.replace(o, reinsertion_mutation(cb.line(o), line, rng))
        return ca, cb

    return run_generational(inst, ecfg, init, vary, algorithm="nsga3", trace=trace)


# --------------------------------------------------------------------------
# random keys


def keys_to_sequence(keys, line: LineSpec) -> tuple[int, ...]:
    g = line.precedence
    n = g.n_tasks
    remaining = [0] + [len(g.preds[t]) for t in range(1, n + 1)]
    heap = [(min(max(float(keys[t - 1]), 0.0), 1.0), t) for t in range(1, n + 1) if remaining[t] == 0]
    heapq.heapify(heap)
    seq = []
    while heap:
        _, t = heapq.heappop(heap)
        seq.append(t)
        for s in g.succs[t]:
            remaining[s] -= 1
            if remaining[s] == 0:
                heapq.heappush(heap, (min(max(float(keys[s - 1]), 0.0), 1.0), s))
    return tuple(seq)


def keys_to_chromosome(keys, inst: Instance) -> Chromosome:
    """Split a flat key vector by line and decode each slice."""
    seqs = []
    start = 0
    for ln in inst.lines:
        seqs.append(keys_to_sequence(keys[start : start + ln.n_tasks], ln))
        start += ln.n_tasks
    return Chromosome(tuple(seqs))


class _Evaluator:
    """Decode keys with the per-particle stream of iteration ``it``."""

    def __init__(self, inst: Instance, cfg: BaselineConfig):
        self.inst = inst
        self.cfg = cfg

    def __call__(self, keys, it: int, idx: int):
        c = keys_to_chromosome(keys, self.inst)
        s, f = evaluate(c, self.inst, derive_rng(self.cfg.seed, DECODE, it, idx), open_policy=self.cfg.open_policy)
        return c, s, f


def crowding_distance(F: np.ndarray) -> np.ndarray:
    n = len(F)
    if n <= 2:
        return np.full(n, np.inf)
    cd = np.zeros(n)
    for j in range(F.shape[1]):
        order = np.argsort(F[:, j], kind="stable")
        span = F[order[-1], j] - F[order[0], j]
        cd[order[0]] = cd[order[-1]] = np.inf
        if span == 0:
            continue
        cd[order[1:-1]] += (F[order[2:], j] - F[order[:-2], j]) / span
    return cd


def _prune(entries: list, cap: int) -> list:
    """Drop the most crowded entries until ``cap`` remain."""
    entries = list(entries)
    while len(entries) > cap:
        F = np.array([tuple(e[0]) for e in entries], dtype=float)
        cd = crowding_distance(F)
        del entries[int(np.argmin(cd))]
    return entries


def _external_archive(archive: list, new: list, cap: int) -> list:
    """Non-dominated (vector, keys) pairs, distinct vectors, crowding-pruned to ``cap``."""
    merged = pareto_filter([ArchiveEntry(v, k) for v, k in archive + new])
    return _prune([(e.vector, e.chromosome) for e in merged.entries], cap)


def _pick_leader(archive: list, rng: random.Random):
    """Binary tournament on crowding distance (larger wins)."""
    if len(archive) == 1:
        return archive[0][1]
    F = np.array([tuple(v) for v, _ in archive], dtype=float)
    cd = crowding_distance(F)
    a, b = rng.randrange(len(archive)), rng.randrange(len(archive))
    return archive[a if cd[a] >= cd[b] else b][1]


# --------------------------------------------------------------------------
# MOPSO


def run_mopso(inst: Instance, cfg: BaselineConfig, *, initial_keys: np.ndarray | None = None) -> ParetoArchive:
    """Particle swarm over random keys with a crowding-pruned leader archive."""
    dim = inst.total_tasks
    nprng = np.random.default_rng([cfg.seed & 0xFFFFFFFF, SWARM])
    rng = derive_rng(cfg.seed, SWARM)
    X = nprng.random((cfg.pop_size, dim)) if initial_keys is None else np.array(initial_keys, dtype=float)
    V = np.zeros_like(X)
    ev = _Evaluator(inst, cfg)
    state = [ev(X[i], 0, i) for i in range(cfg.pop_size)]
    pbest = X.copy()
    pbest_f = [s[2] for s in state]
    seen = [ArchiveEntry(s[2], s[0], s[1]) for s in state]
    leaders = _external_archive([], [(s[2], X[i].copy()) for i, s in enumerate(state)], cfg.pop_size)
    for it in range(1, cfg.iterations + 1):
        for i in range(cfg.pop_size):
            g = _pick_leader(leaders, rng)
            r1, r2 = nprng.random(dim), nprng.random(dim)
            V[i] = cfg.inertia * V[i] + cfg.c1 * r1 * (pbest[i] - X[i]) + cfg.c2 * r2 * (g - X[i])
            X[i] = np.clip(X[i] + V[i], 0.0, 1.0)
        new = []
        for i in range(cfg.pop_size):
            state[i] = ev(X[i], it, i)
            f = state[i][2]
            if dominates(f, pbest_f[i]) or (not dominates(pbest_f[i], f) and rng.random() < 0.5):
                pbest[i] = X[i].copy()
                pbest_f[i] = f
            new.append((f, X[i].copy()))
            seen.append(ArchiveEntry(f, state[i][0], state[i][1]))
        leaders = _external_archive(leaders, new, cfg.pop_size)
        seen = pareto_filter(seen).entries
    return pareto_filter(seen, {"algorithm": "mopso", "seed": cfg.seed, "instance": inst.digest()})


# --------------------------------------------------------------------------
# NSWOA


def encircle(x: np.ndarray, leader: np.ndarray, A, C) -> np.ndarray:
    """Shrinking encirclement: ``L - A * |C * L - x|``."""
    return leader - A * np.abs(C * leader - x)


def spiral(x: np.ndarray, leader: np.ndarray, l, b: float = 1.0) -> np.ndarray:
    """Logarithmic spiral around the leader."""
    return np.abs(leader - x) * np.exp(b * l) * np.cos(2 * np.pi * l) + leader


def _survive(vectors: list, n: int) -> list[int]:
    """Rank then crowding distance, as in NSGA-II."""
    chosen: list[int] = []
    for fr in nondominated_sort(vectors):
        if len(chosen) + len(fr) <= n:
            chosen.extend(fr)
        else:
            F = np.array([tuple(vectors[i]) for i in fr], dtype=float)
            cd = crowding_distance(F)
            order = sorted(range(len(fr)), key=lambda k: (-cd[k], fr[k]))
            chosen.extend(fr[k] for k in order[: n - len(chosen)])
        if len(chosen) >= n:
            break
    return chosen


def run_nswoa(inst: Instance, cfg: BaselineConfig) -> ParetoArchive:
    """Non-dominated sorting whale optimisation over random keys.

    The coefficient ``a`` decays linearly from 2 to 0; leaders are drawn
    from the first front of the current population.
    """
    dim = inst.total_tasks
    n = cfg.pop_size
    nprng = np.random.default_rng([cfg.seed & 0xFFFFFFFF, SWARM, 1])
    X = nprng.random((n, dim))
    ev = _Evaluator(inst, cfg)
    state = [ev(X[i], 0, i) for i in range(n)]
    seen = [ArchiveEntry(s[2], s[0], s[1]) for s in state]
    for it in range(1, cfg.iterations + 1):
        a = 2.0 - 2.0 * (it - 1) / max(cfg.iterations, 1)
        vecs = [s[2] for s in state]
        front0 = nondominated_sort(vecs)[0]
        Y = np.empty_like(X)
        for i in range(n):
            leader = X[front0[nprng.integers(len(front0))]]
            A = 2 * a * nprng.random() - a
            C = 2 * nprng.random()
            if nprng.random() < 0.5:
                if abs(A) < 1:
                    Y[i] = encircle(X[i], leader, A, C)
                else:
                    other = X[nprng.integers(n)]
                    Y[i] = encircle(X[i], other, A, C)
            else:
                Y[i] = spiral(X[i], leader, nprng.uniform(-1, 1), cfg.spiral_b)
        Y = np.clip(Y, 0.0, 1.0)
        child_state = [ev(Y[i], it, i) for i in range(n)]
        for cs in child_state:
            seen.append(ArchiveEntry(cs[2], cs[0], cs[1]))
        allX = np.vstack([X, Y])
        allS = state + child_state
        keep = _survive([s[2] for s in allS], n)
        X = allX[keep]
        state = [allS[k] for k in keep]
        seen = pareto_filter(seen).entries
    return pareto_filter(seen, {"algorithm": "nswoa", "seed": cfg.seed, "instance": inst.digest()})


# --------------------------------------------------------------------------
# shared entry point

ALGORITHMS = ("insga3", "nsga3", "mopso", "nswoa")


def run_algorithm(name: str, inst: Instance, cfg: BaselineConfig, seed: int | None = None) -> ParetoArchive:
    """Common ``(instance, config, seed) -> archive`` interface for all four optimisers."""
    if seed is not None:
        cfg = BaselineConfig(**{**cfg.__dict__, "seed": seed})
    if name == "insga3":
        return run_insga3(inst, cfg.evo())
    if name == "nsga3":
        return run_nsga3_vanilla(inst, cfg)
    if name == "mopso":
        return run_mopso(inst, cfg)
    if name == "nswoa":
        return run_nswoa(inst, cfg)
    raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
