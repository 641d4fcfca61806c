import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import permutation_orders
from mpmdl.analytics import ParetoArchive, brute_force_front
from mpmdl.baselines import (
    ALGORITHMS,
    BaselineConfig,
    crowding_distance,
    encircle,
    keys_to_chromosome,
    keys_to_sequence,
    order_crossover,
    reinsertion_mutation,
    run_algorithm,
    run_mopso,
    run_nsga3_vanilla,
    run_nswoa,
    spiral,
)
from mpmdl.codec import decode
from mpmdl.evaluator import check_constraints, dominates, objectives
from mpmdl.evolve import RunTrace
from mpmdl.model import FIG4_EDGES, GeneratorConfig, generate_instance, make_line
from mpmdl.streams import derive_rng

FIG4_ORDERS = set(permutation_orders(6, FIG4_EDGES))


def test_presets_follow_parameter_table():
    s, m, l = (BaselineConfig.preset(k) for k in ("small", "medium", "large"))
    assert (s.pop_size, s.pc, s.pm, s.c1, s.inertia) == (20, 0.5, 0.05, 0.8, 0.5)
    assert (m.pop_size, m.pc, m.pm, m.c2, m.inertia) == (40, 0.7, 0.1, 1.5, 0.8)
    assert (l.pop_size, l.pc, l.pm, l.c1, l.inertia) == (80, 0.9, 0.15, 3.0, 1.2)
    assert s.iterations == m.iterations == l.iterations == 100
    assert s.evo().max_gen == 100


# random keys


def test_keys_decode_by_smallest_available_key(fig4):
    ln = fig4.line(1)
    assert keys_to_sequence([0.9, 0.1, 0.5, 0.3, 0.2, 0.0], ln) == (1, 2, 3, 5, 4, 6)
    assert keys_to_sequence([0.9, 0.6, 0.1, 0.2, 0.3, 0.0], ln) == (1, 3, 4, 2, 5, 6)
    assert keys_to_sequence([0.0, 0.1, 0.2, 0.3, 0.4, 0.5], ln) == (1, 2, 3, 4, 5, 6)


def test_keys_are_clamped(fig4):
    ln = fig4.line(1)
    assert keys_to_sequence([5, -3, 2, 0.5, 0.5, 0.5], ln) == keys_to_sequence([1, 0, 1, 0.5, 0.5, 0.5], ln)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-2, 3, allow_nan=False), min_size=6, max_size=6))
def test_keys_always_give_topological_orders(keys):
    assert keys_to_sequence(keys, make_line(1, [1] * 6, FIG4_EDGES)) in FIG4_ORDERS


def test_every_fig4_order_is_reachable_by_keys(fig4):
    rng = np.random.default_rng(0)
    seen = {keys_to_sequence(rng.random(6), fig4.line(1)) for _ in range(2000)}
    assert seen == FIG4_ORDERS


def test_keys_to_chromosome_splits_by_line(two_side_instance):
    keys = np.linspace(0, 1, two_side_instance.total_tasks)
    c = keys_to_chromosome(keys, two_side_instance)
    assert c.line(1) == (1, 2, 3, 4, 5, 6) and c.line(2) == () and c.line(3) == (1, 2, 3, 4)


# vanilla operators


def test_order_crossover_keeps_precedence():
    for a, b in itertools.product(sorted(FIG4_ORDERS), repeat=2):
        for cut in range(7):
            assert order_crossover(a, b, cut) in FIG4_ORDERS


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(FIG4_ORDERS)), st.integers(0, 2**32 - 1))
def test_reinsertion_keeps_precedence(seq, seed):
    ln = make_line(1, [1] * 6, FIG4_EDGES)
    assert reinsertion_mutation(seq, ln, random.Random(seed)) in FIG4_ORDERS


# swarm operators


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0, 1), min_size=4, max_size=4),
    st.lists(st.floats(0, 1), min_size=4, max_size=4),
    st.floats(0, 0.999),
)
def test_encircling_never_moves_away_from_leader(x, leader, A):
    x, leader = np.array(x), np.array(leader)
    y = encircle(x, leader, A, 1.0)
    assert np.all(np.abs(y - leader) <= np.abs(x - leader) + 1e-12)


def test_spiral_at_leader_stays():
    leader = np.array([0.2, 0.7])
    assert np.allclose(spiral(leader, leader, 0.3), leader)


def test_crowding_distance_boundaries_infinite():
    F = np.array([[0, 3], [1, 2], [2, 1], [3, 0]], dtype=float)
    cd = crowding_distance(F)
    assert np.isinf(cd[0]) and np.isinf(cd[3])
    assert np.allclose(cd[1:3], [4 / 3, 4 / 3])


# runs


CFG = BaselineConfig(pop_size=10, iterations=30)


@pytest.mark.parametrize("name", ["nsga3", "mopso", "nswoa"])
def test_fig4_oracle_front_found(fig4, name):
    oracle = brute_force_front(fig4)
    arch = run_algorithm(name, fig4, BaselineConfig(pop_size=10, iterations=100), seed=1)
    assert arch.vectors() == oracle.vectors()


@pytest.mark.parametrize("name", ALGORITHMS)
def test_shared_interface_and_determinism(mixed_instance, name):
    a = run_algorithm(name, mixed_instance, CFG, seed=3)
    b = run_algorithm(name, mixed_instance, CFG, seed=3)
    assert isinstance(a, ParetoArchive)
    assert a.vectors() == b.vectors()
    assert a.provenance["algorithm"] == name and a.provenance["seed"] == 3
    for e in a:
        assert e.chromosome.is_feasible(mixed_instance)
        assert check_constraints(e.schedule, mixed_instance).feasible
        assert objectives(e.schedule, mixed_instance) == e.vector
    for u, v in itertools.permutations(a.vectors(), 2):
        assert not dominates(u, v)


def test_unknown_algorithm(fig4):
    with pytest.raises(ValueError):
        run_algorithm("sa", fig4, CFG)


def test_vanilla_without_variation_stays_in_initial_population(two_side_instance):
    trace = RunTrace()
    arch = run_nsga3_vanilla(two_side_instance, BaselineConfig(pop_size=8, iterations=10, pc=0, pm=0), trace=trace)
    # decoding is deterministic here, so without variation nothing new can appear
    assert arch.vectors() == trace.elites[0]


def test_mopso_frozen_swarm_keeps_initial_front():
    inst = generate_instance(GeneratorConfig(tasks_per_line=(6, 0, 6), edge_density=0.3), 4)
    keys = np.random.default_rng(9).random((8, inst.total_tasks))
    cfg = BaselineConfig(pop_size=8, iterations=20, c1=0, c2=0, inertia=0)
    arch = run_mopso(inst, cfg, initial_keys=keys)
    initial = brute_force_from_keys(inst, keys)
    assert arch.vectors() == initial


def brute_force_from_keys(inst, keys):
    from mpmdl.analytics import pareto_filter

    vecs = []
    for k in keys:
        c = keys_to_chromosome(k, inst)
        vecs.append(objectives(decode(c, inst, derive_rng(0)), inst))
    return pareto_filter(vecs).vectors()


def test_mopso_identical_particles_single_schedule(fig4):
    keys = np.tile(np.linspace(0.1, 0.6, 6), (5, 1))
    arch = run_mopso(fig4, BaselineConfig(pop_size=5, iterations=1, c1=0, c2=0, inertia=0), initial_keys=keys)
    assert len(arch) == 1
    assert arch.entries[0].chromosome.line(1) == (1, 2, 3, 4, 5, 6)


def test_nswoa_determinism(two_side_instance):
    cfg = BaselineConfig(pop_size=10, iterations=20, seed=7)
    assert run_nswoa(two_side_instance, cfg).vectors() == run_nswoa(two_side_instance, cfg).vectors()
