"""Genetic-engine operators, schedules, determinism, and toy convergence."""

import numpy as np
import pytest

from gapulse.ga import (
    Chromosome,
    GAConfig,
    GeneRanges,
    Population,
    crossover,
    default_population_size,
    evolve,
    flip,
    init_population,
    luck_choose,
    mutate,
    mutation_schedule,
    optimize_pipeline,
    refine,
    RunRecord,
    stagnation_triggers,
)
from gapulse.propagator import PulseSequence, gate_fidelity, sequence_propagator
from gapulse.spinsys import SpinSystem

OMEGA = 120.88e3
Y90 = np.array([[1, -1], [1, 1]], dtype=complex) / np.sqrt(2)


def one_spin():
    return SpinSystem(1, [0.0], [0.0], [[0.0]], OMEGA)


def small_cfg(**kw):
    base = dict(rows=3, seed=123, population=30, max_delay_us=500,
                budget_main_s=30.0, budget_local_s=30.0)
    base.update(kw)
    return GAConfig(**base)


# ------------------------------------------------------------------ config

def test_config_validation():
    with pytest.raises(ValueError):
        GAConfig(rows=2, seed=1)  # below default rows_min
    GAConfig(rows=1, seed=1, rows_min=1)  # overridable
    with pytest.raises(ValueError):
        GAConfig(rows=3, seed=1, budget_main_s=0.0)
    with pytest.raises(ValueError):
        GAConfig(rows=3, seed=1, acceptance_threshold=0.0)
    with pytest.raises(ValueError):
        GAConfig(rows=3, seed=1, crossover_rate=1.5)


def test_default_population_interpolation():
    assert default_population_size(3) == 350
    assert default_population_size(20) == 750
    assert default_population_size(11) == round(350 + 400 * 8 / 17)


# -------------------------------------------------------- init_population

def test_init_population_deterministic_and_legal():
    cfg = small_cfg(max_tau_us=39, population=10)
    rng = np.random.default_rng(0)
    pop = init_population(cfg, rng)
    pop2 = init_population(cfg, np.random.default_rng(0))
    assert len(pop.members) == 10
    for a, b in zip(pop.members, pop2.members):
        assert np.array_equal(a.genes, b.genes)
    for m in pop.members:
        g = m.genes
        assert g.shape == (3, 4)
        assert g[:, 0].min() >= 0 and g[:, 0].max() <= 39
        assert set(np.unique(g[:, 1])) <= {0, 1}
        assert g[:, 2].min() >= 0 and g[:, 2].max() < 36000
        assert g[:, 3].min() >= 0 and g[:, 3].max() <= 500


def test_init_population_distinct_seeds_differ():
    cfg = small_cfg(max_tau_us=39, population=10)
    pop_a = init_population(cfg, np.random.default_rng(1))
    pop_b = init_population(cfg, np.random.default_rng(2))
    assert any(not np.array_equal(a.genes, b.genes)
               for a, b in zip(pop_a.members, pop_b.members))


def test_init_population_respects_max_delay():
    cfg = small_cfg(max_tau_us=39, max_delay_us=5000, population=40)
    pop = init_population(cfg, np.random.default_rng(3))
    assert max(m.genes[:, 3].max() for m in pop.members) <= 5000


# ------------------------------------------------------------ luck_choose

def test_luck_choose_worked_example():
    rng = np.random.default_rng(0)
    idx = luck_choose([0.2, 0.9, 0.5], rng, weights=[1.0, 0.1, 0.9])
    assert idx == 2


def test_luck_choose_equal_fitness_argmax_of_weights():
    rng = np.random.default_rng(0)
    assert luck_choose([0.7, 0.7], rng, weights=[0.3, 0.8]) == 1


def test_luck_choose_zero_fitness_never_wins():
    rng = np.random.default_rng(4)
    for _ in range(200):
        assert luck_choose([0.0, 0.3], rng) == 1


def test_luck_choose_monotone_in_fitness():
    """Over 1e5 draws on [0.1, 0.9] the fitter member wins strictly more often."""
    rng = np.random.default_rng(7)
    wins = np.zeros(2, dtype=int)
    for _ in range(100_000):
        wins[luck_choose([0.1, 0.9], rng)] += 1
    assert wins[1] > wins[0]


def test_luck_choose_rejects_unevaluated():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        luck_choose([0.2, np.nan], rng)


# -------------------------------------------------------------- crossover

def _chrom(rows, fill):
    return Chromosome(np.full((rows, 4), fill, dtype=np.int64))


def test_crossover_full_rectangle_swaps_parents():
    a, b = _chrom(3, 1), _chrom(3, 2)
    c1, c2 = crossover(a, b, np.random.default_rng(0), rect=(0, 2, 0, 3))
    assert np.array_equal(c1.genes, b.genes)
    assert np.array_equal(c2.genes, a.genes)


def test_crossover_single_cell():
    a, b = _chrom(3, 1), _chrom(3, 2)
    c1, c2 = crossover(a, b, np.random.default_rng(0), rect=(1, 1, 3, 3))
    assert c1.genes[1, 3] == 2 and c2.genes[1, 3] == 1
    diff = c1.genes != a.genes
    assert diff.sum() == 1


def test_crossover_identical_parents_identity():
    a = Chromosome(np.arange(12, dtype=np.int64).reshape(3, 4))
    c1, c2 = crossover(a, a.copy(), np.random.default_rng(5))
    assert np.array_equal(c1.genes, a.genes)
    assert np.array_equal(c2.genes, a.genes)


def test_crossover_does_not_mutate_parents():
    a, b = _chrom(3, 1), _chrom(3, 2)
    crossover(a, b, np.random.default_rng(1))
    assert np.all(a.genes == 1) and np.all(b.genes == 2)


# ------------------------------------------------------------------- flip

def test_flip_injected_rows():
    a = Chromosome(np.array([[i] * 4 for i in range(3)], dtype=np.int64))
    out = flip(a, np.random.default_rng(0), rows=(0, 2))
    assert np.array_equal(out.genes[:, 0], [2, 1, 0])


def test_flip_involution_and_multiset():
    a = Chromosome(np.arange(20, dtype=np.int64).reshape(5, 4))
    rng = np.random.default_rng(0)
    out = flip(flip(a, rng, rows=(1, 3)), rng, rows=(1, 3))
    assert np.array_equal(out.genes, a.genes)
    once = flip(a, rng, rows=(0, 4))
    assert sorted(map(tuple, once.genes)) == sorted(map(tuple, a.genes))


def test_flip_requires_two_rows():
    with pytest.raises(ValueError):
        flip(_chrom(1, 0), np.random.default_rng(0))


# ----------------------------------------------------------------- mutate

def test_mutate_valid_deterministic_and_differs():
    ranges = GeneRanges(39, 500)
    a = _chrom(3, 0)
    m1 = mutate(a, np.random.default_rng(9), ranges)
    m2 = mutate(a, np.random.default_rng(9), ranges)
    assert np.array_equal(m1.genes, m2.genes)
    assert not np.array_equal(m1.genes, a.genes)
    assert m1.genes[:, 2].max() < 36000 and m1.genes[:, 0].max() <= 39


# ------------------------------------------------------ mutation schedule

def test_mutation_schedule_start():
    cfg = small_cfg()
    rec = RunRecord()
    rec.append(0.5, np.zeros((3, 4), dtype=np.int64), 0.0, 0)
    assert mutation_schedule(rec, cfg) == cfg.mutation_initial


def test_mutation_schedule_clamps():
    cfg = small_cfg(mutation_initial=0.0, mutation_step=0.05,
                    mutation_step_trigger=2, mutation_ceiling=0.10)
    rec = RunRecord()
    for _ in range(7):  # 6 stagnant transitions -> 3 triggers
        rec.append(0.5, np.zeros((3, 4), dtype=np.int64), 0.0, 0)
    assert stagnation_triggers(rec.best_fitness, cfg.stagnation_eps, 2) == 3
    assert mutation_schedule(rec, cfg) == pytest.approx(0.10)


def test_mutation_schedule_monotone():
    cfg = small_cfg(mutation_step=0.01, mutation_step_trigger=3)
    rec = RunRecord()
    last = -1.0
    for i in range(40):
        rec.append(0.5 + (0.001 * (i == 20)) * i, np.zeros((3, 4), np.int64), 0.0, 0)
        p = mutation_schedule(rec, cfg)
        assert p >= last
        last = p


# ------------------------------------------------------------------ evolve

def test_evolve_identity_target_single_row():
    """All-zero genes solve the identity target exactly."""
    cfg = GAConfig(rows=1, seed=5, rows_min=1, population=40, max_delay_us=200,
                   budget_main_s=20.0, acceptance_threshold=0.999)
    rec = evolve(cfg, one_spin(), np.eye(2, dtype=complex))
    assert rec.best_fitness[-1] >= 0.999
    trace = rec.best_fitness
    assert all(b >= a for a, b in zip(trace, trace[1:]))


def test_evolve_rejects_bad_budget():
    cfg = small_cfg()
    object.__setattr__(cfg, "budget_main_s", -1.0)
    with pytest.raises(ValueError):
        evolve(cfg, one_spin(), np.eye(2, dtype=complex))


def test_evolve_deterministic_across_threads():
    cfg = small_cfg(max_generations=8, acceptance_threshold=0.9999999)
    runs = []
    for threads in (1, 4):
        rec = evolve(cfg, one_spin(), Y90, threads=threads)
        runs.append((rec.best_fitness, [g.tolist() for g in rec.best_genes],
                     rec.evals))
    assert runs[0] == runs[1]


def test_evolve_elitism_nondecreasing_100_generations():
    cfg = small_cfg(population=20, max_generations=100,
                    acceptance_threshold=0.99999999)
    rec = evolve(cfg, one_spin(), Y90)
    trace = rec.best_fitness
    assert len(trace) >= 50
    assert all(b >= a - 1e-15 for a, b in zip(trace, trace[1:]))


def test_evolve_fitness_cache_coherent():
    cfg = small_cfg(max_generations=5, acceptance_threshold=0.999999)
    sys = one_spin()
    rec = evolve(cfg, sys, Y90)
    for fit, genes in zip(rec.best_fitness, rec.best_genes):
        seq = PulseSequence.from_rows(genes)
        again = gate_fidelity(Y90, sequence_propagator(sys, seq))
        assert abs(fit - again) < 1e-12


# ------------------------------------------------------------------ refine

def _seeded_solution(cfg, sys, target):
    rec = evolve(cfg, sys, target)
    return rec.best()


def test_refine_requires_trigger():
    cfg = small_cfg()
    weak = Chromosome(np.zeros((3, 4), dtype=np.int64), 0.5)
    with pytest.raises(ValueError):
        refine(weak, cfg, one_spin(), Y90)


def test_refine_zero_budget_returns_seed():
    cfg = small_cfg(budget_local_s=0.0)
    seed = Chromosome(np.zeros((3, 4), dtype=np.int64), 0.9)
    out, rec = refine(seed, cfg, one_spin(), np.eye(2, dtype=complex))
    assert np.array_equal(out.genes, seed.genes)
    assert rec.stop_reason == "budget"


def test_refine_never_worse_and_improves_toy_seed():
    sys = one_spin()
    cfg = small_cfg(population=60, acceptance_threshold=0.99,
                    budget_local_s=20.0)
    # a deliberately imperfect seed: one pulse short of a quarter turn
    genes = np.array([[9, 0, 9000, 0], [0, 0, 0, 0], [0, 0, 0, 0]], dtype=np.int64)
    seed_fit = gate_fidelity(Y90, sequence_propagator(sys, PulseSequence.from_rows(genes)))
    assert 0.8 <= seed_fit < 0.99
    out, rec = refine(Chromosome(genes, seed_fit), cfg, sys, Y90)
    assert out.fitness >= seed_fit
    assert out.fitness >= 0.99


# ---------------------------------------------------------------- pipeline

def test_pipeline_reaches_acceptance_on_toy_problem():
    cfg = small_cfg(population=200, seed=42, budget_main_s=60.0,
                    budget_local_s=60.0)
    best, rec_main, rec_local = optimize_pipeline(cfg, one_spin(), Y90)
    assert best.fitness >= 0.99
