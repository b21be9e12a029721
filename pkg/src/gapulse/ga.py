"""Genetic search over hard-pulse/delay sequences.

Individuals are N x 4 integer gene matrices with columns
(tau_us, sign, phase_centideg, delay_us), decoded row-by-row into a
PulseSequence.  The search has two stages: a global stage over the full
gene ranges (`evolve`), and a local stage (`refine`) restricted to a
shrinking neighborhood of a promising individual.

Reproducibility: the coordinator draws all randomness from generators
derived deterministically from (seed, stage, generation).  Fitness
evaluation is pure, so results are identical for any evaluation
concurrency.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .spinsys import SpinSystem
from .propagator import (
    PHASE_STEPS,
    PulseSequence,
    gate_fidelity,
    max_pulse_width_us,
    sequence_propagator,
)

_STAGE_CODES = {"main": 1, "local": 2}


@dataclass(frozen=True)
class GAConfig:
    """Knobs for both search stages; only `rows` and `seed` have no usable default."""

    rows: int
    seed: int
    population: int | None = None          # default derived from rows
    max_delay_us: int = 5000
    max_tau_us: int | None = None          # default derived from the spin system
    # mutation schedule
    mutation_initial: float = 0.0
    mutation_step: float = 0.02
    mutation_step_trigger: int = 50        # stagnant generations per step
    mutation_ceiling: float = 0.2
    stagnation_eps: float = 1e-6
    # selection pressure escalates together with the mutation schedule
    selection_pressure: float = 1.0
    pressure_step: float = 1.0
    pressure_max: float = 6.0
    # operator rates per offspring slot
    crossover_rate: float = 0.7
    flip_rate: float = 0.2
    # stage control
    budget_main_s: float = 600.0
    budget_local_s: float = 1000.0
    acceptance_threshold: float = 0.99
    local_trigger: float = 0.8
    max_generations: int | None = None
    max_local_generations: int | None = None
    # local-stage neighborhood
    local_tau_width_us: int = 5
    local_phase_width_centideg: int = 200
    local_delay_width_frac: float = 0.05
    local_milestones: tuple[float, ...] = (0.9, 0.95, 0.98, 0.99)
    # row-count guard rails (overridable)
    rows_min: int = 3
    rows_max: int = 20

    def __post_init__(self):
        if not self.rows_min <= self.rows <= self.rows_max:
            raise ValueError(
                f"rows={self.rows} outside [{self.rows_min}, {self.rows_max}]"
            )
        if self.population is not None and self.population < 2:
            raise ValueError("population must be at least 2")
        if self.max_delay_us < 0:
            raise ValueError("max_delay_us must be >= 0")
        for name in ("acceptance_threshold", "local_trigger"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.budget_main_s <= 0:
            raise ValueError("budget_main_s must be > 0")
        if self.budget_local_s < 0:
            raise ValueError("budget_local_s must be >= 0")
        for name in ("mutation_initial", "mutation_step", "mutation_ceiling",
                     "crossover_rate", "flip_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.mutation_step_trigger < 1:
            raise ValueError("mutation_step_trigger must be >= 1")
        if self.selection_pressure < 1.0 or self.pressure_max < self.selection_pressure:
            raise ValueError("need 1 <= selection_pressure <= pressure_max")

    def resolved_population(self) -> int:
        return self.population if self.population is not None \
            else default_population_size(self.rows)


def default_population_size(rows: int) -> int:
    """Linear ramp from 350 individuals at 3 rows to 750 at 20 rows."""
    frac = (min(max(rows, 3), 20) - 3) / 17.0
    return int(round(350 + 400 * frac))


@dataclass
class Chromosome:
    """One candidate solution: genes plus a cached fitness (None = unevaluated)."""

    genes: np.ndarray
    fitness: float | None = None

    def copy(self) -> "Chromosome":
        return Chromosome(self.genes.copy(), self.fitness)

    def decode(self) -> PulseSequence:
        return PulseSequence.from_rows(self.genes)


@dataclass
class Population:
    members: list[Chromosome]
    generation: int = 0


@dataclass
class RunRecord:
    """Per-generation trace of one search stage."""

    best_fitness: list[float] = field(default_factory=list)
    best_genes: list[np.ndarray] = field(default_factory=list)
    wall_ms: list[int] = field(default_factory=list)
    evals: list[int] = field(default_factory=list)
    stop_reason: str = ""

    def append(self, fitness: float, genes: np.ndarray, wall_s: float, evals: int):
        self.best_fitness.append(float(fitness))
        self.best_genes.append(genes.copy())
        # quantized to whole seconds so that identical runs produce
        # identical files; per-iteration times of interest are minutes
        self.wall_ms.append(int(wall_s) * 1000)
        self.evals.append(int(evals))

    @property
    def generations(self) -> int:
        return len(self.best_fitness)

    def best(self) -> Chromosome:
        return Chromosome(self.best_genes[-1].copy(), self.best_fitness[-1])


class GeneRanges:
    """Inclusive legal bounds per gene column (tau, sign, phase, delay)."""

    def __init__(self, max_tau_us: int, max_delay_us: int):
        self.low = np.zeros(4, dtype=np.int64)
        self.high = np.array([max_tau_us, 1, PHASE_STEPS - 1, max_delay_us],
                             dtype=np.int64)

    def sample(self, rng: np.random.Generator, rows: int) -> np.ndarray:
        return rng.integers(self.low, self.high + 1, size=(rows, 4), dtype=np.int64)

    def clamp(self, genes: np.ndarray) -> np.ndarray:
        return np.clip(genes, self.low, self.high)


def _stage_rng(seed: int, stage: str, generation: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((int(seed), _STAGE_CODES[stage], int(generation)))
    )


def _resolve(cfg: GAConfig, sys: SpinSystem) -> GAConfig:
    if cfg.max_tau_us is None:
        cfg = replace(cfg, max_tau_us=max_pulse_width_us(sys))
    if cfg.population is None:
        cfg = replace(cfg, population=default_population_size(cfg.rows))
    return cfg


def init_population(cfg: GAConfig, rng: np.random.Generator) -> Population:
    """Uniformly random individuals over the legal gene ranges."""
    if cfg.max_tau_us is None:
        raise ValueError("max_tau_us unresolved; derive it from the spin system first")
    ranges = GeneRanges(cfg.max_tau_us, cfg.max_delay_us)
    members = [Chromosome(ranges.sample(rng, cfg.rows))
               for _ in range(cfg.resolved_population())]
    return Population(members, 0)


def luck_choose(fitnesses, rng: np.random.Generator, pressure: float = 1.0,
                weights=None) -> int:
    """Weighted-lottery selection: argmax of (random weight) * fitness^pressure.

    Ties resolve to the lowest index.  `weights` can be injected for tests;
    by default one uniform [0, 1) weight is drawn per member.
    """
    f = np.asarray(fitnesses, dtype=float)
    if f.ndim != 1 or len(f) == 0:
        raise ValueError("fitnesses must be a non-empty 1-D array")
    if np.any(np.isnan(f)):
        raise ValueError("unevaluated fitness present")
    w = rng.random(len(f)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != f.shape:
        raise ValueError("weights must match fitnesses in length")
    return int(np.argmax(w * f ** pressure))


def crossover(a: Chromosome, b: Chromosome, rng: np.random.Generator,
              rect=None) -> tuple[Chromosome, Chromosome]:
    """Swap a random rectangular gene block between copies of two parents."""
    if a.genes.shape != b.genes.shape:
        raise ValueError("parents must have the same shape")
    rows, cols = a.genes.shape
    if rect is None:
        r0, r1 = sorted(rng.integers(0, rows, size=2))
        c0, c1 = sorted(rng.integers(0, cols, size=2))
    else:
        r0, r1, c0, c1 = rect
    ga, gb = a.genes.copy(), b.genes.copy()
    block = ga[r0:r1 + 1, c0:c1 + 1].copy()
    ga[r0:r1 + 1, c0:c1 + 1] = gb[r0:r1 + 1, c0:c1 + 1]
    gb[r0:r1 + 1, c0:c1 + 1] = block
    return Chromosome(ga), Chromosome(gb)


def flip(a: Chromosome, rng: np.random.Generator, rows=None) -> Chromosome:
    """Exchange two distinct rows of a copy (pulse order matters)."""
    n = a.genes.shape[0]
    if n < 2:
        raise ValueError("flip needs at least two rows")
    if rows is None:
        i, j = rng.choice(n, size=2, replace=False)
    else:
        i, j = rows
        if i == j:
            raise ValueError("flip rows must be distinct")
    g = a.genes.copy()
    g[[i, j]] = g[[j, i]]
    return Chromosome(g)


def mutate(a: Chromosome, rng: np.random.Generator, ranges: GeneRanges) -> Chromosome:
    """Redraw every gene uniformly (full reseed of the individual)."""
    return Chromosome(ranges.sample(rng, a.genes.shape[0]))


def stagnation_triggers(trace, eps: float, window: int) -> int:
    """How many times the best fitness has stalled for `window` generations."""
    triggers = 0
    run = 0
    for i in range(1, len(trace)):
        if trace[i] - trace[i - 1] > eps:
            run = 0
        else:
            run += 1
            if run == window:
                triggers += 1
                run = 0
    return triggers


def mutation_schedule(record: RunRecord, cfg: GAConfig) -> float:
    """Current mutation probability: stepped up on stagnation, clamped at the ceiling."""
    triggers = stagnation_triggers(record.best_fitness, cfg.stagnation_eps,
                                   cfg.mutation_step_trigger)
    return min(cfg.mutation_initial + cfg.mutation_step * triggers,
               cfg.mutation_ceiling)


def _make_fitness(sys: SpinSystem, target: np.ndarray):
    def fitness(genes: np.ndarray) -> float:
        seq = PulseSequence.from_rows(genes)
        return gate_fidelity(target, sequence_propagator(sys, seq))
    return fitness


def _evaluate(pop: Population, fitness_fn, threads: int) -> int:
    """Fill missing fitness caches; returns the number of fresh evaluations."""
    todo = [m for m in pop.members if m.fitness is None]
    if not todo:
        return 0
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            values = list(ex.map(lambda m: fitness_fn(m.genes), todo))
    else:
        values = [fitness_fn(m.genes) for m in todo]
    for m, v in zip(todo, values):
        m.fitness = float(v)
    return len(todo)


def _best_index(pop: Population) -> int:
    fits = [m.fitness for m in pop.members]
    return int(np.argmax(fits))


def _next_generation(pop: Population, cfg: GAConfig, rng: np.random.Generator,
                     ranges: GeneRanges, p_mut: float, pressure: float,
                     sampler=None) -> Population:
    """One round of elitism + selection + crossover / flip / mutation."""
    fits = np.array([m.fitness for m in pop.members])
    size = len(pop.members)
    elite = pop.members[_best_index(pop)].copy()
    nxt: list[Chromosome] = [elite]
    draw = sampler if sampler is not None else (lambda r, n: ranges.sample(r, n))
    while len(nxt) < size:
        u = rng.random()
        if u < p_mut:
            luck_choose(fits, rng, pressure)  # paper picks the victim by lottery
            nxt.append(Chromosome(draw(rng, cfg.rows)))
        elif u < p_mut + cfg.crossover_rate:
            i = luck_choose(fits, rng, pressure)
            j = luck_choose(fits, rng, pressure)
            c1, c2 = crossover(pop.members[i], pop.members[j], rng)
            c1.genes = ranges.clamp(c1.genes)
            c2.genes = ranges.clamp(c2.genes)
            nxt.append(c1)
            if len(nxt) < size:
                nxt.append(c2)
        elif u < p_mut + cfg.crossover_rate + cfg.flip_rate and cfg.rows >= 2:
            i = luck_choose(fits, rng, pressure)
            nxt.append(flip(pop.members[i], rng))
        else:
            i = luck_choose(fits, rng, pressure)
            nxt.append(pop.members[i].copy())
    return Population(nxt, pop.generation + 1)


def evolve(cfg: GAConfig, sys: SpinSystem, target: np.ndarray,
           threads: int = 1) -> RunRecord:
    """Global search stage: random population, full gene ranges.

    Stops on the acceptance threshold, the generation cap, or the wall-clock
    budget (checked between generations only, for reproducibility).
    """
    if cfg.budget_main_s <= 0:
        raise ValueError("budget_main_s must be positive")
    cfg = _resolve(cfg, sys)
    fitness_fn = _make_fitness(sys, target)
    ranges = GeneRanges(cfg.max_tau_us, cfg.max_delay_us)
    record = RunRecord()
    t0 = time.monotonic()

    pop = init_population(cfg, _stage_rng(cfg.seed, "main", 0))
    n_ev = _evaluate(pop, fitness_fn, threads)
    best = pop.members[_best_index(pop)]
    record.append(best.fitness, best.genes, time.monotonic() - t0, n_ev)

    gen = 0
    while True:
        if record.best_fitness[-1] >= cfg.acceptance_threshold:
            record.stop_reason = "acceptance"
            break
        if cfg.max_generations is not None and gen >= cfg.max_generations:
            record.stop_reason = "generations"
            break
        if time.monotonic() - t0 >= cfg.budget_main_s:
            record.stop_reason = "budget"
            break
        gen += 1
        rng = _stage_rng(cfg.seed, "main", gen)
        p_mut = mutation_schedule(record, cfg)
        triggers = stagnation_triggers(record.best_fitness, cfg.stagnation_eps,
                                       cfg.mutation_step_trigger)
        pressure = min(cfg.pressure_max,
                       cfg.selection_pressure + cfg.pressure_step * triggers)
        t_gen = time.monotonic()
        pop = _next_generation(pop, cfg, rng, ranges, p_mut, pressure)
        n_ev = _evaluate(pop, fitness_fn, threads)
        best = pop.members[_best_index(pop)]
        record.append(best.fitness, best.genes, time.monotonic() - t_gen, n_ev)
    return record


class _NeighborhoodSampler:
    """Draws genes inside a box around a center individual.

    Phase wraps modulo the full circle; tau and delay clamp at their global
    bounds.  The sign column is frozen to the center's values (phase movement
    absorbs it).
    """

    def __init__(self, center: np.ndarray, widths: np.ndarray, ranges: GeneRanges):
        self.center = center.copy()
        self.widths = widths.copy()  # (tau_w, phase_w, delay_w)
        self.ranges = ranges

    def shrink(self):
        self.widths = np.maximum(self.widths // 2, 1)

    def recenter(self, center: np.ndarray):
        self.center = center.copy()

    def __call__(self, rng: np.random.Generator, rows: int) -> np.ndarray:
        tau_w, phase_w, delay_w = self.widths
        g = self.center.copy()
        g[:, 0] = rng.integers(self.center[:, 0] - tau_w,
                               self.center[:, 0] + tau_w + 1)
        g[:, 2] = rng.integers(self.center[:, 2] - phase_w,
                               self.center[:, 2] + phase_w + 1) % PHASE_STEPS
        g[:, 3] = rng.integers(self.center[:, 3] - delay_w,
                               self.center[:, 3] + delay_w + 1)
        g[:, 0] = np.clip(g[:, 0], 0, self.ranges.high[0])
        g[:, 3] = np.clip(g[:, 3], 0, self.ranges.high[3])
        return g


def refine(seed_chromosome: Chromosome, cfg: GAConfig, sys: SpinSystem,
           target: np.ndarray, threads: int = 1) -> tuple[Chromosome, RunRecord]:
    """Local search stage around a promising individual.

    The sampling neighborhood halves (and recenters on the incumbent) each
    time the best fitness first crosses a milestone.  Never returns a worse
    individual than the seed.
    """
    cfg = _resolve(cfg, sys)
    fitness_fn = _make_fitness(sys, target)
    seed_fit = seed_chromosome.fitness
    if seed_fit is None:
        seed_fit = fitness_fn(seed_chromosome.genes)
        seed_chromosome = Chromosome(seed_chromosome.genes.copy(), seed_fit)
    if seed_fit < cfg.local_trigger:
        raise ValueError(
            f"seed fitness {seed_fit:.4f} below local trigger {cfg.local_trigger}"
        )
    record = RunRecord()
    if cfg.budget_local_s == 0:
        record.append(seed_fit, seed_chromosome.genes, 0.0, 0)
        record.stop_reason = "budget"
        return seed_chromosome.copy(), record

    rows = seed_chromosome.genes.shape[0]
    cfg = replace(cfg, rows=rows, rows_min=min(cfg.rows_min, rows),
                  rows_max=max(cfg.rows_max, rows))
    ranges = GeneRanges(cfg.max_tau_us, cfg.max_delay_us)
    widths = np.array([cfg.local_tau_width_us,
                       cfg.local_phase_width_centideg,
                       max(1, int(round(cfg.local_delay_width_frac * cfg.max_delay_us)))],
                      dtype=np.int64)
    sampler = _NeighborhoodSampler(seed_chromosome.genes, widths, ranges)
    t0 = time.monotonic()

    rng0 = _stage_rng(cfg.seed, "local", 0)
    members = [seed_chromosome.copy()]
    members += [Chromosome(sampler(rng0, rows))
                for _ in range(cfg.resolved_population() - 1)]
    pop = Population(members, 0)
    n_ev = _evaluate(pop, fitness_fn, threads)
    best = pop.members[_best_index(pop)]
    record.append(best.fitness, best.genes, time.monotonic() - t0, n_ev)
    milestones_hit = [m for m in cfg.local_milestones if best.fitness >= m]

    gen = 0
    while True:
        if record.best_fitness[-1] >= cfg.acceptance_threshold:
            record.stop_reason = "acceptance"
            break
        if cfg.max_local_generations is not None and gen >= cfg.max_local_generations:
            record.stop_reason = "generations"
            break
        if time.monotonic() - t0 >= cfg.budget_local_s:
            record.stop_reason = "budget"
            break
        gen += 1
        rng = _stage_rng(cfg.seed, "local", gen)
        p_mut = mutation_schedule(record, cfg)
        triggers = stagnation_triggers(record.best_fitness, cfg.stagnation_eps,
                                       cfg.mutation_step_trigger)
        pressure = min(cfg.pressure_max,
                       cfg.selection_pressure + cfg.pressure_step * triggers)
        t_gen = time.monotonic()
        pop = _next_generation(pop, cfg, rng, ranges, p_mut, pressure,
                               sampler=sampler)
        n_ev = _evaluate(pop, fitness_fn, threads)
        best = pop.members[_best_index(pop)]
        record.append(best.fitness, best.genes, time.monotonic() - t_gen, n_ev)
        for m in cfg.local_milestones:
            if m not in milestones_hit and best.fitness >= m:
                milestones_hit.append(m)
                sampler.shrink()
                sampler.recenter(best.genes)
    final = record.best()
    if final.fitness < seed_fit:  # elitism makes this unreachable; belt and braces
        return seed_chromosome.copy(), record
    return final, record


def optimize_pipeline(cfg: GAConfig, sys: SpinSystem, target: np.ndarray,
                      threads: int = 1) -> tuple[Chromosome, RunRecord, RunRecord | None]:
    """Global stage, then the local stage when the trigger fidelity is reached."""
    cfg = _resolve(cfg, sys)
    record_main = evolve(cfg, sys, target, threads=threads)
    best = record_main.best()
    record_local = None
    if best.fitness >= cfg.local_trigger:
        best, record_local = refine(best, cfg, sys, target, threads=threads)
    return best, record_main, record_local
