"""
DE Engines
==========

Trial vector generation and one-generation stepping for two engines:
- classic: DE/rand/1 with binomial or exponential crossover, fixed F and CR
- adaptive: current-to-pbest/1 with success-history memory (M_F, M_CR),
  external archive and optional linear population size reduction (LPSR)

Selection is greedy per slot, ties keep the trial.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .core import (
    ConfigurationError,
    Individual,
    ObjectiveError,
    Population,
    RngStream,
    UsageError,
    repair_bounds,
)

logger = logging.getLogger(__name__)

# L-SHADE lineage defaults
MEMORY_SIZE = 6
ARCHIVE_RATE = 2.6
PBEST_RATE = 0.11
MEMORY_INIT = 0.5
PARAM_SCALE = 0.1


class Strategy(str, Enum):
    RAND_1 = "rand/1"
    CURRENT_TO_PBEST_1 = "current-to-pbest/1"


class Crossover(str, Enum):
    BINOMIAL = "binomial"
    EXPONENTIAL = "exponential"


# ============================================================================
# CONFIGURATION
# ============================================================================

@dataclass(frozen=True)
class EngineConfig:
    """
    Trial vector generation strategy plus adaptation settings.

    With adaptive=True the fixed F/CR are ignored and every slot samples its
    own pair from the success-history memory. lpsr=(NP_init, NP_min) turns on
    linear population size reduction; pop_size must equal NP_init then.
    """
    strategy: Strategy = Strategy.RAND_1
    crossover: Crossover = Crossover.BINOMIAL
    F: float = 0.5
    CR: float = 0.9
    adaptive: bool = False
    p: float = PBEST_RATE
    pop_size: int = 100
    memory_size: int = MEMORY_SIZE
    archive_rate: float = ARCHIVE_RATE
    archive_cap: Optional[int] = None
    lpsr: Optional[Tuple[int, int]] = None
    reset_memory_on_redistribution: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "crossover", Crossover(self.crossover))
        if self.lpsr is not None:
            object.__setattr__(self, "lpsr", (int(self.lpsr[0]), int(self.lpsr[1])))
        if self.archive_cap is None:
            cap = int(round(self.archive_rate * self.pop_size)) if self.strategy == Strategy.CURRENT_TO_PBEST_1 else 0
            object.__setattr__(self, "archive_cap", cap)
        problems = self.validate()
        if problems:
            raise ConfigurationError("; ".join(problems))

    def validate(self) -> List[str]:
        problems = []
        if not 0.0 < self.F <= 1.2:
            problems.append(f"F must be in (0, 1.2], got {self.F}")
        if not 0.0 <= self.CR <= 1.0:
            problems.append(f"CR must be in [0, 1], got {self.CR}")
        if not 0.0 < self.p <= 1.0:
            problems.append(f"p must be in (0, 1], got {self.p}")
        if self.pop_size < 4:
            problems.append(f"pop_size must be at least 4, got {self.pop_size}")
        if self.memory_size < 1:
            problems.append(f"memory_size must be positive, got {self.memory_size}")
        if self.archive_cap < 0:
            problems.append(f"archive_cap must be non-negative, got {self.archive_cap}")
        if self.lpsr is not None:
            np_init, np_min = self.lpsr
            if np_min < 4:
                problems.append(f"LPSR NP_min must be at least 4, got {np_min}")
            if np_min > np_init:
                problems.append(f"LPSR NP_min {np_min} exceeds NP_init {np_init}")
            if np_init != self.pop_size:
                problems.append(f"LPSR NP_init {np_init} must equal pop_size {self.pop_size}")
        return problems

    @classmethod
    def classic(cls, pop_size: int = 100, F: float = 0.5, CR: float = 0.9,
                crossover: Crossover = Crossover.BINOMIAL) -> "EngineConfig":
        """DE/rand/1 with fixed parameters"""
        return cls(Strategy.RAND_1, crossover, F=F, CR=CR, pop_size=pop_size)

    @classmethod
    def adaptive_engine(cls, pop_size: int = 100, np_min: Optional[int] = 4,
                        memory_size: int = MEMORY_SIZE) -> "EngineConfig":
        """current-to-pbest/1 + success history + archive (+ LPSR unless np_min is None)"""
        lpsr = (pop_size, np_min) if np_min is not None else None
        return cls(Strategy.CURRENT_TO_PBEST_1, Crossover.BINOMIAL, adaptive=True,
                   pop_size=pop_size, memory_size=memory_size, lpsr=lpsr)


# ============================================================================
# ADAPTATION MEMORY
# ============================================================================

@dataclass(frozen=True)
class Success:
    F: float
    CR: float
    improvement: float


@dataclass
class AdaptationMemory:
    """Success-history rings M_F / M_CR, write cursor k and the external archive"""
    m_f: np.ndarray
    m_cr: np.ndarray
    archive_cap: int
    k: int = 0
    archive: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def create(cls, size: int, archive_cap: int) -> "AdaptationMemory":
        return cls(np.full(size, MEMORY_INIT), np.full(size, MEMORY_INIT), int(archive_cap))

    @property
    def size(self) -> int:
        return int(self.m_f.size)

    def sample_parameters(self, rng: RngStream) -> Tuple[float, float]:
        """
        CR ~ N(M_CR[r], 0.1) clipped to [0, 1]
        F  ~ Cauchy(M_F[r], 0.1), redrawn while <= 0, truncated at 1
        """
        r = int(rng.integers(self.size))
        cr = float(np.clip(rng.normal(self.m_cr[r], PARAM_SCALE), 0.0, 1.0))
        f = 0.0
        while f <= 0.0:
            f = float(self.m_f[r] + PARAM_SCALE * rng.standard_cauchy())
        return min(f, 1.0), cr

    def add_to_archive(self, genome: np.ndarray, rng: RngStream):
        if self.archive_cap <= 0:
            return
        self.archive.append(genome.copy())
        if len(self.archive) > self.archive_cap:
            del self.archive[int(rng.integers(len(self.archive)))]

    def resize_archive(self, cap: int, rng: RngStream):
        """Evict uniformly at random down to cap"""
        cap = max(0, min(int(cap), self.archive_cap))
        while len(self.archive) > cap:
            del self.archive[int(rng.integers(len(self.archive)))]

    def reset(self):
        self.m_f[:] = MEMORY_INIT
        self.m_cr[:] = MEMORY_INIT
        self.k = 0
        self.archive.clear()


def update_success_memory(mem: AdaptationMemory, successes: List[Success]) -> AdaptationMemory:
    """
    Write improvement-weighted means at cursor k and advance it:
    Lehmer mean sum(w·F²)/sum(w·F) for F, arithmetic mean for CR.
    Empty successes leave the memory untouched.
    """
    if not successes:
        return mem

    f = np.array([s.F for s in successes], dtype=float)
    cr = np.array([s.CR for s in successes], dtype=float)
    w = np.array([s.improvement for s in successes], dtype=float)
    if not np.all(np.isfinite(w)) or w.sum() <= 0.0:
        w = np.ones_like(w)
    w = w / w.sum()

    denominator = np.sum(w * f)
    if denominator > 0.0:
        mem.m_f[mem.k] = float(np.clip(np.sum(w * f * f) / denominator, np.finfo(float).tiny, 1.0))
    mem.m_cr[mem.k] = float(np.clip(np.sum(w * cr), 0.0, 1.0))
    mem.k = (mem.k + 1) % mem.size
    return mem


# ============================================================================
# MUTATION
# ============================================================================

def rand1_mutant(x_i, x_r1, x_r2, F: float) -> np.ndarray:
    """v = x_i + F·(x_r1 - x_r2)"""
    return np.asarray(x_i, dtype=float) + F * (np.asarray(x_r1, dtype=float) - np.asarray(x_r2, dtype=float))


def current_to_pbest_mutant(x_i, x_pbest, x_r1, x_r2, F: float) -> np.ndarray:
    """v = x_i + F·(x_pbest - x_i) + F·(x_r1 - x_r2)"""
    x_i = np.asarray(x_i, dtype=float)
    return x_i + F * (np.asarray(x_pbest, dtype=float) - x_i) + F * (np.asarray(x_r1) - np.asarray(x_r2))


def draw_distinct(n: int, exclude: int, count: int, rng: RngStream) -> np.ndarray:
    """count distinct indices from range(n) without `exclude`"""
    candidates = np.delete(np.arange(n), exclude)
    return rng.choice(candidates, count, replace=False)


def mutate_rand1(pop: Population, i: int, F: float, rng: RngStream) -> np.ndarray:
    """
    r1 != r2 != i drawn uniformly without replacement, then
    v = x_i + F·(x_r1 - x_r2), repaired against x_i.
    """
    if len(pop) < 4:
        raise ConfigurationError(f"DE/rand/1 needs NP >= 4, got {len(pop)}")
    r1, r2 = draw_distinct(len(pop), i, 2, rng)
    x_i = pop[i].genome
    mutant = rand1_mutant(x_i, pop[int(r1)].genome, pop[int(r2)].genome, F)
    return repair_bounds(mutant, x_i, pop.bounds)


def pbest_pool(pop: Population, p: float) -> np.ndarray:
    """Indices of the ceil(p·NP) best members"""
    size = int(math.ceil(p * len(pop)))
    if size < 1:
        raise ConfigurationError(f"pbest pool is empty for p={p}, NP={len(pop)}")
    return np.argsort(pop.fitnesses(), kind="stable")[:size]


def mutate_current_to_pbest(pop: Population, mem: AdaptationMemory, i: int, F: float, p: float,
                            rng: RngStream, pool: Optional[np.ndarray] = None) -> np.ndarray:
    """
    current-to-pbest/1: x_pbest from the best ceil(p·NP) members, x_r1 from
    the population (r1 != i), x_r2 from population ∪ archive (distinct from
    i and r1). Repaired against x_i.
    """
    n = len(pop)
    if n < 4:
        raise ConfigurationError(f"current-to-pbest/1 needs NP >= 4, got {n}")
    if pool is None:
        pool = pbest_pool(pop, p)
    if len(pool) == 0:
        raise ConfigurationError("pbest pool is empty")

    pbest = int(rng.choice(pool))
    r1 = int(draw_distinct(n, i, 1, rng)[0])
    candidates = np.setdiff1d(np.arange(n + len(mem.archive)), [i, r1])
    r2 = int(rng.choice(candidates))
    x_r2 = pop[r2].genome if r2 < n else mem.archive[r2 - n]

    x_i = pop[i].genome
    mutant = current_to_pbest_mutant(x_i, pop[pbest].genome, pop[r1].genome, x_r2, F)
    return repair_bounds(mutant, x_i, pop.bounds)


# ============================================================================
# CROSSOVER
# ============================================================================

def crossover_binomial(target, mutant, CR: float, rng: RngStream, force_jrand: bool = True) -> np.ndarray:
    """
    trial_j = mutant_j where draw_j < CR, else target_j.

    Draw order: n uniform draws, then j_rand (only when force_jrand), which is
    always taken from the mutant.
    """
    target = np.asarray(target, dtype=float)
    mutant = np.asarray(mutant, dtype=float)
    if target.shape != mutant.shape:
        raise UsageError(f"crossover length mismatch: {target.shape} vs {mutant.shape}")
    mask = rng.random(target.size) < CR
    if force_jrand:
        mask[int(rng.integers(target.size))] = True
    return np.where(mask, mutant, target)


def crossover_exponential(target, mutant, CR: float, rng: RngStream) -> np.ndarray:
    """
    One contiguous (wrapping) segment from the mutant: start at a random j,
    extend while draws < CR, at most n components.
    """
    target = np.asarray(target, dtype=float)
    mutant = np.asarray(mutant, dtype=float)
    if target.shape != mutant.shape:
        raise UsageError(f"crossover length mismatch: {target.shape} vs {mutant.shape}")
    n = target.size
    trial = target.copy()
    j = int(rng.integers(n))
    length = 0
    while True:
        trial[j] = mutant[j]
        length += 1
        j = (j + 1) % n
        if length >= n or not rng.random() < CR:
            break
    return trial


# ============================================================================
# SELECTION
# ============================================================================

def select_greedy(target: Individual, trial: Individual) -> Individual:
    """Smaller fitness wins (minimization); ties keep the trial"""
    if not target.evaluated or not trial.evaluated:
        raise UsageError("select_greedy needs two evaluated individuals")
    return trial if trial.fitness <= target.fitness else target


# ============================================================================
# LPSR
# ============================================================================

def lpsr_target_size(fes: int, mfes: int, np_init: int, np_min: int) -> int:
    """round(((NP_min - NP_init) / MFES)·FES + NP_init), rounding halves up"""
    if mfes <= 0:
        raise UsageError(f"MFES must be positive, got {mfes}")
    if not 0 <= fes <= mfes:
        raise UsageError(f"FES must be in [0, {mfes}], got {fes}")
    if np_min > np_init:
        raise UsageError(f"NP_min {np_min} exceeds NP_init {np_init}")
    size = (np_min - np_init) / mfes * fes + np_init
    return int(math.floor(size + 0.5))


def truncate_worst(pop: Population, size: int) -> Population:
    """Drop the worst members down to size; equal fitness drops the higher index first"""
    if size >= len(pop):
        return pop
    fit = pop.fitnesses()
    order = sorted(range(len(pop)), key=lambda i: (fit[i], i))
    keep = sorted(order[:size])
    return Population([pop[i] for i in keep], pop.bounds, pop.generation)


# ============================================================================
# EVALUATION
# ============================================================================

def evaluate(individual: Individual, objective) -> Individual:
    try:
        value = objective(individual.genome)
    except ObjectiveError:
        raise
    except Exception as e:
        raise ObjectiveError(f"{getattr(objective, 'name', 'objective')} failed: {e}") from e
    if not math.isfinite(value):
        raise ObjectiveError(f"{getattr(objective, 'name', 'objective')} returned {value}")
    individual.fitness = float(value)
    return individual


def evaluate_population(pop: Population, objective) -> Population:
    """Evaluate every member (FES += NP)"""
    for member in pop:
        evaluate(member, objective)
    return pop


# ============================================================================
# ENGINE
# ============================================================================

@dataclass(frozen=True)
class GenerationReport:
    best_fitness: float
    fes_delta: int
    successes: Tuple[Success, ...]
    pop_size: int


class EngineState:
    """
    One run's engine: configuration, adaptive memory and the LPSR anchor.

    The LPSR schedule runs linearly from (anchor_fes, anchor_np) down to
    NP_min at MFES. Restarts and redistribution move the anchor.
    """

    def __init__(self, config: EngineConfig, mfes: int):
        self.config = config
        self.mfes = int(mfes)
        self.memory = AdaptationMemory.create(config.memory_size, config.archive_cap)
        self.anchor_fes = 0
        self.anchor_np = config.pop_size

    @property
    def has_lpsr(self) -> bool:
        return self.config.lpsr is not None

    def initialize(self, objective, rng: RngStream) -> Population:
        """Uniform population of pop_size within bounds, evaluated"""
        genomes = objective.bounds.sample(rng, self.config.pop_size)
        pop = Population.from_genomes(genomes, objective.bounds)
        return evaluate_population(pop, objective)

    def restart(self, objective, rng: RngStream, reset_lpsr: bool = True) -> Population:
        """Complete restart: memory, archive and (optionally) LPSR anchor back to initial values"""
        self.memory.reset()
        if reset_lpsr:
            self.anchor_fes = objective.evaluations
            self.anchor_np = self.config.pop_size
        return self.initialize(objective, rng)

    def after_redistribution(self, pop: Population, fes: int):
        """Re-anchor LPSR at the recovered size; optional memory reset"""
        if self.has_lpsr:
            self.anchor_fes = int(fes)
            self.anchor_np = max(len(pop), self.config.lpsr[1])
        if self.config.reset_memory_on_redistribution:
            self.memory.reset()

    def lpsr_size(self, fes: int) -> int:
        np_min = self.config.lpsr[1]
        if fes >= self.mfes or self.anchor_fes >= self.mfes:
            return np_min
        span = self.mfes - self.anchor_fes
        return lpsr_target_size(max(0, fes - self.anchor_fes), span, self.anchor_np, np_min)

    def trial_vector(self, pop: Population, i: int, F: float, CR: float,
                     rng: RngStream, pool: Optional[np.ndarray]) -> np.ndarray:
        cfg = self.config
        if cfg.strategy == Strategy.RAND_1:
            mutant = mutate_rand1(pop, i, F, rng)
        else:
            mutant = mutate_current_to_pbest(pop, self.memory, i, F, cfg.p, rng, pool=pool)
        if cfg.crossover == Crossover.BINOMIAL:
            return crossover_binomial(pop[i].genome, mutant, CR, rng)
        return crossover_exponential(pop[i].genome, mutant, CR, rng)


def step_generation(engine: EngineState, pop: Population, objective,
                    rng: RngStream) -> Tuple[Population, GenerationReport]:
    """
    One generation: NP trials, NP evaluations, greedy selection per slot,
    memory and archive update, then LPSR truncation when configured.
    """
    if not pop.is_evaluated():
        raise UsageError("step_generation needs an evaluated population")
    cfg = engine.config
    n = len(pop)
    fes_before = objective.evaluations

    pool = pbest_pool(pop, cfg.p) if cfg.strategy == Strategy.CURRENT_TO_PBEST_1 else None
    trials = []
    params = []
    for i in range(n):
        if cfg.adaptive:
            F, CR = engine.memory.sample_parameters(rng)
        else:
            F, CR = cfg.F, cfg.CR
        trials.append(engine.trial_vector(pop, i, F, CR, rng, pool))
        params.append((F, CR))

    members = []
    successes = []
    for i in range(n):
        target = pop[i]
        trial = evaluate(Individual(trials[i]), objective)
        survivor = select_greedy(target, trial)
        if survivor is trial and trial.fitness < target.fitness:
            F, CR = params[i]
            successes.append(Success(F, CR, target.fitness - trial.fitness))
            engine.memory.add_to_archive(target.genome, rng)
        members.append(survivor)

    if cfg.adaptive:
        update_success_memory(engine.memory, successes)

    next_pop = Population(members, pop.bounds, pop.generation + 1)
    if engine.has_lpsr:
        size = engine.lpsr_size(objective.evaluations)
        if size < len(next_pop):
            logger.debug("LPSR: %d -> %d at FES %d", len(next_pop), size, objective.evaluations)
            next_pop = truncate_worst(next_pop, size)
        engine.memory.resize_archive(round(cfg.archive_rate * len(next_pop)), rng)

    report = GenerationReport(
        best_fitness=next_pop.best_fitness(),
        fes_delta=objective.evaluations - fes_before,
        successes=tuple(successes),
        pop_size=len(next_pop),
    )
    return next_pop, report
