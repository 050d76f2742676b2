"""
Individuals Redistribution
==========================

Controller that takes over a stagnating DE run:
1. Stagnation detector: relative best-fitness improvement below T_IR for
   applied_G_N generations (G_N doubled while the current best is the run best)
2. Changed generations: DE/rand/1 with F=1.0, bare binomial crossover with
   CR=0.5, every trial kept. No evaluations.
3. Exit when diversity > T_DIV or more than T_GEN changed generations
4. Opposition replacement of floor(R·NP) randomly chosen vectors, then one
   full evaluation (the only NP evaluations the process costs)

Engines with LPSR grow back towards the population size recorded the first
time diversity fell below T_DIV.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

from .core import (
    ConfigurationError,
    Individual,
    ObjectiveError,
    Population,
    RngStream,
    UsageError,
    diversity,
    opposite_vector,
)
from .records import EventKind, RunRecord, TraceRecorder
from .variants import (
    EngineState,
    crossover_binomial,
    evaluate_population,
    mutate_rand1,
    step_generation,
)

logger = logging.getLogger(__name__)

CHANGED_F = 1.0
CHANGED_CR = 0.5
TINY_FITNESS = 1e-300

ORIGINAL = 0
REDISTRIBUTING = 1

DEFAULT_T_DIV = (1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4)


@dataclass(frozen=True)
class RedistParams:
    g_n: int = 500
    t_ir: float = 1e-5
    t_div: float = 1e-2
    t_gen: int = 1000
    r: float = 0.9

    def __post_init__(self):
        problems = []
        if self.g_n < 1:
            problems.append(f"G_N must be >= 1, got {self.g_n}")
        if not self.t_ir > 0:
            problems.append(f"T_IR must be > 0, got {self.t_ir}")
        if not self.t_div > 0:
            problems.append(f"T_DIV must be > 0, got {self.t_div}")
        if self.t_gen < 1:
            problems.append(f"T_GEN must be >= 1, got {self.t_gen}")
        if not 0 < self.r <= 1:
            problems.append(f"R must be in (0, 1], got {self.r}")
        if problems:
            raise ConfigurationError("; ".join(problems))


@dataclass(frozen=True)
class RedistState:
    """
    b: mode flag (0 original, 1 redistribution)
    g_n / g_c: stagnation and changed-generation counters
    f_eb: best fitness since the end of the previous redistribution
    f_run_best: best fitness of the whole run (f'_eb)
    recorded_np: LPSR recovery target, None until diversity first dips below T_DIV
    """
    b: int = ORIGINAL
    g_n: int = 0
    g_c: int = 0
    f_eb: float = math.inf
    f_run_best: float = math.inf
    recorded_np: Optional[int] = None


def applied_g_n(state: RedistState, params: RedistParams) -> int:
    return 2 * params.g_n if state.f_eb == state.f_run_best else params.g_n


def improvement_ratio(f_eb: float, best: float) -> float:
    """(f_eb - best)/|f_eb|, or the absolute improvement when f_eb is ~0 or the +inf sentinel"""
    if math.isinf(f_eb) or abs(f_eb) < TINY_FITNESS:
        return f_eb - best
    return (f_eb - best) / abs(f_eb)


def update_stagnation(state: RedistState, best: float, params: RedistParams) -> RedistState:
    """
    One step of the stagnation detector, run at the top of every
    original-mode generation with the current population best.
    """
    if state.b != ORIGINAL:
        raise UsageError("update_stagnation runs in original mode only")

    if best < state.f_eb and improvement_ratio(state.f_eb, best) >= params.t_ir:
        g_n = 0
    else:
        g_n = state.g_n + 1

    limit = applied_g_n(state, params)
    f_run_best = min(state.f_run_best, best)
    if g_n >= limit:
        return replace(state, b=REDISTRIBUTING, g_n=0, g_c=0, f_eb=math.inf, f_run_best=f_run_best)
    return replace(state, g_n=g_n, f_eb=min(state.f_eb, best), f_run_best=f_run_best)


def changed_generation(pop: Population, rng: RngStream) -> Population:
    """
    DE/rand/1 with F=1.0 and binomial crossover with CR=0.5 (no forced
    dimension) for every slot. The trials are returned as the next
    population, unevaluated. Costs no evaluations.
    """
    if len(pop) < 4:
        raise ConfigurationError(f"changed generation needs NP >= 4, got {len(pop)}")
    members = []
    for i in range(len(pop)):
        mutant = mutate_rand1(pop, i, CHANGED_F, rng)
        trial = crossover_binomial(pop[i].genome, mutant, CHANGED_CR, rng, force_jrand=False)
        members.append(Individual(trial))
    return Population(members, pop.bounds, pop.generation + 1)


def should_exit(div: float, g_c: int, params: RedistParams) -> bool:
    return div > params.t_div or g_c > params.t_gen


def opposition_replacement(pop: Population, r: float, rng: RngStream) -> Population:
    """
    floor(R·NP) distinct members, chosen uniformly, become their opposite
    vectors. Every fitness is invalidated.
    """
    if not 0 < r <= 1:
        raise UsageError(f"R must be in (0, 1], got {r}")
    n = len(pop)
    count = int(math.floor(r * n + 1e-9))
    chosen = set(int(i) for i in rng.choice(n, count, replace=False))
    members = []
    for i, member in enumerate(pop):
        genome = opposite_vector(member.genome, pop.bounds) if i in chosen else member.genome.copy()
        members.append(Individual(genome))
    return Population(members, pop.bounds, pop.generation)


def lpsr_recovery_step(targets: Population, trials: Population, recorded_np: Optional[int]) -> Population:
    """
    Trials plus targets (slot order) up to min(recorded_NP, 2·|targets|).
    Without a recorded size, or once recovered, the trials alone.
    """
    if len(targets) != len(trials):
        raise UsageError(f"targets ({len(targets)}) and trials ({len(trials)}) differ in size")
    if recorded_np is None or recorded_np <= len(targets):
        return trials
    size = min(recorded_np, 2 * len(targets))
    extra = [m.copy() for m in targets.members[:size - len(trials)]]
    return Population(trials.members + extra, trials.bounds, trials.generation)


def record_np_if_needed(state: RedistState, pop: Population, params: RedistParams) -> RedistState:
    if state.recorded_np is None and diversity(pop) < params.t_div:
        return replace(state, recorded_np=len(pop))
    return state


def run_irv(engine: EngineState, objective, params: RedistParams, mfes: int,
            rng: RngStream, seed: int = 0, engine_name: str = "", fingerprint: str = "") -> RunRecord:
    """
    DE with individuals redistribution until FES > MFES.
    The returned record's best_fitness is the run best S.
    """
    tracker = TraceRecorder(objective.f_star, mfes)
    state = RedistState()
    try:
        pop = engine.initialize(objective, rng)
        tracker.observe(objective.evaluations, pop.best_fitness())
        if engine.has_lpsr:
            state = record_np_if_needed(state, pop, params)

        while objective.evaluations <= mfes:
            if state.b == ORIGINAL:
                state = update_stagnation(state, pop.best_fitness(), params)
                if state.b == REDISTRIBUTING:
                    div = diversity(pop)
                    tracker.event(objective.evaluations, EventKind.TRIGGER, div, len(pop))
                    logger.debug("trigger at FES %d, div %.3e", objective.evaluations, div)

            if state.b == ORIGINAL:
                pop, report = step_generation(engine, pop, objective, rng)
                tracker.observe(objective.evaluations, report.best_fitness)
                if engine.has_lpsr:
                    state = record_np_if_needed(state, pop, params)
                continue

            div = diversity(pop)
            state = replace(state, g_c=state.g_c + 1)
            trials = changed_generation(pop, rng)
            if engine.has_lpsr:
                trials = lpsr_recovery_step(pop, trials, state.recorded_np)

            if not should_exit(div, state.g_c, params):
                pop = trials
                continue

            kind = EventKind.EXIT_DIV if div > params.t_div else EventKind.EXIT_GEN
            tracker.event(objective.evaluations, kind, div, len(trials))
            pop = opposition_replacement(trials, params.r, rng)
            evaluate_population(pop, objective)
            tracker.event(objective.evaluations, EventKind.REPLACE, diversity(pop), len(pop))
            logger.debug("%s after %d changed generations, NP %d", kind.value, state.g_c, len(pop))
            engine.after_redistribution(pop, objective.evaluations)
            state = replace(state, b=ORIGINAL, g_c=0)
            tracker.observe(objective.evaluations, pop.best_fitness())
    except ObjectiveError as e:
        logger.warning("IRV run on %s aborted: %s", objective.name, e)
        return tracker.finish(objective.name, "IRV", seed, engine=engine_name, t_div=params.t_div,
                              fingerprint=fingerprint, error=f"{type(e).__name__}: {e}",
                              fes=objective.evaluations)

    return tracker.finish(objective.name, "IRV", seed, engine=engine_name, t_div=params.t_div,
                          fingerprint=fingerprint, fes=objective.evaluations)
