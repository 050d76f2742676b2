"""
Baseline Drivers
================

OV: the engine's own generation loop.
CRV: same stagnation entry criterion as IRV (G_N, T_IR, doubling), but on
trigger the whole run starts over: fresh uniform population of NP_init,
memory and archive reset, LPSR schedule re-anchored (switchable).

All three drivers record traces the same way, so under one seed OV and
IRV agree until IRV's first TRIGGER.
"""

import logging
from dataclasses import replace
from enum import Enum

from .core import ObjectiveError, RngStream, UsageError, diversity
from .records import EventKind, RunRecord, TraceRecorder
from .redistribution import ORIGINAL, REDISTRIBUTING, RedistParams, RedistState, run_irv, update_stagnation
from .variants import EngineState, step_generation

logger = logging.getLogger(__name__)


class RunMode(str, Enum):
    OV = "OV"
    CRV = "CRV"
    IRV = "IRV"


def run_ov(engine: EngineState, objective, mfes: int, rng: RngStream,
           seed: int = 0, engine_name: str = "", fingerprint: str = "") -> RunRecord:
    """Plain generation loop until FES > MFES"""
    tracker = TraceRecorder(objective.f_star, mfes)
    try:
        pop = engine.initialize(objective, rng)
        tracker.observe(objective.evaluations, pop.best_fitness())
        while objective.evaluations <= mfes:
            pop, report = step_generation(engine, pop, objective, rng)
            tracker.observe(objective.evaluations, report.best_fitness)
    except ObjectiveError as e:
        logger.warning("OV run on %s aborted: %s", objective.name, e)
        return tracker.finish(objective.name, RunMode.OV.value, seed, engine=engine_name,
                              fingerprint=fingerprint, error=f"{type(e).__name__}: {e}",
                              fes=objective.evaluations)
    return tracker.finish(objective.name, RunMode.OV.value, seed, engine=engine_name,
                          fingerprint=fingerprint, fes=objective.evaluations)


def run_crv(engine: EngineState, objective, params: RedistParams, mfes: int, rng: RngStream,
            reset_lpsr: bool = True, seed: int = 0, engine_name: str = "",
            fingerprint: str = "") -> RunRecord:
    """
    Complete restart on stagnation. Each restart costs exactly NP_init
    evaluations; the run best lives in the recorder and survives restarts.
    """
    tracker = TraceRecorder(objective.f_star, mfes)
    state = RedistState()
    try:
        pop = engine.initialize(objective, rng)
        tracker.observe(objective.evaluations, pop.best_fitness())
        while objective.evaluations <= mfes:
            state = update_stagnation(state, pop.best_fitness(), params)
            if state.b == REDISTRIBUTING:
                tracker.event(objective.evaluations, EventKind.RESTART, diversity(pop), len(pop))
                logger.debug("restart at FES %d", objective.evaluations)
                pop = engine.restart(objective, rng, reset_lpsr=reset_lpsr)
                state = replace(state, b=ORIGINAL, g_c=0)
                tracker.observe(objective.evaluations, pop.best_fitness())
                continue
            pop, report = step_generation(engine, pop, objective, rng)
            tracker.observe(objective.evaluations, report.best_fitness)
    except ObjectiveError as e:
        logger.warning("CRV run on %s aborted: %s", objective.name, e)
        return tracker.finish(objective.name, RunMode.CRV.value, seed, engine=engine_name,
                              fingerprint=fingerprint, error=f"{type(e).__name__}: {e}",
                              fes=objective.evaluations)
    return tracker.finish(objective.name, RunMode.CRV.value, seed, engine=engine_name,
                          fingerprint=fingerprint, fes=objective.evaluations)


def run_mode(mode, engine: EngineState, objective, params: RedistParams, mfes: int, rng: RngStream,
             reset_lpsr: bool = True, seed: int = 0, engine_name: str = "",
             fingerprint: str = "") -> RunRecord:
    mode = RunMode(mode)
    if mode == RunMode.OV:
        return run_ov(engine, objective, mfes, rng, seed=seed, engine_name=engine_name,
                      fingerprint=fingerprint)
    if mode == RunMode.CRV:
        return run_crv(engine, objective, params, mfes, rng, reset_lpsr=reset_lpsr, seed=seed,
                       engine_name=engine_name, fingerprint=fingerprint)
    if mode == RunMode.IRV:
        return run_irv(engine, objective, params, mfes, rng, seed=seed, engine_name=engine_name,
                       fingerprint=fingerprint)
    raise UsageError(f"unknown run mode {mode}")
