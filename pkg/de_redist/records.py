"""
Run records and the event log
=============================

Every driver (OV, CRV, IRV) feeds a TraceRecorder and gets back an
immutable RunRecord:
- (FES, best_error) samples: every generation where the run best improved,
  plus fixed checkpoints every MFES/100 evaluations
- event log: (FES, event, diversity, NP)
- final best error, total FES, wall time, error text for failed runs
"""

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple


class EventKind(str, Enum):
    TRIGGER = "TRIGGER"
    EXIT_DIV = "EXIT_DIV"
    EXIT_GEN = "EXIT_GEN"
    REPLACE = "REPLACE"
    RESTART = "RESTART"


@dataclass(frozen=True)
class Event:
    fes: int
    kind: EventKind
    diversity: float
    np: int


@dataclass(frozen=True)
class RunRecord:
    """Per-run trace; samples are sorted by FES and final_best_error is their minimum"""
    function: str
    mode: str
    seed: int
    mfes: int
    samples: Tuple[Tuple[int, float], ...]
    events: Tuple[Event, ...]
    final_best_error: float
    best_fitness: float
    fes: int
    wall_time: float = 0.0
    engine: str = ""
    t_div: Optional[float] = None
    fingerprint: str = ""
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def count(self, kind: EventKind) -> int:
        return sum(1 for e in self.events if e.kind == kind)


class TraceRecorder:
    """
    Tracks the run best (outside the population, so restarts and
    redistribution never erase it) and collects samples and events.
    """

    def __init__(self, f_star: float, mfes: int, checkpoints: int = 100):
        self.f_star = float(f_star)
        self.mfes = int(mfes)
        self.interval = max(1, self.mfes // checkpoints)
        self.best_fitness = math.inf
        self.samples: List[Tuple[int, float]] = []
        self.events: List[Event] = []
        self.last_fes = 0
        self._next_checkpoint = self.interval
        self._started = time.perf_counter()

    @property
    def best_error(self) -> float:
        return self.best_fitness - self.f_star

    def observe(self, fes: int, best_fitness: float):
        """Call once per generation boundary with the current FES and population best"""
        improved = best_fitness < self.best_fitness
        if improved:
            self.best_fitness = float(best_fitness)

        checkpoint = fes >= self._next_checkpoint
        if checkpoint:
            while self._next_checkpoint <= fes:
                self._next_checkpoint += self.interval

        if improved or checkpoint or not self.samples:
            if self.samples and self.samples[-1][0] == fes:
                self.samples[-1] = (fes, self.best_error)
            else:
                self.samples.append((fes, self.best_error))
        self.last_fes = fes

    def event(self, fes: int, kind: EventKind, div: float, np_size: int):
        self.events.append(Event(int(fes), kind, float(div), int(np_size)))

    def finish(self, function: str, mode: str, seed: int, engine: str = "",
               t_div: Optional[float] = None, fingerprint: str = "",
               error: Optional[str] = None, fes: Optional[int] = None) -> RunRecord:
        best_error = self.best_error if self.samples else math.inf
        return RunRecord(
            function=function,
            mode=mode,
            seed=seed,
            mfes=self.mfes,
            samples=tuple(self.samples),
            events=tuple(self.events),
            final_best_error=best_error,
            best_fitness=self.best_fitness,
            fes=self.last_fes if fes is None else int(fes),
            wall_time=time.perf_counter() - self._started,
            engine=engine,
            t_div=t_div,
            fingerprint=fingerprint,
            error=error,
        )
