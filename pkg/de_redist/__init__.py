"""
de_redist: differential evolution with individuals redistribution.

Core pieces are re-exported here; the experiment harness lives in
de_redist.harness (python -m de_redist --help).
"""

from .benchmarks import ObjectiveFunction, build_function, build_suite, list_functions
from .core import (
    Bounds,
    ConfigurationError,
    DERedistError,
    Individual,
    ObjectiveError,
    Population,
    RngStream,
    UsageError,
    derive_seed,
    diversity,
    opposite_vector,
    population_center,
)
from .records import Event, EventKind, RunRecord
from .redistribution import DEFAULT_T_DIV, RedistParams, RedistState, run_irv, update_stagnation
from .restart import RunMode, run_crv, run_mode, run_ov
from .stats import Decision, summarize, wilcoxon_rank_sum
from .variants import EngineConfig, EngineState, step_generation

__version__ = "0.1.0"
