"""
Experiment Harness
==================

Runs every (engine × function × mode × T_DIV-if-IRV × seed) cell of an
experiment and writes plot-ready artifacts:

    <output_dir>/
        experiment.json          normalized config + fingerprint
        suite.csv                suite manifest (shift vectors, f*)
        journal.log              append-only, one JSON line per finished cell
        runs/<cell>.trace.csv    fes,best_error
        runs/<cell>.events.csv   fes,event,diversity,np
        runs/<cell>.json         cell status (written last)
        summary.txt / summary.csv / tdiv_ratio.csv / traces_mean.csv

Cells are idempotent: a completed cell with the same config fingerprint is
skipped unless forced. Cells run in worker processes; only the parent
writes the journal.

Usage:
    python -m de_redist run --config configs/minimal.json
    python -m de_redist report --dir results/minimal
    python -m de_redist list-functions
    python -m de_redist selftest
"""

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field, replace
from functools import cached_property
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from dotenv import load_dotenv

from .benchmarks import BASE_FUNCTIONS, COMPOSITIONS, build_suite, list_functions, write_manifest
from .core import ConfigurationError, DERedistError, ObjectiveError, RngStream, UsageError, derive_seed
from .records import Event, EventKind, RunRecord
from .redistribution import DEFAULT_T_DIV, RedistParams
from .restart import RunMode, run_mode
from .stats import ALPHA, best_error_trace_export, render_summary_text, summarize, summary_rows, tdiv_best_counts
from .variants import ARCHIVE_RATE, MEMORY_SIZE, PBEST_RATE, EngineConfig, EngineState

load_dotenv()

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("functions", "engines", "modes", "mfes", "dim")
OPTIONAL_KEYS = ("seeds", "master_seed", "output_dir", "workers", "suite_seed", "redistribution", "restart")
ENGINE_DEFAULTS = {
    "strategy": "rand/1",
    "crossover": "binomial",
    "F": 0.5,
    "CR": 0.9,
    "adaptive": False,
    "p": PBEST_RATE,
    "pop_size": 100,
    "memory_size": MEMORY_SIZE,
    "archive_rate": ARCHIVE_RATE,
    "lpsr_min": None,
}
REDIST_KEYS = ("g_n", "t_ir", "t_gen", "r", "t_div", "reset_memory")
RESTART_KEYS = ("reset_lpsr",)
DEFAULT_SEEDS = 25
DEFAULT_SUITE_SEED = 2017
MODE_ORDER = [m.value for m in RunMode]
SAFE_NAME = re.compile(r"^[A-Za-z0-9_.-]+$")
ORACLE_TESTS = ("test_core.py", "test_variants.py", "test_redistribution.py", "test_stats.py")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_USAGE = 3
EXIT_OBJECTIVE = 4
EXIT_INTERRUPTED = 130


def default_output_dir() -> str:
    return os.getenv("DE_REDIST_OUTPUT_DIR", "results")


def default_workers() -> int:
    try:
        return max(1, int(os.getenv("DE_REDIST_WORKERS", "1")))
    except ValueError:
        return 1


class ConfigError(ConfigurationError):
    """Every problem found in an experiment config, not just the first"""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid experiment config:\n  - " + "\n  - ".join(self.errors))


# ============================================================================
# CONFIGURATION
# ============================================================================

@dataclass(frozen=True)
class ExperimentConfig:
    functions: Tuple[str, ...]
    engines: Dict[str, EngineConfig]
    engine_settings: Dict[str, dict]
    modes: Tuple[str, ...]
    mfes: int
    dim: int
    seeds: Tuple[int, ...] = tuple(range(DEFAULT_SEEDS))
    master_seed: int = 0
    suite_seed: int = DEFAULT_SUITE_SEED
    redistribution: RedistParams = field(default_factory=RedistParams)
    t_divs: Tuple[float, ...] = DEFAULT_T_DIV
    reset_memory: bool = False
    reset_lpsr: bool = True
    output_dir: str = "results"
    workers: int = 1

    def settings(self) -> dict:
        """Normalized config; parsing it again gives an equal config"""
        return {
            "functions": list(self.functions),
            "engines": {name: dict(s) for name, s in self.engine_settings.items()},
            "modes": list(self.modes),
            "mfes": self.mfes,
            "dim": self.dim,
            "seeds": list(self.seeds),
            "master_seed": self.master_seed,
            "suite_seed": self.suite_seed,
            "redistribution": {
                "g_n": self.redistribution.g_n,
                "t_ir": self.redistribution.t_ir,
                "t_gen": self.redistribution.t_gen,
                "r": self.redistribution.r,
                "t_div": list(self.t_divs),
                "reset_memory": self.reset_memory,
            },
            "restart": {"reset_lpsr": self.reset_lpsr},
            "output_dir": self.output_dir,
            "workers": self.workers,
        }

    @cached_property
    def fingerprint(self) -> str:
        """Hash of everything that changes run results (output_dir and workers excluded)"""
        settings = self.settings()
        settings.pop("output_dir")
        settings.pop("workers")
        canonical = json.dumps(settings, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_int(raw: dict, key: str, errors: List[str], default=None, minimum: int = 0, prefix: str = ""):
    value = raw.get(key, default)
    if value is None:
        return None
    if not _is_int(value) or value < minimum:
        errors.append(f"'{prefix}{key}' must be an integer >= {minimum}, got {value!r}")
        return None
    return value


def _check_number(raw: dict, key: str, errors: List[str], default=None, prefix: str = ""):
    value = raw.get(key, default)
    if not _is_number(value):
        errors.append(f"'{prefix}{key}' must be a number, got {value!r}")
        return None
    return float(value)


def _check_bool(raw: dict, key: str, errors: List[str], default: bool, prefix: str = ""):
    value = raw.get(key, default)
    if not isinstance(value, bool):
        errors.append(f"'{prefix}{key}' must be true or false, got {value!r}")
        return default
    return value


def _unknown_keys(raw: dict, allowed: Sequence[str], errors: List[str], prefix: str = ""):
    for key in sorted(set(raw) - set(allowed)):
        errors.append(f"unknown key '{prefix}{key}'")


def _parse_engine(name: str, raw, reset_memory: bool, errors: List[str]):
    prefix = f"engines.{name}."
    if not SAFE_NAME.match(name):
        errors.append(f"engine name '{name}' may only use letters, digits, '_', '-' and '.'")
        return None, None
    if not isinstance(raw, dict):
        errors.append(f"'engines.{name}' must be an object")
        return None, None
    before = len(errors)
    _unknown_keys(raw, ENGINE_DEFAULTS, errors, prefix)
    settings = {**ENGINE_DEFAULTS, **raw}
    for key in ("pop_size", "memory_size"):
        _check_int(settings, key, errors, minimum=1, prefix=prefix)
    if settings["lpsr_min"] is not None:
        _check_int(settings, "lpsr_min", errors, minimum=1, prefix=prefix)
    for key in ("F", "CR", "p", "archive_rate"):
        _check_number(settings, key, errors, prefix=prefix)
    _check_bool(settings, "adaptive", errors, False, prefix=prefix)
    if len(errors) > before:
        return None, None

    lpsr = (settings["pop_size"], settings["lpsr_min"]) if settings["lpsr_min"] is not None else None
    try:
        config = EngineConfig(
            strategy=settings["strategy"],
            crossover=settings["crossover"],
            F=float(settings["F"]),
            CR=float(settings["CR"]),
            adaptive=settings["adaptive"],
            p=float(settings["p"]),
            pop_size=settings["pop_size"],
            memory_size=settings["memory_size"],
            archive_rate=float(settings["archive_rate"]),
            lpsr=lpsr,
            reset_memory_on_redistribution=reset_memory,
        )
    except (ConfigurationError, ValueError) as e:
        errors.append(f"engines.{name}: {e}")
        return None, None
    return config, settings


def config_from_dict(raw, output_dir: Optional[str] = None) -> ExperimentConfig:
    """Validate a parsed config document; raises ConfigError listing every problem"""
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    errors: List[str] = []
    _unknown_keys(raw, REQUIRED_KEYS + OPTIONAL_KEYS, errors)
    for key in REQUIRED_KEYS:
        if key not in raw:
            errors.append(f"missing required key '{key}'")

    functions = raw.get("functions", [])
    known = set(list_functions())
    if "functions" in raw:
        if not isinstance(functions, list) or not functions:
            errors.append("'functions' must be a non-empty list")
            functions = []
        else:
            for name in functions:
                if name not in known:
                    errors.append(f"unknown function '{name}'")
            if len(set(map(str, functions))) != len(functions):
                errors.append("'functions' contains duplicates")

    modes = raw.get("modes", [])
    if "modes" in raw:
        if not isinstance(modes, list) or not modes:
            errors.append("'modes' must be a non-empty list")
            modes = []
        else:
            for mode in modes:
                if mode not in MODE_ORDER:
                    errors.append(f"unknown mode '{mode}' (choose from {', '.join(MODE_ORDER)})")
            modes = [m for m in MODE_ORDER if m in modes]

    mfes = _check_int(raw, "mfes", errors, minimum=1) if "mfes" in raw else None
    dim = _check_int(raw, "dim", errors, minimum=1) if "dim" in raw else None

    seeds_raw = raw.get("seeds", DEFAULT_SEEDS)
    seeds: Tuple[int, ...] = ()
    if _is_int(seeds_raw) and seeds_raw >= 1:
        seeds = tuple(range(seeds_raw))
    elif isinstance(seeds_raw, list) and seeds_raw and all(_is_int(s) and s >= 0 for s in seeds_raw):
        if len(set(seeds_raw)) != len(seeds_raw):
            errors.append("'seeds' contains duplicates")
        seeds = tuple(seeds_raw)
    else:
        errors.append(f"'seeds' must be a positive count or a list of non-negative integers, got {seeds_raw!r}")

    master_seed = _check_int(raw, "master_seed", errors, default=0)
    suite_seed = _check_int(raw, "suite_seed", errors, default=DEFAULT_SUITE_SEED)
    workers = _check_int(raw, "workers", errors, default=default_workers(), minimum=1)
    out = output_dir or raw.get("output_dir", default_output_dir())
    if not isinstance(out, str) or not out:
        errors.append(f"'output_dir' must be a non-empty string, got {out!r}")

    redist_raw = raw.get("redistribution", {})
    if not isinstance(redist_raw, dict):
        errors.append("'redistribution' must be an object")
        redist_raw = {}
    _unknown_keys(redist_raw, REDIST_KEYS, errors, "redistribution.")
    defaults = RedistParams()
    g_n = _check_int(redist_raw, "g_n", errors, default=defaults.g_n, minimum=1, prefix="redistribution.")
    t_gen = _check_int(redist_raw, "t_gen", errors, default=defaults.t_gen, minimum=1, prefix="redistribution.")
    t_ir = _check_number(redist_raw, "t_ir", errors, default=defaults.t_ir, prefix="redistribution.")
    r = _check_number(redist_raw, "r", errors, default=defaults.r, prefix="redistribution.")
    reset_memory = _check_bool(redist_raw, "reset_memory", errors, False, prefix="redistribution.")
    t_divs: Tuple[float, ...] = ()
    if "t_div" in redist_raw:
        values = redist_raw["t_div"]
        if _is_number(values):
            values = [values]
        if not isinstance(values, list) or not all(_is_number(v) and v > 0 for v in values):
            errors.append(f"'redistribution.t_div' must be a list of positive numbers, got {values!r}")
        elif not values and "IRV" in modes:
            errors.append("'redistribution.t_div' must not be empty when IRV is selected")
        else:
            t_divs = tuple(float(v) for v in values)
            if len(set(t_divs)) != len(t_divs):
                errors.append("'redistribution.t_div' contains duplicates")
    elif "IRV" in modes:
        t_divs = DEFAULT_T_DIV

    params = defaults
    if None not in (g_n, t_gen, t_ir, r):
        try:
            params = RedistParams(g_n=g_n, t_ir=t_ir, t_div=t_divs[0] if t_divs else defaults.t_div,
                                  t_gen=t_gen, r=r)
        except ConfigurationError as e:
            errors.append(f"redistribution: {e}")

    restart_raw = raw.get("restart", {})
    if not isinstance(restart_raw, dict):
        errors.append("'restart' must be an object")
        restart_raw = {}
    _unknown_keys(restart_raw, RESTART_KEYS, errors, "restart.")
    reset_lpsr = _check_bool(restart_raw, "reset_lpsr", errors, True, prefix="restart.")

    engines: Dict[str, EngineConfig] = {}
    engine_settings: Dict[str, dict] = {}
    if "engines" in raw:
        engines_raw = raw["engines"]
        if not isinstance(engines_raw, dict) or not engines_raw:
            errors.append("'engines' must be a non-empty object")
        else:
            for name in engines_raw:
                config, settings = _parse_engine(name, engines_raw[name], reset_memory, errors)
                if config is not None:
                    engines[name] = config
                    engine_settings[name] = settings

    if errors:
        raise ConfigError(errors)

    return ExperimentConfig(
        functions=tuple(functions),
        engines=engines,
        engine_settings=engine_settings,
        modes=tuple(modes),
        mfes=mfes,
        dim=dim,
        seeds=seeds,
        master_seed=master_seed,
        suite_seed=suite_seed,
        redistribution=params,
        t_divs=t_divs,
        reset_memory=reset_memory,
        reset_lpsr=reset_lpsr,
        output_dir=out,
        workers=workers,
    )


def parse_config(path, output_dir: Optional[str] = None) -> ExperimentConfig:
    """Read and validate a JSON experiment config; an empty file lists every required key"""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    text = path.read_text()
    if not text.strip():
        raw = {}
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError([f"{path}: invalid JSON ({e})"])
    return config_from_dict(raw, output_dir=output_dir)


# ============================================================================
# CELLS
# ============================================================================

@dataclass(frozen=True)
class Cell:
    engine: str
    function: str
    mode: str
    t_div: Optional[float]
    seed: int

    @property
    def cell_id(self) -> str:
        parts = [self.engine, self.function, self.mode]
        if self.t_div is not None:
            parts.append(f"tdiv{self.t_div!r}")
        parts.append(f"s{self.seed:03d}")
        return "__".join(parts)


@dataclass(frozen=True)
class CellOutcome:
    cell_id: str
    status: str
    final_best_error: float
    fes: int
    wall_time: float
    error: Optional[str] = None


def expand_cells(config: ExperimentConfig) -> List[Cell]:
    """engine × function × mode × (T_DIV for IRV only) × seed"""
    cells = []
    for engine in config.engines:
        for function in config.functions:
            for mode in config.modes:
                t_divs = config.t_divs if mode == RunMode.IRV.value else (None,)
                for t_div in t_divs:
                    for seed in config.seeds:
                        cells.append(Cell(engine, function, mode, t_div, seed))
    return cells


def cell_seed(config: ExperimentConfig, cell: Cell) -> int:
    return derive_seed(config.master_seed, cell.engine, cell.function, cell.mode, cell.t_div, cell.seed)


def run_cell(config: ExperimentConfig, cell: Cell) -> RunRecord:
    """One run, rebuilt from scratch from the config and the cell"""
    objective = build_suite(config.dim, config.suite_seed, [cell.function])[cell.function]
    engine = EngineState(config.engines[cell.engine], config.mfes)
    params = config.redistribution
    if cell.t_div is not None:
        params = replace(params, t_div=cell.t_div)
    rng = RngStream(cell_seed(config, cell))
    return run_mode(cell.mode, engine, objective, params, config.mfes, rng,
                    reset_lpsr=config.reset_lpsr, seed=cell.seed, engine_name=cell.engine,
                    fingerprint=config.fingerprint)


# ============================================================================
# PERSISTENCE
# ============================================================================

def _runs_dir(out_dir: Path) -> Path:
    return Path(out_dir) / "runs"


def _write_csv(path: Path, header: Sequence[str], rows):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def _write_json(path: Path, payload: dict):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def write_cell(runs_dir: Path, config: ExperimentConfig, cell: Cell, record: RunRecord) -> CellOutcome:
    """Trace and events first, the status JSON last (its presence marks the cell done)"""
    cid = cell.cell_id
    _write_csv(runs_dir / f"{cid}.trace.csv", ["fes", "best_error"],
               ([fes, repr(float(err))] for fes, err in record.samples))
    _write_csv(runs_dir / f"{cid}.events.csv", ["fes", "event", "diversity", "np"],
               ([e.fes, e.kind.value, repr(e.diversity), e.np] for e in record.events))
    status = "completed" if record.ok else "failed"
    _write_json(runs_dir / f"{cid}.json", {
        "cell_id": cid,
        "engine": cell.engine,
        "function": cell.function,
        "mode": cell.mode,
        "t_div": cell.t_div,
        "seed": cell.seed,
        "rng_seed": cell_seed(config, cell),
        "fingerprint": config.fingerprint,
        "status": status,
        "error": record.error,
        "mfes": record.mfes,
        "fes": record.fes,
        "final_best_error": record.final_best_error,
        "best_fitness": record.best_fitness,
        "wall_time": record.wall_time,
    })
    return CellOutcome(cid, status, record.final_best_error, record.fes, record.wall_time, record.error)


def cell_is_complete(runs_dir: Path, config: ExperimentConfig, cell: Cell) -> bool:
    path = runs_dir / f"{cell.cell_id}.json"
    if not path.exists():
        return False
    try:
        with open(path) as f:
            status = json.load(f)
    except (OSError, json.JSONDecodeError):
        return False
    return status.get("status") == "completed" and status.get("fingerprint") == config.fingerprint


def _failed_record(config: ExperimentConfig, cell: Cell, error: Exception) -> RunRecord:
    return RunRecord(function=cell.function, mode=cell.mode, seed=cell.seed, mfes=config.mfes,
                     samples=(), events=(), final_best_error=math.inf, best_fitness=math.inf, fes=0,
                     engine=cell.engine, t_div=cell.t_div, fingerprint=config.fingerprint,
                     error=f"{type(error).__name__}: {error}")


def _execute(job) -> CellOutcome:
    """Worker entry point: run one cell and write its files. Never raises."""
    config, cell, runs_dir = job
    try:
        record = run_cell(config, cell)
    except Exception as e:
        logger.warning("cell %s raised %s: %s", cell.cell_id, type(e).__name__, e)
        record = _failed_record(config, cell, e)
    try:
        return write_cell(Path(runs_dir), config, cell, record)
    except OSError as e:
        logger.error("could not write cell %s: %s", cell.cell_id, e)
        error = record.error or f"{type(e).__name__}: {e}"
        return CellOutcome(cell.cell_id, "failed", record.final_best_error, record.fes, record.wall_time, error)



def _append_journal(out_dir: Path, outcome: CellOutcome):
    entry = {
        "cell_id": outcome.cell_id,
        "status": outcome.status,
        "final_best_error": outcome.final_best_error,
        "fes": outcome.fes,
        "wall_time": round(outcome.wall_time, 3),
        "error": outcome.error,
    }
    with open(Path(out_dir) / "journal.log", "a") as f:
        f.write(json.dumps(entry, sort_keys=True) + "\n")


def load_records(out_dir) -> List[RunRecord]:
    """Every finished cell under out_dir/runs, sorted by cell id"""
    runs_dir = _runs_dir(Path(out_dir))
    if not runs_dir.is_dir():
        raise UsageError(f"no runs directory under {out_dir}")
    records = []
    for path in sorted(runs_dir.glob("*.json")):
        with open(path) as f:
            status = json.load(f)
        if status.get("status") not in ("completed", "failed"):
            continue
        cid = status["cell_id"]
        samples = []
        trace_path = runs_dir / f"{cid}.trace.csv"
        if trace_path.exists():
            with open(trace_path, newline="") as f:
                for row in csv.DictReader(f):
                    samples.append((int(row["fes"]), float(row["best_error"])))
        events = []
        events_path = runs_dir / f"{cid}.events.csv"
        if events_path.exists():
            with open(events_path, newline="") as f:
                for row in csv.DictReader(f):
                    events.append(Event(int(row["fes"]), EventKind(row["event"]),
                                        float(row["diversity"]), int(row["np"])))
        records.append(RunRecord(
            function=status["function"],
            mode=status["mode"],
            seed=int(status["seed"]),
            mfes=int(status["mfes"]),
            samples=tuple(samples),
            events=tuple(events),
            final_best_error=float(status["final_best_error"]),
            best_fitness=float(status["best_fitness"]),
            fes=int(status["fes"]),
            wall_time=float(status["wall_time"]),
            engine=status["engine"],
            t_div=status["t_div"],
            fingerprint=status["fingerprint"],
            error=status["error"],
        ))
    return records


# ============================================================================
# EXPERIMENT
# ============================================================================

@dataclass
class ExperimentResult:
    out_dir: Path
    total: int
    computed: int
    skipped: int
    failed: List[str]
    reports: Dict[str, Path]


def run_experiment(config: ExperimentConfig, force: bool = False, workers: Optional[int] = None,
                   progress: Optional[Callable[[int, int, CellOutcome], None]] = None) -> ExperimentResult:
    """
    Run every pending cell, then regenerate the report. Failed cells are
    recorded and the remaining cells still run.
    """
    out_dir = Path(config.output_dir)
    runs_dir = _runs_dir(out_dir)
    runs_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "experiment.json", {"config": config.settings(), "fingerprint": config.fingerprint})
    write_manifest(build_suite(config.dim, config.suite_seed, config.functions).values(), out_dir / "suite.csv")

    cells = expand_cells(config)
    pending = [c for c in cells if force or not cell_is_complete(runs_dir, config, c)]
    skipped = len(cells) - len(pending)
    logger.info("%d cells, %d pending, %d already complete", len(cells), len(pending), skipped)

    workers = workers or config.workers
    jobs = [(config, cell, str(runs_dir)) for cell in pending]
    failed = []
    done = 0

    def handle(outcome: CellOutcome):
        nonlocal done
        done += 1
        _append_journal(out_dir, outcome)
        if outcome.status != "completed":
            failed.append(outcome.cell_id)
            logger.warning("cell %s failed: %s", outcome.cell_id, outcome.error)
        if progress is not None:
            progress(done, len(jobs), outcome)

    if workers > 1 and len(jobs) > 1:
        with Pool(processes=min(workers, len(jobs))) as pool:
            for outcome in pool.imap_unordered(_execute, jobs):
                handle(outcome)
    else:
        for job in jobs:
            handle(_execute(job))

    reports = report(out_dir)
    return ExperimentResult(out_dir, len(cells), len(jobs), skipped, failed, reports)


def _expected_cells(out_dir: Path) -> Optional[Tuple[ExperimentConfig, List[Cell]]]:
    path = out_dir / "experiment.json"
    if not path.exists():
        return None
    with open(path) as f:
        payload = json.load(f)
    config = config_from_dict(payload["config"])
    return config, expand_cells(config)


def report(out_dir, alpha: float = ALPHA) -> Dict[str, Path]:
    """
    Summary tables and mean traces from whatever cells exist. Cells the
    experiment expects but that are missing are flagged in the gaps section.
    Unchanged data gives byte-identical files.
    """
    out_dir = Path(out_dir)
    records = load_records(out_dir)
    if not records:
        raise UsageError(f"no finished cells under {out_dir}")

    summary = summarize(records, alpha=alpha)
    t_divs = None
    expected = _expected_cells(out_dir)
    if expected is not None:
        config, cells = expected
        present = {p.name[:-len(".json")] for p in _runs_dir(out_dir).glob("*.json")}
        missing = [c.cell_id for c in cells if c.cell_id not in present]
        if missing:
            summary.missing.append(f"{len(missing)} of {len(cells)} cells not run yet (first: {missing[0]})")
        if RunMode.IRV.value in config.modes:
            t_divs = list(config.t_divs)
    counts = tdiv_best_counts(records, t_divs)

    paths = {
        "summary_text": out_dir / "summary.txt",
        "summary_csv": out_dir / "summary.csv",
        "tdiv_ratio": out_dir / "tdiv_ratio.csv",
        "traces": out_dir / "traces_mean.csv",
    }
    paths["summary_text"].write_text(render_summary_text(summary, counts, alpha=alpha))
    rows = summary_rows(summary)
    _write_csv(paths["summary_csv"], rows[0], rows[1:])
    _write_csv(paths["tdiv_ratio"], ["engine", "t_div", "best_count", "ratio"],
               ([engine, repr(t), n, ratio]
                for engine, (positions, ns, ratio) in sorted(counts.items())
                for t, n in zip(positions, ns)))
    _write_csv(paths["traces"], ["engine", "function", "mode", "t_div", "fes", "mean_best_error", "runs"],
               ([row.engine, row.function, row.mode, "" if row.t_div is None else repr(row.t_div),
                 row.fes, repr(row.mean_best_error), row.runs]
                for row in best_error_trace_export(records)))
    return paths


# ============================================================================
# SELFTEST
# ============================================================================

def tests_dir() -> Path:
    return Path(__file__).resolve().parents[1] / "scripts" / "testing"


def selftest(extra_args: Sequence[str] = ()) -> int:
    """Run the oracle test modules through pytest; returns pytest's exit code"""
    import pytest

    directory = tests_dir()
    paths = [str(directory / name) for name in ORACLE_TESTS if (directory / name).exists()]
    if not paths:
        raise UsageError(f"oracle tests not found under {directory}")
    return int(pytest.main([*paths, "-q", *extra_args]))


# ============================================================================
# CLI
# ============================================================================

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="de_redist", description="Differential evolution with individuals redistribution")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run (or resume) an experiment")
    run.add_argument("--config", required=True, help="JSON experiment config")
    run.add_argument("--force", action="store_true", help="recompute completed cells")
    run.add_argument("--workers", type=int, default=None, help="worker processes (default: config / DE_REDIST_WORKERS)")
    run.add_argument("--output-dir", default=None, help="overrides the config's output_dir")

    rep = sub.add_parser("report", help="rebuild summary tables from finished cells")
    rep.add_argument("--dir", default=None, help="experiment directory (default: DE_REDIST_OUTPUT_DIR)")
    rep.add_argument("--alpha", type=float, default=ALPHA)

    sub.add_parser("list-functions", help="list the benchmark suite")
    sub.add_parser("selftest", help="run the oracle test suites")
    return parser


def _progress_printer():
    started = time.time()

    def show(done: int, total: int, outcome: CellOutcome):
        icon = "✅" if outcome.status == "completed" else "❌"
        elapsed = time.time() - started
        rate = done / elapsed if elapsed > 0 else 0.0
        eta = (total - done) / rate if rate > 0 else 0.0
        print(f"{icon} {outcome.cell_id}: best error {outcome.final_best_error:.6e} ({outcome.wall_time:.1f}s)")
        print(f"   Progress: {done:,}/{total:,} ({done/total*100:.1f}%) | Rate: {rate*60:.1f}/min | ETA: {eta/60:.1f}min")

    return show


def _cmd_run(args) -> int:
    config = parse_config(args.config, output_dir=args.output_dir)
    cells = expand_cells(config)
    print("\n" + "=" * 80)
    print("🚀 DE REDISTRIBUTION EXPERIMENT")
    print("=" * 80)
    print(f"Config:     {args.config} (fingerprint {config.fingerprint})")
    print(f"Functions:  {', '.join(config.functions)}")
    print(f"Engines:    {', '.join(config.engines)}")
    print(f"Modes:      {', '.join(config.modes)}")
    print(f"Cells:      {len(cells):,} (MFES {config.mfes:,}, D={config.dim})")
    print(f"Output:     {config.output_dir}")
    print("=" * 80 + "\n")

    start = time.time()
    result = run_experiment(config, force=args.force, workers=args.workers, progress=_progress_printer())
    elapsed = time.time() - start

    print("\n" + "=" * 80)
    print("📊 EXPERIMENT COMPLETE")
    print("=" * 80)
    print(f"Computed:   {result.computed:,}")
    print(f"Skipped:    {result.skipped:,} (already complete)")
    print(f"Failed:     {len(result.failed):,}")
    print(f"Time:       {elapsed/60:.2f} minutes")
    print(f"Summary:    {result.reports['summary_text']}")
    print("=" * 80 + "\n")
    if result.failed:
        print(f"⚠️  {len(result.failed)} cell(s) failed, see {result.out_dir / 'journal.log'}")
        return EXIT_OBJECTIVE
    return EXIT_OK


def _cmd_report(args) -> int:
    out_dir = args.dir or default_output_dir()
    paths = report(out_dir, alpha=args.alpha)
    print(paths["summary_text"].read_text())
    for name, path in paths.items():
        print(f"✅ {name}: {path}")
    return EXIT_OK


def _cmd_list_functions(args) -> int:
    print(f"{'Function':<22} {'Kind':<18} {'Bounds'}")
    print("-" * 60)
    for name in list_functions():
        if name in BASE_FUNCTIONS:
            spec, kind = BASE_FUNCTIONS[name], "base"
        elif name in COMPOSITIONS:
            spec, kind = BASE_FUNCTIONS[COMPOSITIONS[name][0][0]], f"composition ({len(COMPOSITIONS[name])})"
        else:
            spec, kind = BASE_FUNCTIONS[name[3:]], "shifted-rotated"
        print(f"{name:<22} {kind:<18} [{spec.low:g}, {spec.up:g}]")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    code = selftest()
    print("\n✅ Selftest passed" if code == 0 else f"\n❌ Selftest failed (pytest exit code {code})")
    return EXIT_OK if code == 0 else EXIT_UNEXPECTED


COMMANDS = {
    "run": _cmd_run,
    "report": _cmd_report,
    "list-functions": _cmd_list_functions,
    "selftest": _cmd_selftest,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        level = logging.DEBUG if args.verbose else os.getenv("DE_REDIST_LOG_LEVEL", "WARNING").upper()
        logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        print(f"\n❌ Configuration error: {e}")
        return EXIT_CONFIG
    except UsageError as e:
        print(f"\n❌ Usage error: {e}")
        return EXIT_USAGE
    except ObjectiveError as e:
        print(f"\n❌ Objective error: {e}")
        return EXIT_OBJECTIVE
    except KeyboardInterrupt:
        print("\n\n⚠️  Stopped by user")
        return EXIT_INTERRUPTED
    except DERedistError as e:
        print(f"\n❌ {type(e).__name__}: {e}")
        return EXIT_UNEXPECTED
    except Exception as e:
        print(f"\n❌ Fatal error: {e}")
        import traceback
        traceback.print_exc()
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
