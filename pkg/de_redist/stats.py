"""
Comparison Statistics
=====================

Wilcoxon rank-sum test (midranks for ties):
- exact two-sided p-value by enumerating every split of the pooled ranks
  when |a| + |b| <= 16
- normal approximation with tie-corrected variance otherwise

On top of it: per-function OV/CRV/IRV decisions, win:loss ratio strings
("15:1"), per-T_DIV best counts and mean best-error traces for plotting.
"""

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata

from .core import UsageError
from .records import RunRecord

EXACT_LIMIT = 16
ALPHA = 0.05
MIN_SEEDS = 3
PAIRS = (("CRV", "OV"), ("IRV", "OV"), ("IRV", "CRV"))


class Decision(str, Enum):
    WIN = "WIN"
    LOSS = "LOSS"
    TIE = "TIE"


@dataclass(frozen=True)
class RankSumResult:
    p_value: float
    decision: Decision
    statistic: float
    method: str


# ============================================================================
# RANK-SUM TEST
# ============================================================================

def exact_rank_sum_pvalue(ranks: Sequence[float], n_a: int) -> float:
    """
    P(|W - E[W]| >= |w - E[W]|) over every choice of n_a ranks from the pool;
    the first n_a ranks are the observed sample.
    """
    ranks = np.asarray(ranks, dtype=float)
    n = ranks.size
    mean = n_a * (n + 1) / 2.0
    observed = abs(ranks[:n_a].sum() - mean)
    sums = np.fromiter((sum(c) for c in itertools.combinations(ranks.tolist(), n_a)), dtype=float)
    extreme = np.count_nonzero(np.abs(sums - mean) >= observed - 1e-9)
    return min(1.0, extreme / sums.size)


def normal_rank_sum_pvalue(ranks: Sequence[float], n_a: int) -> float:
    """Two-sided normal approximation, variance corrected for ties"""
    ranks = np.asarray(ranks, dtype=float)
    n = ranks.size
    n_b = n - n_a
    mean = n_a * (n + 1) / 2.0
    _, counts = np.unique(ranks, return_counts=True)
    ties = float(np.sum(counts ** 3 - counts))
    variance = n_a * n_b / 12.0 * ((n + 1) - ties / (n * (n - 1)))
    if variance <= 0.0:
        return 1.0
    z = (ranks[:n_a].sum() - mean) / math.sqrt(variance)
    return float(min(1.0, 2.0 * norm.sf(abs(z))))


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float], alpha: float = ALPHA,
                      method: str = "auto") -> RankSumResult:
    """
    Two-sided rank-sum test of a against b (minimization):
    WIN when significant and median(a) < median(b), LOSS when significant
    the other way, TIE otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 3 or b.size < 3:
        raise UsageError(f"rank-sum test needs at least 3 values per sample, got {a.size} and {b.size}")
    if method not in ("auto", "exact", "normal"):
        raise UsageError(f"unknown method '{method}'")
    if method == "auto":
        method = "exact" if a.size + b.size <= EXACT_LIMIT else "normal"

    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled, method="average")
    statistic = float(ranks[:a.size].sum())
    if np.all(pooled == pooled[0]):
        return RankSumResult(1.0, Decision.TIE, statistic, method)

    if method == "exact":
        p = exact_rank_sum_pvalue(ranks, a.size)
    else:
        p = normal_rank_sum_pvalue(ranks, a.size)

    decision = Decision.TIE
    if p < alpha:
        med_a, med_b = float(np.median(a)), float(np.median(b))
        if med_a < med_b:
            decision = Decision.WIN
        elif med_a > med_b:
            decision = Decision.LOSS
    return RankSumResult(float(p), decision, statistic, method)


# ============================================================================
# SUMMARY
# ============================================================================

@dataclass(frozen=True)
class ComparisonCell:
    engine: str
    function: str
    pair: Tuple[str, str]
    decision: Decision
    p_value: float
    method: str


@dataclass
class Summary:
    cells: List[ComparisonCell] = field(default_factory=list)
    ratios: Dict[Tuple[str, Tuple[str, str]], str] = field(default_factory=dict)
    best_t_div: Dict[Tuple[str, str], float] = field(default_factory=dict)
    missing: List[str] = field(default_factory=list)

    @property
    def engines(self) -> List[str]:
        return sorted({engine for engine, _ in self.ratios})


def group_errors(records: Iterable[RunRecord]) -> Dict[tuple, List[float]]:
    """(engine, function, mode, t_div) -> final best errors of successful runs"""
    groups: Dict[tuple, List[float]] = defaultdict(list)
    for rec in records:
        if rec.ok:
            t_div = rec.t_div if rec.mode == "IRV" else None
            groups[(rec.engine, rec.function, rec.mode, t_div)].append(rec.final_best_error)
    return groups


def select_best_t_div(groups: Dict[tuple, List[float]], engine: str, function: str) -> Optional[float]:
    """T_DIV with the lowest median final error; the larger T_DIV wins ties"""
    candidates = [(float(np.median(errors)), -t_div, t_div)
                  for (e, f, mode, t_div), errors in groups.items()
                  if e == engine and f == function and mode == "IRV" and errors]
    if not candidates:
        return None
    return min(candidates)[2]


def summarize(records: Iterable[RunRecord], alpha: float = ALPHA, min_seeds: int = MIN_SEEDS) -> Summary:
    """
    Pairwise decisions per (engine, function) for CRV vs OV, IRV vs OV and
    IRV vs CRV, IRV taken at its best T_DIV per function. Cells with fewer
    than min_seeds successful runs are listed in `missing`.
    """
    records = list(records)
    groups = group_errors(records)
    summary = Summary()

    failed = defaultdict(int)
    for rec in records:
        if not rec.ok:
            failed[(rec.engine, rec.function, rec.mode)] += 1
    for (engine, function, mode), count in sorted(failed.items()):
        summary.missing.append(f"{engine}/{function}/{mode}: {count} failed run(s)")

    engines = sorted({rec.engine for rec in records})
    for engine in engines:
        modes = {rec.mode for rec in records if rec.engine == engine}
        functions = sorted({rec.function for rec in records if rec.engine == engine})
        counts = {pair: [0, 0] for pair in PAIRS if pair[0] in modes and pair[1] in modes}

        for function in functions:
            samples = {}
            for mode in ("OV", "CRV"):
                samples[mode] = groups.get((engine, function, mode, None), [])
            t_div = select_best_t_div(groups, engine, function)
            if t_div is not None:
                summary.best_t_div[(engine, function)] = t_div
                samples["IRV"] = groups[(engine, function, "IRV", t_div)]
            else:
                samples["IRV"] = []

            for pair in counts:
                a, b = samples[pair[0]], samples[pair[1]]
                short = [m for m, s in ((pair[0], a), (pair[1], b)) if len(s) < min_seeds]
                if short:
                    summary.missing.append(
                        f"{engine}/{function}: {' and '.join(short)} has fewer than {min_seeds} runs "
                        f"({pair[0]} vs {pair[1]} skipped)")
                    continue
                result = wilcoxon_rank_sum(a, b, alpha=alpha)
                summary.cells.append(ComparisonCell(engine, function, pair, result.decision,
                                                    result.p_value, result.method))
                if result.decision == Decision.WIN:
                    counts[pair][0] += 1
                elif result.decision == Decision.LOSS:
                    counts[pair][1] += 1

        for pair, (wins, losses) in counts.items():
            summary.ratios[(engine, pair)] = f"{wins}:{losses}"
    return summary


def tdiv_best_counts(records: Iterable[RunRecord],
                     t_divs: Optional[Sequence[float]] = None) -> Dict[str, Tuple[List[float], List[int], str]]:
    """
    Per engine: how many functions reach their best median IRV error under
    each T_DIV (every tying T_DIV is credited). Returns
    engine -> (t_div positions, counts, "a:b:c..." ratio).
    """
    groups = group_errors(records)
    result = {}
    engines = sorted({e for (e, _, mode, _) in groups if mode == "IRV"})
    for engine in engines:
        positions = list(t_divs) if t_divs is not None else sorted(
            {t for (e, _, mode, t) in groups if e == engine and mode == "IRV"}, reverse=True)
        counts = [0] * len(positions)
        functions = sorted({f for (e, f, mode, _) in groups if e == engine and mode == "IRV"})
        for function in functions:
            medians = {}
            for t in positions:
                errors = groups.get((engine, function, "IRV", t))
                if errors:
                    medians[t] = float(np.median(errors))
            if not medians:
                continue
            best = min(medians.values())
            for k, t in enumerate(positions):
                if t in medians and medians[t] == best:
                    counts[k] += 1
        result[engine] = (positions, counts, ":".join(str(c) for c in counts))
    return result


# ============================================================================
# TRACES
# ============================================================================

@dataclass(frozen=True)
class TraceRow:
    engine: str
    function: str
    mode: str
    t_div: Optional[float]
    fes: int
    mean_best_error: float
    runs: int


def value_at(samples: Sequence[Tuple[int, float]], fes: int) -> Optional[float]:
    """Run-best error at a FES point: the last sample at or before it"""
    value = None
    for sample_fes, error in samples:
        if sample_fes > fes:
            break
        value = error
    return value


def best_error_trace_export(records: Iterable[RunRecord], points: int = 100) -> List[TraceRow]:
    """
    Mean best error per (engine, function, mode, T_DIV), sampled after the
    first generation and then every MFES/points evaluations.
    """
    groups: Dict[tuple, List[RunRecord]] = defaultdict(list)
    for rec in records:
        if rec.ok and rec.samples:
            t_div = rec.t_div if rec.mode == "IRV" else None
            groups[(rec.engine, rec.function, rec.mode, t_div)].append(rec)

    rows = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], -(k[3] or 0.0))):
        runs = groups[key]
        mfes = max(r.mfes for r in runs)
        interval = max(1, mfes // points)
        first = min(r.samples[0][0] for r in runs)
        grid = [first] + [k * interval for k in range(1, points + 1) if k * interval > first]
        for fes in grid:
            values = [v for v in (value_at(r.samples, fes) for r in runs) if v is not None]
            if values:
                rows.append(TraceRow(key[0], key[1], key[2], key[3], fes, float(np.mean(values)), len(values)))
    return rows


# ============================================================================
# RENDERING
# ============================================================================

def pair_label(pair: Tuple[str, str]) -> str:
    return f"{pair[0]} vs {pair[1]}"


def summary_rows(summary: Summary) -> List[List[str]]:
    """CSV rows: one per comparison cell, then one per ratio"""
    rows = [["engine", "function", "comparison", "decision", "p_value", "method"]]
    for cell in sorted(summary.cells, key=lambda c: (c.engine, c.function, PAIRS.index(c.pair))):
        rows.append([cell.engine, cell.function, pair_label(cell.pair), cell.decision.value,
                     f"{cell.p_value:.6e}", cell.method])
    for (engine, pair), ratio in sorted(summary.ratios.items(), key=lambda kv: (kv[0][0], PAIRS.index(kv[0][1]))):
        rows.append([engine, "*", pair_label(pair), ratio, "", ""])
    return rows


def render_summary_text(summary: Summary, tdiv_counts: Optional[Dict] = None, alpha: float = ALPHA) -> str:
    lines = []
    lines.append("=" * 80)
    lines.append(f"RESULT SUMMARY (win:loss, Wilcoxon rank-sum at alpha={alpha})")
    lines.append("=" * 80)
    header = f"{'Engine':<20}" + "".join(f"{pair_label(p):>16}" for p in PAIRS)
    lines.append(header)
    lines.append("-" * 80)
    if not summary.ratios:
        lines.append("   (no comparisons: fewer than two versions in the data)")
    for engine in summary.engines:
        row = f"{engine:<20}"
        for pair in PAIRS:
            row += f"{summary.ratios.get((engine, pair), '-'):>16}"
        lines.append(row)

    if summary.best_t_div:
        lines.append("")
        lines.append("Best T_DIV per function (IRV):")
        for (engine, function), t_div in sorted(summary.best_t_div.items()):
            lines.append(f"   {engine:<18} {function:<20} {t_div:.1e}")

    if tdiv_counts:
        lines.append("")
        lines.append("=" * 80)
        lines.append("RATIO OF TIMES SHOWING THE BEST RESULT UNDER DIFFERENT T_DIV")
        lines.append("=" * 80)
        for engine, (positions, counts, ratio) in sorted(tdiv_counts.items()):
            lines.append(f"{engine:<20} {ratio}")
            lines.append(f"{'':<20} T_DIV: " + ", ".join(f"{t:.1e}" for t in positions))

    if summary.missing:
        lines.append("")
        lines.append("GAPS:")
        for note in summary.missing:
            lines.append(f"   ⚠️  {note}")
    lines.append("")
    return "\n".join(lines)
