"""
Rank-sum test and summary tests. Exact p-values are checked against a
plain enumeration of label assignments; the normal branch against scipy's
Mann-Whitney U (asymptotic, no continuity correction).
"""

import itertools
import math

import numpy as np
import pytest
from scipy.stats import mannwhitneyu

from de_redist.core import UsageError
from de_redist.records import RunRecord
from de_redist.redistribution import DEFAULT_T_DIV
from de_redist.stats import (
    Decision,
    best_error_trace_export,
    render_summary_text,
    summarize,
    summary_rows,
    tdiv_best_counts,
    value_at,
    wilcoxon_rank_sum,
)

T_DIV_LADDER = list(DEFAULT_T_DIV)


def midranks(values):
    order = sorted(range(len(values)), key=lambda k: values[k])
    ranks = [0.0] * len(values)
    k = 0
    while k < len(order):
        m = k
        while m + 1 < len(order) and values[order[m + 1]] == values[order[k]]:
            m += 1
        for t in range(k, m + 1):
            ranks[order[t]] = (k + m) / 2.0 + 1.0
        k = m + 1
    return ranks


def enumeration_pvalue(a, b):
    pooled = list(a) + list(b)
    ranks = midranks(pooled)
    n_a, n = len(a), len(pooled)
    mean = n_a * (n + 1) / 2.0
    observed = abs(sum(ranks[:n_a]) - mean)
    total = extreme = 0
    for chosen in itertools.combinations(range(n), n_a):
        total += 1
        if abs(sum(ranks[k] for k in chosen) - mean) >= observed - 1e-9:
            extreme += 1
    return min(1.0, extreme / total)


# ============================================================================
# RANK-SUM TEST
# ============================================================================

def test_three_versus_three():
    result = wilcoxon_rank_sum([1, 2, 3], [4, 5, 6])
    assert result.p_value == pytest.approx(0.1, abs=1e-12)
    assert result.method == "exact"
    assert result.decision == Decision.TIE


def test_identical_samples_tie():
    result = wilcoxon_rank_sum([1.0, 2.0, 3.0, 7.0], [1.0, 2.0, 3.0, 7.0])
    assert result.p_value == 1.0
    assert result.decision == Decision.TIE


def test_separated_samples_win():
    result = wilcoxon_rank_sum(range(1, 9), range(9, 17))
    assert result.p_value == pytest.approx(2 / math.comb(16, 8), rel=1e-12)
    assert result.decision == Decision.WIN
    assert wilcoxon_rank_sum(range(9, 17), range(1, 9)).decision == Decision.LOSS


def test_exact_matches_enumeration_oracle():
    rng = np.random.default_rng(81)
    checked = 0
    while checked < 200:
        n_a = int(rng.integers(3, 10))
        n_b = int(rng.integers(3, 10))
        if n_a + n_b > 12:
            continue
        a = rng.integers(0, 8, n_a).tolist()
        b = rng.integers(0, 8, n_b).tolist()
        if len(set(a + b)) == 1:
            continue
        assert wilcoxon_rank_sum(a, b).p_value == enumeration_pvalue(a, b)
        checked += 1


def test_normal_branch_matches_scipy():
    rng = np.random.default_rng(82)
    for _ in range(50):
        a = rng.integers(0, 30, int(rng.integers(9, 25))).astype(float)
        b = rng.integers(5, 35, int(rng.integers(9, 25))).astype(float)
        result = wilcoxon_rank_sum(a, b)
        assert result.method == "normal"
        expected = mannwhitneyu(a, b, use_continuity=False, alternative="two-sided", method="asymptotic").pvalue
        assert result.p_value == pytest.approx(expected, rel=1e-9)


def test_symmetry():
    rng = np.random.default_rng(83)
    flip = {Decision.WIN: Decision.LOSS, Decision.LOSS: Decision.WIN, Decision.TIE: Decision.TIE}
    for _ in range(100):
        a = rng.normal(0, 1, int(rng.integers(3, 15)))
        b = rng.normal(rng.uniform(-2, 2), 1, int(rng.integers(3, 15)))
        ab, ba = wilcoxon_rank_sum(a, b), wilcoxon_rank_sum(b, a)
        assert ab.p_value == pytest.approx(ba.p_value, rel=1e-12)
        assert ba.decision == flip[ab.decision]


@pytest.mark.parametrize("size", [6, 12])
def test_p_value_monotone_on_shift_ladder(size):
    a = np.random.default_rng(84).uniform(0, 1, size)
    ladder = [wilcoxon_rank_sum(a, a + shift).p_value for shift in (0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6)]
    assert all(0.0 <= p <= 1.0 for p in ladder)
    assert all(x >= y for x, y in zip(ladder, ladder[1:]))


def test_degenerate_and_small_samples():
    assert wilcoxon_rank_sum([2, 2, 2], [2, 2, 2, 2]).p_value == 1.0
    with pytest.raises(UsageError):
        wilcoxon_rank_sum([1, 2], [3, 4, 5])
    with pytest.raises(UsageError):
        wilcoxon_rank_sum([1, 2, 3], [3, 4, 5], method="bootstrap")


# ============================================================================
# SUMMARY
# ============================================================================

def rec(function, mode, seed, error, t_div=None, engine="classic", samples=None, mfes=1000, failed=False):
    samples = tuple(samples) if samples is not None else ((100, error),)
    return RunRecord(function=function, mode=mode, seed=seed, mfes=mfes, samples=samples, events=(),
                     final_best_error=error, best_fitness=error, fes=mfes, engine=engine,
                     t_div=t_div if mode == "IRV" else None,
                     error="ObjectiveError: boom" if failed else None)


def test_all_ties_give_zero_ratios():
    records = []
    for fn in ("f1", "f2"):
        for s in range(5):
            records += [rec(fn, "OV", s, float(s)), rec(fn, "CRV", s, float(s)), rec(fn, "IRV", s, float(s), 0.01)]
    summary = summarize(records)
    assert set(summary.ratios.values()) == {"0:0"}
    assert len(summary.ratios) == 3
    assert all(cell.decision == Decision.TIE for cell in summary.cells)


def test_one_forced_win():
    records = [rec("f1", "CRV", s, 1.0 + s) for s in range(5)]
    records += [rec("f1", "OV", s, 100.0 + s) for s in range(5)]
    records += [rec("f2", mode, s, float(s)) for mode in ("OV", "CRV") for s in range(5)]
    summary = summarize(records)
    assert summary.ratios == {("classic", ("CRV", "OV")): "1:0"}
    assert summary.missing == []


def test_best_t_div_is_selected_per_function():
    records = [rec("f1", "OV", s, 10.0 + s) for s in range(6)]
    records += [rec("f1", "IRV", s, 50.0 + s, 0.1) for s in range(6)]
    records += [rec("f1", "IRV", s, 1.0 + s / 10, 0.01) for s in range(6)]
    summary = summarize(records)
    assert summary.best_t_div[("classic", "f1")] == 0.01
    assert summary.ratios[("classic", ("IRV", "OV"))] == "1:0"


def test_missing_and_failed_cells_are_reported():
    records = [rec("f1", "OV", s, float(s)) for s in range(5)]
    records += [rec("f1", "CRV", s, float(s)) for s in range(2)]
    records.append(rec("f1", "CRV", 9, 0.0, failed=True))
    summary = summarize(records)
    assert summary.cells == []
    assert any("failed" in note for note in summary.missing)
    assert any("CRV has fewer than 3 runs" in note for note in summary.missing)
    assert "GAPS" in render_summary_text(summary)


def test_tdiv_best_counts_seven_positions():
    records = []
    for k, t in enumerate(T_DIV_LADDER):
        records += [rec("f1", "IRV", s, (0.5 if t == 1e-2 else 5.0) + s, t) for s in range(3)]
        records += [rec("f2", "IRV", s, (1.0 if k < 2 else 9.0) + s, t) for s in range(3)]
    counts = tdiv_best_counts(records, T_DIV_LADDER)
    positions, ns, ratio = counts["classic"]
    assert positions == T_DIV_LADDER
    assert ratio == "1:1:1:0:0:0:0"
    assert len(ratio.split(":")) == 7


def test_summary_rows_and_text():
    records = [rec("f1", "CRV", s, 1.0 + s) for s in range(5)] + [rec("f1", "OV", s, 100.0 + s) for s in range(5)]
    summary = summarize(records)
    rows = summary_rows(summary)
    assert rows[0] == ["engine", "function", "comparison", "decision", "p_value", "method"]
    assert rows[1][:4] == ["classic", "f1", "CRV vs OV", "WIN"]
    assert rows[-1] == ["classic", "*", "CRV vs OV", "1:0", "", ""]
    text = render_summary_text(summary)
    assert "1:0" in text
    assert text == render_summary_text(summarize(records))


# ============================================================================
# TRACES
# ============================================================================

SAMPLES = ((10, 5.0), (20, 3.0), (35, 1.0), (400, 0.5))


def test_single_run_trace_equals_its_step_function():
    rows = best_error_trace_export([rec("f1", "OV", 0, 0.5, samples=SAMPLES)])
    assert rows[0].fes == 10
    assert [r.fes for r in rows[1:]] == list(range(20, 1001, 10))
    for row in rows:
        expected = min(e for f, e in SAMPLES if f <= row.fes)
        assert row.mean_best_error == expected
        assert row.runs == 1


def test_identical_runs_average_to_the_same_trace():
    one = best_error_trace_export([rec("f1", "OV", 0, 0.5, samples=SAMPLES)])
    two = best_error_trace_export([rec("f1", "OV", s, 0.5, samples=SAMPLES) for s in range(2)])
    assert [(r.fes, r.mean_best_error) for r in one] == [(r.fes, r.mean_best_error) for r in two]


def test_trace_mean_rederived_from_raw_samples():
    rng = np.random.default_rng(85)
    runs = []
    for s in range(4):
        fes = np.sort(rng.choice(np.arange(20, 2000), 15, replace=False))
        errs = np.sort(rng.uniform(0, 100, 15))[::-1]
        runs.append(rec("f1", "IRV", s, float(errs[-1]), 0.01, mfes=2000,
                        samples=[(20, 200.0)] + list(zip(fes.tolist(), errs.tolist()))))
    for row in best_error_trace_export(runs):
        values = [value_at(r.samples, row.fes) for r in runs]
        assert row.mean_best_error == pytest.approx(np.mean(values), rel=1e-12)
        assert row.fes == 20 or row.fes % 20 == 0
