"""
T_DIV Sweep for One Function
============================

Shows how the diversity exit threshold changes an IRV run, so you can pick
a T_DIV before launching a full experiment.

For each threshold:
- median / best final error over the seeds
- how redistributions ended (diversity reached vs T_GEN cap)
- rank-sum decision against plain DE (OV) on the same seeds

Usage:
    python scripts/active/sweep_tdiv.py sr_rastrigin
    python scripts/active/sweep_tdiv.py composition_2 --dim 10 --mfes 50000 --seeds 7
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

from de_redist.benchmarks import build_suite  # noqa: E402
from de_redist.core import RngStream, derive_seed  # noqa: E402
from de_redist.records import EventKind  # noqa: E402
from de_redist.redistribution import DEFAULT_T_DIV, RedistParams  # noqa: E402
from de_redist.restart import RunMode, run_mode  # noqa: E402
from de_redist.stats import Decision, wilcoxon_rank_sum  # noqa: E402
from de_redist.variants import EngineConfig, EngineState  # noqa: E402


def run_seeds(mode, function, params, args):
    """One record per seed; the seed stream matches across thresholds"""
    records = []
    for seed in range(args.seeds):
        objective = build_suite(args.dim, args.suite_seed, [function])[function]
        engine = EngineState(EngineConfig.classic(pop_size=args.pop_size), args.mfes)
        rng = RngStream(derive_seed(args.master_seed, function, seed))
        records.append(run_mode(mode, engine, objective, params, args.mfes, rng, seed=seed, engine_name="classic"))
    return records


def analyze_threshold(records, baseline):
    errors = [r.final_best_error for r in records if r.ok]
    stats = {
        'median': float(np.median(errors)) if errors else float('inf'),
        'best': min(errors) if errors else float('inf'),
        'triggers': sum(r.count(EventKind.TRIGGER) for r in records),
        'exit_div': sum(r.count(EventKind.EXIT_DIV) for r in records),
        'exit_gen': sum(r.count(EventKind.EXIT_GEN) for r in records),
        'failed': sum(1 for r in records if not r.ok),
        'decision': None,
    }
    if len(errors) >= 3 and len(baseline) >= 3:
        stats['decision'] = wilcoxon_rank_sum(errors, baseline).decision
    return stats


def main():
    parser = argparse.ArgumentParser(description="Sweep T_DIV for IRV on one benchmark function")
    parser.add_argument("function")
    parser.add_argument("--dim", type=int, default=10)
    parser.add_argument("--mfes", type=int, default=20_000)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--pop-size", type=int, default=50)
    parser.add_argument("--g-n", type=int, default=500)
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--suite-seed", type=int, default=2017)
    args = parser.parse_args()

    print("\n" + "=" * 100)
    print(f"T_DIV SWEEP: {args.function} (D={args.dim}, MFES={args.mfes:,}, {args.seeds} seeds)")
    print("=" * 100)
    print("\nLower T_DIV = redistribution ends sooner, less spread")
    print("Higher T_DIV = more changed generations, closer to a restart")

    print("\n🔍 Running plain DE baseline...")
    baseline = [r.final_best_error for r in run_seeds(RunMode.OV, args.function, RedistParams(), args) if r.ok]

    results = {}
    for t_div in DEFAULT_T_DIV:
        print(f"🔍 Testing T_DIV {t_div:.0e}...")
        params = RedistParams(g_n=args.g_n, t_div=t_div)
        results[t_div] = analyze_threshold(run_seeds(RunMode.IRV, args.function, params, args), baseline)

    print("\n" + "=" * 100)
    print("SUMMARY COMPARISON")
    print("=" * 100)
    print(f"\n{'T_DIV':<10} {'Median':<14} {'Best':<14} {'Triggers':<10} {'Exit DIV':<10} {'Exit GEN':<10} {'vs OV':<8}")
    print("-" * 100)
    for t_div, stats in results.items():
        decision = stats['decision'].value if stats['decision'] else '-'
        print(f"{t_div:<10.0e} {stats['median']:<14.6e} {stats['best']:<14.6e} {stats['triggers']:<10} "
              f"{stats['exit_div']:<10} {stats['exit_gen']:<10} {decision:<8}")
    if baseline:
        print(f"{'OV':<10} {float(np.median(baseline)):<14.6e} {min(baseline):<14.6e}")

    best = min(results, key=lambda t: (results[t]['median'], -t))
    print("\n" + "=" * 100)
    print("RECOMMENDATION")
    print("=" * 100)
    print(f"\n✅ Lowest median error with T_DIV = {best:.0e}")
    if results[best]['decision'] == Decision.WIN:
        print("   - significantly better than plain DE on these seeds")
    if results[best]['triggers'] == 0:
        print("\n⚠️  No redistribution was triggered: raise --mfes or lower --g-n")
    if any(s['failed'] for s in results.values()):
        print("\n⚠️  Some runs failed, check the objective")
    print("\n💡 To use it, set it in your experiment config:")
    print(f'   "redistribution": {{"t_div": [{best:g}]}}')
    print("\n")


if __name__ == "__main__":
    try:
        main()
    except Exception as e:
        print(f"\n❌ Error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
