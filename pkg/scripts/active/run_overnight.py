"""
Overnight Benchmark Runner
==========================

Runs the full comparison pipeline, one experiment per config:
1. Classic DE/rand/1 (NP=100) on the two-function desk check
2. Adaptive engine with LPSR on the same functions
3. Rebuilds every summary from the finished cells

Each step is a separate `python -m de_redist` process, so an interrupted
night resumes where it stopped (finished cells are skipped).

Usage:
    python scripts/active/run_overnight.py
    python scripts/active/run_overnight.py --workers 8
"""

import argparse
import subprocess
import sys
import time
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]

PIPELINE = [
    ("configs/desk_table2.json", "results/desk_table2", "Classic DE desk check"),
    ("configs/adaptive_lpsr.json", "results/adaptive_lpsr", "Adaptive engine with LPSR"),
]


def run_step(args, description):
    """Run one de_redist command, streaming its output; returns its exit code"""
    print("\n" + "=" * 80)
    print(f"🚀 Starting: {description}")
    print("=" * 80 + "\n")

    start_time = time.time()
    try:
        result = subprocess.run([sys.executable, "-m", "de_redist", *args], cwd=REPO_ROOT, text=True)
    except Exception as e:
        print(f"\n❌ Error running {description}: {e}")
        return 1

    elapsed = time.time() - start_time
    if result.returncode == 0:
        print(f"\n✅ {description} completed in {elapsed/60:.2f} minutes")
    else:
        print(f"\n❌ {description} finished with exit code {result.returncode}")
    return result.returncode


def main():
    parser = argparse.ArgumentParser(description="Run every benchmark experiment, then rebuild reports")
    parser.add_argument("--workers", type=int, default=None, help="worker processes per experiment")
    parser.add_argument("--skip-selftest", action="store_true")
    args = parser.parse_args()

    print("\n" + "=" * 80)
    print("OVERNIGHT BENCHMARK RUNNER")
    print("=" * 80)
    print("\nThis will:")
    print("  0. Run the oracle test suites")
    for k, (config, out_dir, description) in enumerate(PIPELINE, start=1):
        print(f"  {k}. {description} ({config} -> {out_dir})")
    print("=" * 80)

    overall_start = time.time()

    if not args.skip_selftest and run_step(["selftest"], "Oracle selftest") != 0:
        print("\n⚠️  Selftest failed, stopping pipeline")
        sys.exit(1)

    failures = []
    for config, out_dir, description in PIPELINE:
        command = ["run", "--config", config, "--output-dir", out_dir]
        if args.workers:
            command += ["--workers", str(args.workers)]
        code = run_step(command, description)
        # exit code 4 means some cells failed; the rest of the experiment is still usable
        if code not in (0, 4):
            print(f"\n⚠️  {description} stopped early, continuing with the next experiment")
        if code != 0:
            failures.append(description)

    for _, out_dir, description in PIPELINE:
        if (REPO_ROOT / out_dir / "runs").is_dir():
            run_step(["report", "--dir", out_dir], f"Report: {description}")

    total_elapsed = time.time() - overall_start
    print("\n" + "=" * 80)
    print("🎉 OVERNIGHT BENCHMARKS COMPLETE")
    print("=" * 80)
    print(f"Total time: {total_elapsed/60:.2f} minutes ({total_elapsed:.0f} seconds)")
    if failures:
        print(f"\n⚠️  Incomplete: {', '.join(failures)}")
        print("Rerun this script to resume; finished cells are skipped.")
        sys.exit(1)
    print("\nNext steps:")
    for _, out_dir, _ in PIPELINE:
        print(f"  - {out_dir}/summary.txt (win:loss ratios)")
        print(f"  - {out_dir}/traces_mean.csv (convergence curves)")
    print("\n✅ All done!\n")


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print("\n\n⚠️  Stopped by user")
        sys.exit(1)
    except Exception as e:
        print(f"\n❌ Fatal error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
