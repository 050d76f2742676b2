"""
DE Redistribution Benchmark CLI
===============================

Same commands as `python -m de_redist`, runnable from a checkout without
installing the package.

Usage:
    python scripts/active/de_bench.py run --config configs/minimal.json
    python scripts/active/de_bench.py report --dir results/minimal
    python scripts/active/de_bench.py list-functions
    python scripts/active/de_bench.py selftest
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

from de_redist.harness import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
