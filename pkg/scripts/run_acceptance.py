"""
Script to run every preset in config/ and summarize the pass/fail criteria
"""
import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import logging
import time

from app.cli.commands import run
from app.core.config import settings

logging.basicConfig(level=settings.LOG_LEVEL)

PRESETS = [
    ("sample-ensemble", "vertex_calibration.json"),
    ("sim-offset", "offset_equivalence.json"),
    ("sim-asep", "asep_oracle.json"),
    ("converge", "convergence.json"),
    ("bound-check", "bound_check.json"),
    ("bad-events", "bad_events.json"),
]


def run_acceptance(extra_args):
    """Run each preset into its own output directory"""
    print("\n" + "=" * 60)
    print(f"ACCEPTANCE RUN - {settings.APP_NAME}")
    print("=" * 60)

    outcomes = []
    for command, preset in PRESETS:
        out_dir = Path(settings.OUTPUT_DIR) / command
        print(f"\n▶ {command} ({preset})")
        print("-" * 60)
        started = time.perf_counter()
        code = run([command, "--config", str(project_root / "config" / preset), "--out", str(out_dir), *extra_args])
        elapsed = time.perf_counter() - started
        outcomes.append((command, code, elapsed))
        print(f"exit code {code} after {elapsed:.1f}s")

    print("\n" + "=" * 60)
    print("SUMMARY")
    print("=" * 60)
    for command, code, elapsed in outcomes:
        status = "PASS" if code == 0 else ("INVALID" if code == 2 else "FAIL")
        print(f"{status:8} {command:18} {elapsed:8.1f}s")
    print("=" * 60 + "\n")
    return 0 if all(code == 0 for _, code, _ in outcomes) else 1


if __name__ == "__main__":
    # extra flags are forwarded to every preset, e.g. --replicas 2000 --threads 4
    sys.exit(run_acceptance(sys.argv[1:]))
