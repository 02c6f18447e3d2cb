#!/usr/bin/env python3
"""Regenerate the committed demo fixture and bank files under tests/data/.

The fixture captures every response of the scripted demo model for one full
pipeline run, so tests can replay the suite byte-for-byte without the
scripted model in the loop.
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dragkit.backend import RecordingBackend, ScriptedBackend  # noqa: E402
from dragkit.demo import (build_demo_bank, demo_hard_bank, demo_responder,  # noqa: E402
                          run_demo_suite)
from dragkit.pipeline import save_bank  # noqa: E402

DATA_DIR = Path(__file__).resolve().parents[1] / "tests" / "data"


def main() -> int:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    bank = build_demo_bank()
    fixture_path = DATA_DIR / "demo_fixture.jsonl"
    with RecordingBackend(ScriptedBackend(demo_responder), fixture_path) as backend:
        suite = run_demo_suite(bank, backend, n_samples=4, seed=0)
    save_bank(bank, DATA_DIR / "demo_bank.jsonl")
    hard = demo_hard_bank(bank, suite)
    save_bank(hard, DATA_DIR / "demo_hard_bank.jsonl", DATA_DIR / "demo_pool.jsonl")
    n_records = sum(len(r) for r in suite.values())
    print(f"fixture: {fixture_path} ({fixture_path.stat().st_size} bytes)")
    print(f"bank: {len(bank)} questions, hard subset: {len(hard)}, "
          f"records captured: {n_records}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
