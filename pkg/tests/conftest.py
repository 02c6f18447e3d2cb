import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from dragkit.backend import ReplayBackend, ScriptedBackend
from dragkit.demo import build_demo_bank, demo_responder
from dragkit.pipeline import load_bank

DATA_DIR = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def demo_bank():
    return build_demo_bank()


@pytest.fixture(scope="session")
def hard_bank():
    return load_bank(DATA_DIR / "demo_hard_bank.jsonl", DATA_DIR / "demo_pool.jsonl")


@pytest.fixture()
def scripted_backend():
    return ScriptedBackend(demo_responder)


@pytest.fixture()
def replay_backend():
    return ReplayBackend(DATA_DIR / "demo_fixture.jsonl", strict=True)
