from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "corpus"


BALL_PARAMS = ["--param", "g=-1", "--param", "h=1"]
TANK_PARAMS = [
    "--param", "ci=2", "--param", "co=1",
    "--param", "hl=4", "--param", "hh=10", "--param", "tmax=1",
]
THERM_PARAMS = [
    "--param", "a=1", "--param", "Tl=18", "--param", "Th=22",
    "--param", "Tu=30", "--param", "tmax=0.1",
]
