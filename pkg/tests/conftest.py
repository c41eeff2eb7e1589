import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from mbaloha.geometry import MomentTable, tabulate_moments

settings.register_profile("ci", derandomize=True, max_examples=60, deadline=None)
settings.load_profile("ci")

REPO_ROOT = Path(__file__).resolve().parents[1]
DEFAULT_TABLE = REPO_ROOT / "data" / "moments_k50_s250.txt"


def rng_from(*material: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(material)))


@pytest.fixture(scope="session")
def tiny_table() -> MomentTable:
    """Small fresh table: k up to 6, moments up to s=12, quick to build."""
    return tabulate_moments(
        k_max=6, s_max=12, placements_per_k=500, samples_per_placement=4000, seed=1905
    )


@pytest.fixture(scope="session")
def default_table() -> MomentTable:
    if not DEFAULT_TABLE.exists():
        pytest.skip("default moment table not generated")
    return MomentTable.load(DEFAULT_TABLE)


def workers() -> int:
    return int(os.environ.get("MBALOHA_TEST_WORKERS", os.cpu_count() or 1))
