import sys
from pathlib import Path

import numpy as np
import pytest

# solver test problems live next to the scripts that froze their references
sys.path.insert(0, str(Path(__file__).resolve().parent / "oracles"))

from callerspace import SynthSpec, generate_store  # noqa: E402


@pytest.fixture(scope="session")
def separated_store():
    """Small well-separated corpus shared by read-only tests."""
    spec = SynthSpec(
        num_callers=5,
        embed_dim=8,
        segments_per_caller=80,
        imbalance_ratio=2.0,
        separation=4.0,
        seed=7,
    )
    return generate_store(spec)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
