import os
import time

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest

from flowpaths.model import TrainConfig, train
from flowpaths.oracle import ToyDataset
from flowpaths.paths import PathFamily, PathSpec

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def gaussian_world_model():
    """ICFM-DP predictor trained on the 1-D standard world (shared by slow tests)."""
    ds = ToyDataset("gaussian-world", seed=0)
    cfg = TrainConfig(PathSpec(PathFamily.ICFM, c=0.1), "dp", steps=8000, seed=0)
    start = time.perf_counter()
    model, trace = train(cfg, ds.draw, data_dim=1)
    return ds, cfg, model, trace, time.perf_counter() - start
