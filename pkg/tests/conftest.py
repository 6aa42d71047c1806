from __future__ import annotations

import os

import numpy as np
import pytest

#: One seed for the whole suite; override with PERTURB_SEED to shake out
#: seed-dependence without editing tests.
SEED = int(os.environ.get("PERTURB_SEED", "20260816"))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(SEED)
