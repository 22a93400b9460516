from __future__ import annotations

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from tumbler import ProtocolParams  # noqa: E402

SEED = 20240611


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def sym():
    return ProtocolParams(0.15, 0.15, np.pi, np.pi)
