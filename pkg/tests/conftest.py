import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kls import (  # noqa: E402
    BrownianBridge,
    BrownianMotion,
    Constant,
    Matern,
    OrnsteinUhlenbeck,
    build_uniform,
    decompose,
)

CATALOG = {
    "bm": BrownianMotion(1.0),
    "bridge": BrownianBridge(1.0),
    "ou": OrnsteinUhlenbeck(1.0, 1.0),
    "matern05": Matern(1.0, 1.0, 0.5, 1),
    "matern15": Matern(1.0, 1.0, 1.5, 1),
    "matern_general": Matern(2.0, 3.0, 0.8, 1),
    "constant": Constant(1.0),
}


@pytest.fixture(scope="session")
def bm512():
    return decompose(BrownianMotion(), build_uniform(0, 1, 512))


@pytest.fixture(scope="session")
def bm1024():
    return decompose(BrownianMotion(), build_uniform(0, 1, 1024))


@pytest.fixture(scope="session")
def catalog_decs():
    """Every catalog kernel decomposed on midpoint grids with 64 and 256 nodes."""
    out = {}
    for n in (64, 256):
        g = build_uniform(0, 1, n)
        for name, k in CATALOG.items():
            out[name, n] = (k, decompose(k, g))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
