import numpy as np
import pytest

from sfqctrl.model import SystemConfig, precompute_propagators


@pytest.fixture(scope="session")
def paper_cfg():
    """Transmon defaults with the full 10,000-substep integrator."""
    return SystemConfig()


@pytest.fixture(scope="session")
def paper_props(paper_cfg):
    return precompute_propagators(paper_cfg)


@pytest.fixture(scope="session")
def fast_cfg():
    """Same physics, coarse integrator; fine for consistency-style tests."""
    return SystemConfig(substeps=400)


@pytest.fixture(scope="session")
def fast_props(fast_cfg):
    return precompute_propagators(fast_cfg)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
