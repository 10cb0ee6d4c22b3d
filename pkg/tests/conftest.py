import numpy as np
import pytest

from nvacoustic.presets import MODES


@pytest.fixture
def mode_high():
    """3.132 GHz device mode preset."""
    return MODES["3.132GHz"]


@pytest.fixture
def mode_low():
    """2.732 GHz device mode preset."""
    return MODES["2.732GHz"]


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.PCG64(20260810))
