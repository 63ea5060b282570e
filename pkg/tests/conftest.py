import numpy as np
import pytest

from absplace.channel import ChannelParams
from absplace.scenario import AreaSpec, DistributionSpec, default_tbs, generate_scenario


@pytest.fixture
def params():
    return ChannelParams()


@pytest.fixture
def boosted_params():
    # stronger downlink so coarse candidate grids can actually cover; used
    # by instance-heavy solver tests
    return ChannelParams(abs_power_w=20.0)


@pytest.fixture
def area():
    return AreaSpec(100.0, 100.0)


@pytest.fixture
def small_scenario(area):
    return generate_scenario(area, 30, DistributionSpec(), default_tbs(area), seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
