import numpy as np
import pytest

from fdaim import build_code_pools, build_constellation, default_config, small_config


@pytest.fixture(scope="session")
def default_cfg():
    return default_config()


@pytest.fixture(scope="session")
def small_cfg():
    return small_config()


@pytest.fixture(scope="session")
def small_pools(small_cfg):
    return build_code_pools(small_cfg)


@pytest.fixture(scope="session")
def default_pools(default_cfg):
    return build_code_pools(default_cfg)


@pytest.fixture(scope="session")
def qam8():
    return build_constellation(8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
