import numpy as np
import pytest

from hamshape.cli import resolve_config_path
from hamshape.config import load_config


@pytest.fixture(scope="session")
def tc1_config():
    return load_config(resolve_config_path("testcase1.toml"))


@pytest.fixture(scope="session")
def tc2_config():
    return load_config(resolve_config_path("testcase2.toml"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)
