"""
共享测试夹具
"""

import numpy as np
import pytest

from pwi.analysis import BuildProtocol
from pwi.config import get_settings
from pwi.noise import apply_noise
from pwi.signal_model import gen_lipschitz_set


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch, tmp_path):
    """每个测试使用干净的配置，避免读入工作目录下的 .env"""
    monkeypatch.chdir(tmp_path)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture(scope="session")
def lipschitz_pair():
    """m = n = 8, q = 64, N = 129，smoothness 2，加性噪声 0.05，seed 7"""
    x = gen_lipschitz_set(8, 64, 129, 2.0, seed=7)
    y = apply_noise(x, "additive:0.05", seed=7)
    return x, y


@pytest.fixture(scope="session")
def tiny_pair():
    x = gen_lipschitz_set(3, 16, 9, 1.0, seed=3, offset=1.0)
    y = apply_noise(x, "additive:0.1", seed=3)
    return x, y


@pytest.fixture
def oracle_protocol():
    return BuildProtocol(initial="oracle", references="oracle")
