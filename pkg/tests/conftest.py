import numpy as np
import pytest

from hesslasso import _kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # pay the JIT cost once, before any timed test
    _kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
