import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from rsp_lab import qmath
from rsp_lab.ensemble import BUILTIN_NAMES, Encoding, builtin

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=1, max_value=4)


def random_state(seed, dim, rank=None):
    return qmath.random_density_matrix(dim, np.random.default_rng(seed), rank)


def random_encoding(seed, dim, size, rank=None):
    rng = np.random.default_rng(seed)
    return Encoding.from_items((f"x{i}", qmath.random_density_matrix(dim, rng, rank)) for i in range(size))


@pytest.fixture(params=BUILTIN_NAMES)
def builtin_encoding(request):
    return request.param, builtin(request.param)
