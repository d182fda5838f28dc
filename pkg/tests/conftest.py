import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from markovtower.graph import builtin
from markovtower.tower import build_tower

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def tower_of(name: str, depth: int):
    return build_tower(builtin(name), depth)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
