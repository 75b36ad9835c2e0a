import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from irs_secrecy.channel import SystemParams, Vec2

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def defaults() -> SystemParams:
    return SystemParams()


@pytest.fixture
def irs_near_bob() -> Vec2:
    return Vec2(100.0, 20.0)


def random_cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    x = random_cn(rng, (n, rank or n))
    return x @ x.conj().T
