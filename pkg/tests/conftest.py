import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hapmc.fragmat import FragmentMatrix

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_fragments(rng: np.random.Generator, m: int, n: int, p: float) -> FragmentMatrix:
    mask = rng.random((m, n)) < p
    rows, cols = np.nonzero(mask)
    vals = np.where(rng.random(rows.size) < 0.5, 1, -1)
    return FragmentMatrix(m, n, rows, cols, vals)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def example_text():
    # m=3 SNPs, n=2 reads; column 1 = (+1,+1,-1), column 2 = (-1,-1,.)
    return "3 2\n1 1 0 2 0 3 1\n2 1 1 2 1\n"
