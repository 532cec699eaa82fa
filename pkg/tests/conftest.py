import random

import pytest

from ringvote import trs


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


def make_ring(n, seed=1):
    """Ring plus the dealer's secret list (harness-side only)."""
    r = random.Random(seed)
    pairs = [trs.keygen(r) for _ in range(n)]
    ring = trs.Ring(tuple(pk for _, pk in pairs))
    return ring, [sk for sk, _ in pairs]


@pytest.fixture
def ring4():
    return make_ring(4)


@pytest.fixture
def ring8():
    return make_ring(8, seed=2)
