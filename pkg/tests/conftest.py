import numpy as np
import pytest

from evslip.events import SensorGeometry, make_events, sort_events


@pytest.fixture
def geometry():
    return SensorGeometry(240, 180)


def random_events(rng, n, geometry=SensorGeometry(), t_max=10_000):
    ev = make_events(
        rng.integers(0, t_max, n),
        rng.integers(0, geometry.width, n),
        rng.integers(0, geometry.height, n),
        rng.integers(0, 2, n),
    )
    return sort_events(ev)
