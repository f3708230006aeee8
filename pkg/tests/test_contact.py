import numpy as np
import pytest

from evslip.contact import ContactAccumulator, ContactMask, accumulate, finalize_mask, mask_weight
from evslip.errors import NoContact
from evslip.events import EventWindow, SensorGeometry, make_events


def test_only_negative_events_count(geometry):
    acc = ContactAccumulator(geometry)
    ev = make_events([0, 1, 2, 3], [4, 4, 4, 5], [4, 4, 4, 5], [0, 0, 1, 1])
    accumulate(acc, EventWindow(0, 1000, ev))
    assert acc.neg_counts[4, 4] == 2 and acc.total_neg == 2 and acc.neg_counts[5, 5] == 0
    mask = finalize_mask(acc, 2)
    assert mask.pixels() == [(4, 4)] and mask.weight == 1.0


def test_no_contact(geometry):
    with pytest.raises(NoContact):
        finalize_mask(ContactAccumulator(geometry))


def test_weights_sum_to_one():
    rng = np.random.default_rng(0)
    g = SensorGeometry(64, 48)
    for _ in range(50):
        support = rng.random(g.shape) < rng.random()
        if not support.any():
            continue
        m = ContactMask(g, support)
        assert abs(m.weights.sum() - 1.0) <= 1e-12
        x, y = m.pixels()[0]
        assert mask_weight(m, x, y) == m.weight


def test_csv_and_pgm(tmp_path):
    g = SensorGeometry(4, 3)
    support = np.zeros(g.shape, bool)
    support[1, 2] = support[2, 0] = True
    m = ContactMask(g, support)
    assert m.to_csv() == "# 4 3\nx,y,weight\n2,1,0.5\n0,2,0.5\n"
    assert m.to_pgm().splitlines()[:3] == ["P2", "4 3", "255"]
    m.save(tmp_path / "m.csv", tmp_path / "m.pgm")
    assert ContactMask.load(tmp_path / "m.csv") == m
    assert ContactMask.empty(g).weight == 0.0
