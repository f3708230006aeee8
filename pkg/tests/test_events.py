import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evslip.errors import (
    BadMagic,
    CoordinateOutOfRange,
    CorruptRecord,
    EmptyGeometry,
    NonMonotonicTimestamp,
    TruncatedRecord,
    UnsortedEvents,
    UnsupportedVersion,
    ZeroWindow,
)
from evslip.events import (
    EventFileWriter,
    Polarity,
    PolarityEvent,
    SensorGeometry,
    encode_header,
    encode_records,
    from_records,
    iter_windows,
    make_events,
    parse_event_bytes,
    read_event_file,
    sort_events,
    to_records,
    window_stream,
    write_event_file,
)

from conftest import random_events


def test_header_layout(geometry):
    assert encode_header(geometry) == b"EVS1" + struct.pack("<HHHI2x", 1, 240, 180, 0)


def test_record_layout():
    ev = make_events([5], [3], [4], [1])
    assert encode_records(ev) == struct.pack("<QHHB3x", 5, 3, 4, 1)


def test_empty_file_roundtrip(tmp_path, geometry):
    path = tmp_path / "e.evs1"
    assert write_event_file(path, geometry, make_events([], [], [], [])) == 16
    g, ev = read_event_file(path)
    assert g == geometry and ev.size == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2000), st.integers(0, 2**31))
def test_roundtrip_random(n, seed):
    rng = np.random.default_rng(seed)
    geometry = SensorGeometry()
    ev = random_events(rng, n, geometry)
    data = encode_header(geometry) + encode_records(ev)
    g, back = parse_event_bytes(data)
    assert g == geometry
    assert np.array_equal(back[["t", "x", "y", "p"]], ev[["t", "x", "y", "p"]])


def test_records_roundtrip():
    recs = [PolarityEvent(1, 2, 3, Polarity.POS), PolarityEvent(7, 0, 0, Polarity.NEG)]
    assert to_records(from_records(recs)) == recs


@pytest.mark.parametrize("data, exc", [
    (b"XXXX" + bytes(12), BadMagic),
    (b"EVS1" + struct.pack("<HHHI2x", 2, 240, 180, 0), UnsupportedVersion),
    (b"EVS1" + struct.pack("<HHHI2x", 1, 240, 180, 0) + bytes(7), TruncatedRecord),
    (b"EVS1", TruncatedRecord),
    (b"EVS1" + struct.pack("<HHHI2x", 1, 240, 180, 0) + b"\x00", TruncatedRecord),
])
def test_bad_files(data, exc):
    with pytest.raises(exc):
        parse_event_bytes(data)


def test_non_monotonic_and_bounds(geometry):
    hdr = encode_header(geometry)
    with pytest.raises(NonMonotonicTimestamp):
        parse_event_bytes(hdr + struct.pack("<QHHB3x", 10, 0, 0, 0) + struct.pack("<QHHB3x", 5, 0, 0, 0))
    with pytest.raises(CoordinateOutOfRange):
        parse_event_bytes(hdr + struct.pack("<QHHB3x", 1, 240, 0, 0))
    with pytest.raises(CorruptRecord):
        parse_event_bytes(hdr + struct.pack("<QHHB3x", 1, 0, 0, 2))


def test_write_rejects_unsorted(tmp_path, geometry):
    with pytest.raises(UnsortedEvents):
        write_event_file(tmp_path / "x", geometry, make_events([5, 1], [0, 0], [0, 0], [0, 0]))


def test_incremental_writer_matches_one_shot(tmp_path, geometry):
    rng = np.random.default_rng(3)
    ev = random_events(rng, 500, geometry)
    with EventFileWriter(tmp_path / "a", geometry) as w:
        for chunk in np.array_split(ev, 7):
            w.append(chunk)
    write_event_file(tmp_path / "b", geometry, ev)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_geometry_validation():
    with pytest.raises(EmptyGeometry):
        SensorGeometry(0, 10)


def test_sort_breaks_ties_by_y_x_p():
    ev = make_events([1, 1, 1, 0], [5, 2, 2, 9], [1, 1, 0, 9], [0, 1, 0, 1])
    out = sort_events(ev)
    assert out["t"].tolist() == [0, 1, 1, 1]
    assert list(zip(out["y"].tolist(), out["x"].tolist())) == [(9, 9), (0, 2), (1, 2), (1, 5)]


def test_windows_half_open_and_empty():
    ev = make_events([0, 999, 1000, 3500], [0] * 4, [0] * 4, [0] * 4)
    wins = window_stream(ev, 1000)
    assert [len(w) for w in wins] == [2, 1, 0, 1]
    assert [(w.t_start_us, w.t_end_us) for w in wins][:2] == [(0, 1000), (1000, 2000)]
    assert len(window_stream(ev, 1000, 6000)) == 6


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 500), st.integers(1, 3000), st.integers(0, 2**31))
def test_windows_partition(n, width, seed):
    ev = random_events(np.random.default_rng(seed), n)
    wins = list(iter_windows(ev, width))
    assert sum(len(w) for w in wins) == n
    for w in wins:
        assert np.all((w.events["t"] >= w.t_start_us) & (w.events["t"] < w.t_end_us))


def test_zero_window():
    with pytest.raises(ZeroWindow):
        window_stream(make_events([], [], [], []), 0)
