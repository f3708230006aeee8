"""Polarity events, time windows and the EVS1 recording format.

Streams are held as numpy structured arrays with dtype ``EVENT_DTYPE``.  The
dtype is laid out exactly like an EVS1 record (16 bytes, little-endian), so
files are read and written without per-event Python work.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadMagic,
    CoordinateOutOfRange,
    CorruptRecord,
    EmptyGeometry,
    IoFailure,
    NonMonotonicTimestamp,
    TruncatedRecord,
    UnsortedEvents,
    UnsupportedVersion,
    ZeroWindow,
)

EVENT_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("pad", "V3")]
)
assert EVENT_DTYPE.itemsize == 16

MAGIC = b"EVS1"
VERSION = 1
HEADER = struct.Struct("<4sHHHI2x")  # listed fields are 14 bytes; zero-padded to 16
HEADER_SIZE = HEADER.size
RECORD_SIZE = EVENT_DTYPE.itemsize


class Polarity(enum.IntEnum):
    NEG = 0
    POS = 1


@dataclass(frozen=True)
class SensorGeometry:
    width: int = 240
    height: int = 180

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise EmptyGeometry(f"sensor geometry must be positive, got {self.width}x{self.height}")

    @property
    def shape(self) -> tuple[int, int]:
        """numpy (rows, cols) shape of a per-pixel grid."""
        return (self.height, self.width)

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


@dataclass(frozen=True, order=True)
class PolarityEvent:
    t_us: int
    x: int
    y: int
    polarity: Polarity

    def __post_init__(self):
        if self.t_us < 0:
            raise ValueError("t_us must be non-negative")


def empty_events(n: int = 0) -> np.ndarray:
    return np.zeros(n, dtype=EVENT_DTYPE)


def make_events(t, x, y, p) -> np.ndarray:
    """Build an event array from parallel column sequences."""
    t = np.asarray(t, dtype=np.int64)
    if t.size and t.min() < 0:
        raise ValueError("timestamps must be non-negative")
    ev = empty_events(t.size)
    ev["t"] = t
    ev["x"] = x
    ev["y"] = y
    ev["p"] = p
    return ev


def from_records(records: Iterable[PolarityEvent]) -> np.ndarray:
    records = list(records)
    return make_events(
        [r.t_us for r in records],
        [r.x for r in records],
        [r.y for r in records],
        [int(r.polarity) for r in records],
    )


def to_records(events: np.ndarray) -> list[PolarityEvent]:
    return [
        PolarityEvent(int(t), int(x), int(y), Polarity(int(p)))
        for t, x, y, p in zip(events["t"], events["x"], events["y"], events["p"])
    ]


def sort_events(events: np.ndarray) -> np.ndarray:
    """Canonical order: by time, ties broken by (y, x, polarity)."""
    if events.size < 2:
        return events.copy()
    order = np.lexsort((events["p"], events["x"], events["y"], events["t"]))
    return events[order]


def concat(chunks: Sequence[np.ndarray]) -> np.ndarray:
    chunks = [c for c in chunks if c.size]
    if not chunks:
        return empty_events()
    return np.concatenate(chunks)


def check_sorted(events: np.ndarray) -> None:
    if events.size > 1 and np.any(np.diff(events["t"].astype(np.int64)) < 0):
        raise UnsortedEvents("events are not sorted by timestamp")


def check_bounds(events: np.ndarray, geometry: SensorGeometry) -> None:
    if events.size == 0:
        return
    if int(events["x"].max()) >= geometry.width or int(events["y"].max()) >= geometry.height:
        raise CoordinateOutOfRange(
            f"event coordinates exceed {geometry.width}x{geometry.height} sensor"
        )


# -- EVS1 ----------------------------------------------------------------------

def encode_header(geometry: SensorGeometry) -> bytes:
    return HEADER.pack(MAGIC, VERSION, geometry.width, geometry.height, 0)


def encode_records(events: np.ndarray) -> bytes:
    if events.dtype != EVENT_DTYPE:
        raise TypeError("expected an EVENT_DTYPE array")
    out = events.copy()
    out["pad"] = b"\x00\x00\x00"
    return out.tobytes()


def write_event_file(path, geometry: SensorGeometry, events: np.ndarray) -> int:
    """Write ``events`` as an EVS1 file and return the number of bytes written."""
    check_sorted(events)
    check_bounds(events, geometry)
    payload = encode_header(geometry) + encode_records(events)
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return len(payload)


class EventFileWriter:
    """Incremental EVS1 writer used while a run is in progress."""

    def __init__(self, path, geometry: SensorGeometry):
        self.geometry = geometry
        self._last_t = -1
        try:
            self._fh = open(path, "wb")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self._fh.write(encode_header(geometry))
        self.bytes_written = HEADER_SIZE

    def append(self, events: np.ndarray) -> None:
        if events.size == 0:
            return
        check_sorted(events)
        check_bounds(events, self.geometry)
        if int(events["t"][0]) < self._last_t:
            raise UnsortedEvents("appended chunk starts before the previous one ended")
        self._last_t = int(events["t"][-1])
        data = encode_records(events)
        self._fh.write(data)
        self.bytes_written += len(data)

    def close(self) -> int:
        if not self._fh.closed:
            self._fh.close()
        return self.bytes_written

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def parse_event_bytes(data: bytes) -> tuple[SensorGeometry, np.ndarray]:
    if len(data) < HEADER_SIZE:
        if data[:4] != MAGIC[: len(data[:4])]:
            raise BadMagic(f"bad magic {data[:4]!r}")
        raise TruncatedRecord("file shorter than the 16-byte header")
    magic, version, width, height, _reserved = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"EVS1 version {version} is not supported")
    geometry = SensorGeometry(width, height)
    body = len(data) - HEADER_SIZE
    if body % RECORD_SIZE:
        raise TruncatedRecord(f"{body % RECORD_SIZE} trailing bytes after the last record")
    events = np.frombuffer(data, dtype=EVENT_DTYPE, offset=HEADER_SIZE).copy()
    if events.size > 1 and np.any(events["t"][1:] < events["t"][:-1]):
        raise NonMonotonicTimestamp("timestamps decrease within the file")
    check_bounds(events, geometry)
    if events.size and np.any(events["p"] > 1):
        raise CorruptRecord("polarity byte must be 0 or 1")
    return geometry, events


def read_event_file(path) -> tuple[SensorGeometry, np.ndarray]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return parse_event_bytes(data)


# -- windows -------------------------------------------------------------------

@dataclass(frozen=True)
class EventWindow:
    t_start_us: int
    t_end_us: int
    events: np.ndarray

    def __len__(self) -> int:
        return int(self.events.size)

    def replace_events(self, events: np.ndarray) -> "EventWindow":
        return EventWindow(self.t_start_us, self.t_end_us, events)


def window_stream(events: np.ndarray, window_us: int,
                  duration_us: int | None = None) -> list[EventWindow]:
    """Split a sorted stream into consecutive half-open windows of ``window_us``.

    Windows are emitted even when empty.  Without ``duration_us`` the stream is
    covered up to the window holding its last event.
    """
    return list(iter_windows(events, window_us, duration_us))


def iter_windows(events: np.ndarray, window_us: int,
                 duration_us: int | None = None) -> Iterator[EventWindow]:
    if window_us <= 0:
        raise ZeroWindow("window_us must be positive")
    check_sorted(events)
    t = events["t"]
    if duration_us is None:
        n = int(t[-1]) // window_us + 1 if t.size else 0
    else:
        n = -(-int(duration_us) // window_us)
        if t.size:
            n = max(n, int(t[-1]) // window_us + 1)
    edges = np.arange(n + 1, dtype=np.uint64) * np.uint64(window_us)
    cuts = np.searchsorted(t, edges, side="left")
    for k in range(n):
        yield EventWindow(k * window_us, (k + 1) * window_us, events[cuts[k]:cuts[k + 1]])
