"""Hot-pixel learning and removal, plus per-window polarity counts."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CoordinateOutOfRange, EmptyGeometry
from .events import EventWindow, Polarity, SensorGeometry


@dataclass(frozen=True)
class HotPixelParams:
    learn_period_us: int = 100_000
    hot_threshold: int = 50

    def __post_init__(self):
        if self.learn_period_us <= 0:
            raise ValueError("learn_period_us must be positive")
        if self.hot_threshold < 1:
            raise ValueError("hot_threshold must be at least 1")


@dataclass(frozen=True)
class HotPixelSet:
    geometry: SensorGeometry
    hot: frozenset = frozenset()
    _grid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.zeros(self.geometry.shape, dtype=bool)
        for x, y in self.hot:
            if not self.geometry.contains(x, y):
                raise CoordinateOutOfRange(f"hot pixel ({x}, {y}) outside the sensor")
            grid[y, x] = True
        grid.setflags(write=False)
        object.__setattr__(self, "_grid", grid)

    @property
    def grid(self) -> np.ndarray:
        """Read-only boolean (rows, cols) map of hot pixels."""
        return self._grid

    def __contains__(self, xy) -> bool:
        return tuple(xy) in self.hot

    def __len__(self) -> int:
        return len(self.hot)

    def sorted_pixels(self) -> list[tuple[int, int]]:
        return sorted(self.hot, key=lambda p: (p[1], p[0]))

    def dumps(self) -> str:
        lines = [f"{self.geometry.width} {self.geometry.height}"]
        lines += [f"{x} {y}" for x, y in self.sorted_pixels()]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "HotPixelSet":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or len(rows[0]) != 2:
            raise ValueError("hot-pixel file must start with 'width height'")
        geometry = SensorGeometry(int(rows[0][0]), int(rows[0][1]))
        hot = frozenset((int(x), int(y)) for x, y in rows[1:])
        return cls(geometry, hot)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "HotPixelSet":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def pixel_counts(events: np.ndarray, geometry: SensorGeometry) -> np.ndarray:
    """Per-pixel event counts (both polarities) as a (rows, cols) int array."""
    flat = events["y"].astype(np.int64) * geometry.width + events["x"]
    counts = np.bincount(flat, minlength=geometry.width * geometry.height)
    return counts.reshape(geometry.shape)


def learn_hot_pixels(events: np.ndarray, params: HotPixelParams,
                     geometry: SensorGeometry) -> HotPixelSet:
    """Classify pixels that fire at least ``hot_threshold`` times in the learning period."""
    if geometry.width <= 0 or geometry.height <= 0:
        raise EmptyGeometry("cannot learn hot pixels on an empty sensor")
    end = np.searchsorted(events["t"], params.learn_period_us, side="left")
    counts = pixel_counts(events[:end], geometry)
    ys, xs = np.nonzero(counts >= params.hot_threshold)
    return HotPixelSet(geometry, frozenset(zip(xs.tolist(), ys.tolist())))


def apply_filter(window: EventWindow, hot: HotPixelSet) -> EventWindow:
    if not hot.hot or window.events.size == 0:
        return window
    ev = window.events
    keep = ~hot.grid[ev["y"], ev["x"]]
    return window.replace_events(ev[keep])


def count_polarities(window: EventWindow) -> tuple[int, int]:
    pos = int(np.count_nonzero(window.events["p"] == Polarity.POS))
    return pos, len(window) - pos
