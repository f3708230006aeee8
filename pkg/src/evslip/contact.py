"""Contact-area mask built from negative events seen while the gripper closes.

Every pixel in the support gets the same weight ``1/area_px``; the weights sum
to one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CoordinateOutOfRange, NoContact
from .events import EventWindow, Polarity, SensorGeometry, check_bounds


@dataclass
class ContactAccumulator:
    geometry: SensorGeometry
    neg_counts: np.ndarray = None
    total_neg: int = 0

    def __post_init__(self):
        if self.neg_counts is None:
            self.neg_counts = np.zeros(self.geometry.shape, dtype=np.int64)

    def copy(self) -> "ContactAccumulator":
        return ContactAccumulator(self.geometry, self.neg_counts.copy(), self.total_neg)


def accumulate(acc: ContactAccumulator, window: EventWindow) -> ContactAccumulator:
    """Add one NEG count per negative event in ``window``; positives are ignored.

    Mutates and returns ``acc``.
    """
    ev = window.events
    if ev.size == 0:
        return acc
    check_bounds(ev, acc.geometry)
    neg = ev[ev["p"] == Polarity.NEG]
    if neg.size:
        np.add.at(acc.neg_counts, (neg["y"], neg["x"]), 1)
        acc.total_neg += int(neg.size)
    return acc


@dataclass(frozen=True)
class ContactMask:
    geometry: SensorGeometry
    support: np.ndarray  # bool (rows, cols)
    area_px: int = field(init=False)

    def __post_init__(self):
        support = np.array(self.support, dtype=bool, copy=True)
        if support.shape != self.geometry.shape:
            raise ValueError("support grid does not match the sensor geometry")
        support.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "area_px", int(support.sum()))

    @classmethod
    def empty(cls, geometry: SensorGeometry) -> "ContactMask":
        return cls(geometry, np.zeros(geometry.shape, dtype=bool))

    @property
    def weight(self) -> float:
        return 1.0 / self.area_px if self.area_px else 0.0

    @property
    def weights(self) -> np.ndarray:
        return self.support * self.weight

    def pixels(self) -> list[tuple[int, int]]:
        ys, xs = np.nonzero(self.support)
        return list(zip(xs.tolist(), ys.tolist()))

    def __eq__(self, other):
        if not isinstance(other, ContactMask):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.support, other.support)

    __hash__ = None

    # -- export / import ---------------------------------------------------

    def to_pgm(self) -> str:
        """ASCII PGM (P2) image: 255 on the support, 0 elsewhere."""
        g = self.geometry
        rows = [" ".join("255" if v else "0" for v in row) for row in self.support]
        return f"P2\n{g.width} {g.height}\n255\n" + "\n".join(rows) + "\n"

    def to_csv(self) -> str:
        g = self.geometry
        lines = [f"# {g.width} {g.height}", "x,y,weight"]
        w = self.weight
        lines += [f"{x},{y},{w:.12g}" for x, y in sorted(self.pixels(), key=lambda p: (p[1], p[0]))]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "ContactMask":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ValueError("mask CSV must start with '# width height'")
        width, height = (int(v) for v in lines[0][1:].split())
        geometry = SensorGeometry(width, height)
        support = np.zeros(geometry.shape, dtype=bool)
        for ln in lines[2:]:
            x, y, _w = ln.split(",")
            x, y = int(x), int(y)
            if not geometry.contains(x, y):
                raise CoordinateOutOfRange(f"mask pixel ({x}, {y}) outside the sensor")
            support[y, x] = True
        return cls(geometry, support)

    def save(self, csv_path, pgm_path=None) -> None:
        Path(csv_path).write_text(self.to_csv(), encoding="utf-8")
        if pgm_path is not None:
            Path(pgm_path).write_text(self.to_pgm(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ContactMask":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


def finalize_mask(acc: ContactAccumulator, min_events: int = 2) -> ContactMask:
    if min_events < 1:
        raise ValueError("min_events must be at least 1")
    support = acc.neg_counts >= min_events
    if not support.any():
        raise NoContact(f"no pixel collected {min_events} negative events")
    return ContactMask(acc.geometry, support)


def mask_weight(mask: ContactMask, x: int, y: int) -> float:
    if not mask.geometry.contains(x, y):
        raise CoordinateOutOfRange(f"({x}, {y}) outside the sensor")
    return mask.weight if mask.support[y, x] else 0.0
