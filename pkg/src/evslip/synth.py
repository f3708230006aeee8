"""Level-crossing event camera looking at the grasp through the silicone pad.

The scene is rendered as per-pixel log intensity: a bright uniform
background, the textured object face drawn at its current vertical offset,
and the part of the face pressed against the pad darkened because the
contact blocks light.  Each pixel keeps a reference level and emits one event
per ``contrast_C`` crossed.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryMismatch
from .events import EVENT_DTYPE, SensorGeometry, empty_events, sort_events
from .plant import ObjectSpec, PlantState, Shape


@dataclass(frozen=True)
class SynthParams:
    contrast_C: float = 0.2
    background_rate_hz: float = 0.0
    hot_pixels: tuple = ()          # ((x, y, rate_hz), ...)
    refractory_us: int = 100

    def __post_init__(self):
        if not self.contrast_C > 0:
            raise ValueError("contrast_C must be positive")
        if self.background_rate_hz < 0 or self.refractory_us < 0:
            raise ValueError("rates and refractory period must be non-negative")
        hot = tuple((int(x), int(y), float(r)) for x, y, r in self.hot_pixels)
        if any(r < 0 for _, _, r in hot):
            raise ValueError("hot pixel rates must be non-negative")
        object.__setattr__(self, "hot_pixels", hot)


@dataclass(frozen=True)
class SceneLayout:
    """Where things sit in the image.  Defaults fit a 240x180 sensor."""

    px_per_mm: float = 1.5
    face_top_px: float = 45.0       # object top edge row at obj_y_mm = 0
    center_x_px: float = 120.0
    pad: tuple = (40, 20, 200, 160)  # x0, y0, x1, y1 (half-open) of the pad window
    background: float = 0.0
    object_level: float = -0.7
    texture_amp: float = 0.3
    contact_depth_per_mm: float = 5.0
    contact_depth_max: float = 1.0
    pad_stiffness: float = 5.0      # N/mm, converts normal force to compression


@dataclass(frozen=True)
class SceneFrame:
    geometry: SensorGeometry
    log_intensity: np.ndarray
    t_us: int = 0

    def __post_init__(self):
        if self.log_intensity.shape != self.geometry.shape:
            raise GeometryMismatch("frame does not match the sensor geometry")


@dataclass(frozen=True)
class _Sprite:
    # object-coordinate rasters padded with one empty row above and below
    diff: np.ndarray       # alpha * (object level + texture - background)
    alpha: np.ndarray
    height: int
    width: int
    radius_px: float


@functools.lru_cache(maxsize=16)
def _sprite(obj: ObjectSpec, layout: SceneLayout) -> _Sprite:
    size = max(1, int(round(obj.width_mm * layout.px_per_mm)))
    rng = np.random.default_rng(obj.texture_seed)
    noise = rng.standard_normal((size + 2, size + 2))
    # 3x3 box blur gives speckle a couple of pixels across
    k = np.ones(3) / 3.0
    noise = np.apply_along_axis(lambda r: np.convolve(r, k, mode="same"), 0, noise)
    noise = np.apply_along_axis(lambda r: np.convolve(r, k, mode="same"), 1, noise)
    tex = noise[1:-1, 1:-1]
    tex = (tex - tex.mean()) / tex.std() * layout.texture_amp
    if obj.shape is Shape.SPHERE:
        c = (size - 1) / 2.0
        yy, xx = np.mgrid[0:size, 0:size]
        alpha = (((yy - c) ** 2 + (xx - c) ** 2) <= (size / 2.0) ** 2).astype(float)
    else:
        alpha = np.ones((size, size))
    diff = alpha * (layout.object_level + tex - layout.background)
    pad_row = np.zeros((1, size))
    diff = np.vstack([pad_row, diff, pad_row])
    alpha = np.vstack([pad_row, alpha, pad_row])
    diff.setflags(write=False)
    alpha.setflags(write=False)
    return _Sprite(diff, alpha, size, size, size / 2.0)


def _contact_patch(obj: ObjectSpec, sprite: _Sprite, compression_mm: float,
                   layout: SceneLayout) -> np.ndarray:
    """Contact indicator in padded object coordinates."""
    patch = np.zeros_like(sprite.alpha)
    if compression_mm <= 0:
        return patch
    if obj.shape is Shape.BOX:
        patch[1:-1] = 1.0
        return patch
    r_mm = obj.width_mm / 2.0
    rc_mm = min(r_mm, math.sqrt(max(0.0, 2.0 * r_mm * compression_mm - compression_mm ** 2)))
    rc = rc_mm * layout.px_per_mm
    c = (sprite.height - 1) / 2.0
    yy, xx = np.mgrid[0:sprite.height, 0:sprite.width]
    patch[1:-1] = (((yy - c) ** 2 + (xx - c) ** 2) <= rc * rc).astype(float)
    return patch


def render_scene(plant: PlantState, obj: ObjectSpec, geometry: SensorGeometry,
                 layout: SceneLayout = SceneLayout(), t_us: int = 0) -> SceneFrame:
    """Deterministic log-intensity frame for the observed plant state."""
    L = np.full(geometry.shape, layout.background, dtype=np.float64)
    sp = _sprite(obj, layout)

    top = layout.face_top_px + plant.obj_y_mm * layout.px_per_mm
    i = math.floor(top)
    f = top - i
    # image row R shows object row R - top; padded index p = R - i + 1 (and p - 1 for the fraction)
    r0 = max(0, i - 1)
    r1 = min(geometry.height, i + sp.height + 1)
    if r1 <= r0:
        return SceneFrame(geometry, L, t_us)
    c0 = int(round(layout.center_x_px - sp.width / 2.0))
    cs0, cs1 = max(0, c0), min(geometry.width, c0 + sp.width)
    if cs1 <= cs0:
        return SceneFrame(geometry, L, t_us)
    sc = slice(cs0 - c0, cs1 - c0)

    p = np.arange(r0, r1) - i + 1
    lo = np.clip(p, 0, sp.height + 1)
    hi = np.clip(p - 1, 0, sp.height + 1)

    def shifted(a: np.ndarray) -> np.ndarray:
        return (1.0 - f) * a[lo, sc] + f * a[hi, sc]

    block = shifted(sp.diff)
    compression = plant.normal_force_N / layout.pad_stiffness
    if compression > 0:
        depth = min(layout.contact_depth_max, layout.contact_depth_per_mm * compression)
        contact = shifted(_contact_patch(obj, sp, compression, layout))
        px0, py0, px1, py1 = layout.pad
        rows = np.arange(r0, r1)[:, None]
        cols = np.arange(cs0, cs1)[None, :]
        in_pad = (rows >= py0) & (rows < py1) & (cols >= px0) & (cols < px1)
        block = block - depth * contact * in_pad
    L[r0:r1, cs0:cs1] += block
    return SceneFrame(geometry, L, t_us)


def emit_events(prev_ref: np.ndarray, frame: SceneFrame, t0_us: int, t1_us: int,
                params: SynthParams) -> tuple[np.ndarray, np.ndarray]:
    """Level-crossing events for the change from ``prev_ref`` to ``frame``.

    A pixel whose log intensity moved by ``d`` emits ``floor(|d| / C)`` events
    of the sign of ``d``, spread evenly over ``(t0_us, t1_us]`` and at least
    ``refractory_us`` apart (excess crossings stay pending in the reference).
    Returns the sorted events and the updated reference levels.
    """
    if prev_ref.shape != frame.log_intensity.shape:
        raise GeometryMismatch("reference levels and frame differ in shape")
    if not t1_us > t0_us:
        raise ValueError("need t0_us < t1_us")
    if t0_us < -1:
        raise ValueError("t0_us must be >= -1 so timestamps stay non-negative")
    C = params.contrast_C
    delta = frame.log_intensity - prev_ref
    q = np.abs(delta).ravel() / C
    idx = np.flatnonzero(q >= 1.0)
    new_ref = prev_ref.copy()
    if idx.size == 0:
        return empty_events(), new_ref
    n = np.floor(q[idx]).astype(np.int64)
    span = int(t1_us - t0_us)
    if params.refractory_us > 0:
        np.minimum(n, span // params.refractory_us, out=n)
        keep = n > 0
        idx, n = idx[keep], n[keep]
        if idx.size == 0:
            return empty_events(), new_ref
    sign = np.sign(delta.ravel()[idx])
    new_ref.ravel()[idx] += n * C * sign
    ys, xs = np.divmod(idx, frame.geometry.width)

    total = int(n.sum())
    pix = np.repeat(np.arange(n.size), n)
    starts = np.cumsum(n) - n
    k = np.arange(total) - np.repeat(starts, n) + 1  # 1..n within each pixel
    ev = np.zeros(total, dtype=EVENT_DTYPE)
    ev["t"] = t0_us + (k * span) // n[pix]
    ev["x"] = xs[pix]
    ev["y"] = ys[pix]
    ev["p"] = (sign[pix] > 0).astype(np.uint8)
    return sort_events(ev), new_ref


def inject_noise(t0_us: int, t1_us: int, params: SynthParams, rng_seed,
                 geometry: SensorGeometry = SensorGeometry()) -> np.ndarray:
    """Background shot noise plus hot pixels over ``[t0_us, t1_us)``.

    Background is Poisson per pixel at ``background_rate_hz`` (drawn as one
    Poisson total spread uniformly over the sensor); hot pixels fire Poisson
    at their own rates.  Polarity is a fair coin.  Deterministic in ``rng_seed``.
    """
    if not t1_us > t0_us:
        raise ValueError("need t0_us < t1_us")
    dt_s = (t1_us - t0_us) * 1e-6
    rng = np.random.default_rng(rng_seed)
    xs, ys = [], []
    if params.background_rate_hz > 0:
        n_bg = rng.poisson(params.background_rate_hz * dt_s * geometry.width * geometry.height)
        xs.append(rng.integers(0, geometry.width, n_bg))
        ys.append(rng.integers(0, geometry.height, n_bg))
    for x, y, rate in params.hot_pixels:
        if not geometry.contains(x, y):
            raise ValueError(f"hot pixel ({x}, {y}) outside the sensor")
        n_hot = rng.poisson(rate * dt_s)
        xs.append(np.full(n_hot, x))
        ys.append(np.full(n_hot, y))
    if not xs:
        return empty_events()
    x = np.concatenate(xs)
    if x.size == 0:
        return empty_events()
    ev = np.zeros(x.size, dtype=EVENT_DTYPE)
    ev["x"] = x
    ev["y"] = np.concatenate(ys)
    ev["t"] = t0_us + rng.integers(0, t1_us - t0_us, x.size)
    ev["p"] = rng.integers(0, 2, x.size)
    return sort_events(ev)


@dataclass
class Camera:
    """Stateful wrapper: holds per-pixel reference levels between ticks.

    Frames are only re-rendered when the observed state changes; an unchanged
    frame cannot cross any threshold, so skipping it emits nothing.
    """

    obj: ObjectSpec
    geometry: SensorGeometry = SensorGeometry()
    params: SynthParams = SynthParams()
    layout: SceneLayout = SceneLayout()
    ref: np.ndarray = field(default=None, repr=False)
    _key: tuple = field(default=None, repr=False)
    _pending: bool = field(default=False, repr=False)

    def _state_key(self, state: PlantState) -> tuple:
        top = self.layout.face_top_px + state.obj_y_mm * self.layout.px_per_mm
        if top >= self.geometry.height + 1:
            return ("out-of-view",)
        return (state.obj_y_mm, state.normal_force_N)

    def prime(self, state: PlantState) -> None:
        self.ref = render_scene(state, self.obj, self.geometry, self.layout).log_intensity.copy()
        self._key = self._state_key(state)

    def observe(self, state: PlantState, t0_us: int, t1_us: int) -> np.ndarray:
        if self.ref is None:
            self.prime(state)
            return empty_events()
        key = self._state_key(state)
        if key == self._key and not self._pending:
            return empty_events()
        self._key = key
        frame = render_scene(state, self.obj, self.geometry, self.layout, t1_us)
        events, self.ref = emit_events(self.ref, frame, t0_us, t1_us, self.params)
        # refractory-limited pixels still owe crossings for an unchanged frame
        self._pending = bool(np.any(np.abs(frame.log_intensity - self.ref) >= self.params.contrast_C))
        return events
