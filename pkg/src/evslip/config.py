"""Run configuration: flat ``key = value`` text with dotted keys.

Lines starting with ``#`` are comments.  Unknown keys are rejected.  Example::

    object = plastic_box_1360
    gains.mode = PI
    gains.kp = 0.08
    cycle_s = 20
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .control import PidGains
from .errors import ConfigInvalid
from .events import SensorGeometry
from .noise_filter import HotPixelParams
from .plant import CATALOG, ObjectSpec, PlantParams, Shape
from .synth import SceneLayout, SynthParams

DEFAULT_HOT_PIXELS = ((30, 20, 2000.0), (120, 90, 3000.0), (100, 60, 2500.0), (210, 150, 1500.0))


@dataclass(frozen=True)
class NetConfig:
    mode: str = "inprocess"   # or "sockets"
    host: str = "127.0.0.1"
    port: int = 7402
    handshake_timeout_s: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    object: ObjectSpec = CATALOG["plastic_box_110"]
    gains: PidGains = PidGains()
    cycle_s: float = 20.0
    open_s: float = 0.2
    base_position_pct: float = 73.0
    gain_to_pct: float = 0.5
    integral_max: float = 200.0
    sample_time_s: float = 0.001
    min_contact_events: int = 2
    burst_gap_ms: int = 10
    seed: int = 0
    synth: SynthParams = SynthParams(hot_pixels=DEFAULT_HOT_PIXELS)
    filter: HotPixelParams = HotPixelParams()
    plant: PlantParams = PlantParams()
    layout: SceneLayout = SceneLayout()
    geometry: SensorGeometry = SensorGeometry()
    net: NetConfig = NetConfig()

    def __post_init__(self):
        if not self.cycle_s > 0:
            raise ConfigInvalid("cycle_s must be positive")
        if not 0 <= self.base_position_pct <= 100:
            raise ConfigInvalid("base_position_pct must be within [0, 100]")
        if self.sample_time_s != 0.001:
            raise ConfigInvalid("the control loop runs at a fixed 1 ms sample time")
        if self.open_s * 1e6 < self.filter.learn_period_us:
            raise ConfigInvalid("open_s must cover the hot-pixel learning period")
        if self.open_s >= self.cycle_s:
            raise ConfigInvalid("open_s must be shorter than the cycle")
        if self.min_contact_events < 1 or self.burst_gap_ms < 1:
            raise ConfigInvalid("min_contact_events and burst_gap_ms must be >= 1")
        if self.net.mode not in ("inprocess", "sockets"):
            raise ConfigInvalid(f"net.mode must be inprocess or sockets, not {self.net.mode!r}")

    @property
    def ticks(self) -> int:
        return int(round(self.cycle_s * 1000))

    @property
    def open_ticks(self) -> int:
        return int(round(self.open_s * 1000))


def _parse_hot_pixels(text: str) -> tuple:
    """``x:y:rate;x:y:rate`` (empty string for none)."""
    out = []
    for item in text.replace(",", ";").split(";"):
        item = item.strip()
        if not item:
            continue
        x, y, rate = item.split(":")
        out.append((int(x), int(y), float(rate)))
    return tuple(out)


# key -> (section, field, parser); section None means a top-level RunConfig field
_KEYS = {
    "cycle_s": (None, "cycle_s", float),
    "open_s": (None, "open_s", float),
    "base_position_pct": (None, "base_position_pct", float),
    "seed": (None, "seed", int),
    "gains.kp": ("gains", "kp", float),
    "gains.ki": ("gains", "ki", float),
    "gains.kd": ("gains", "kd", float),
    "gains.mode": ("gains", "mode", str),
    "control.gain_to_pct": (None, "gain_to_pct", float),
    "control.integral_max": (None, "integral_max", float),
    "control.sample_time_s": (None, "sample_time_s", float),
    "mask.min_events": (None, "min_contact_events", int),
    "report.burst_gap_ms": (None, "burst_gap_ms", int),
    "synth.contrast": ("synth", "contrast_C", float),
    "synth.background_rate_hz": ("synth", "background_rate_hz", float),
    "synth.refractory_us": ("synth", "refractory_us", int),
    "synth.hot_pixels": ("synth", "hot_pixels", _parse_hot_pixels),
    "filter.learn_period_us": ("filter", "learn_period_us", int),
    "filter.hot_threshold": ("filter", "hot_threshold", int),
    "plant.k_sil": ("plant", "k_sil", float),
    "plant.max_open_mm": ("plant", "max_open_mm", float),
    "plant.slew_pct_s": ("plant", "slew_pct_s", float),
    "plant.substep_s": ("plant", "substep_s", float),
    "plant.v_ref_mm_s": ("plant", "v_ref_mm_s", float),
    "plant.drop_limit_mm": ("plant", "drop_limit_mm", float),
    "sensor.width": ("geometry", "width", int),
    "sensor.height": ("geometry", "height", int),
    "net.mode": ("net", "mode", str),
    "net.host": ("net", "host", str),
    "net.port": ("net", "port", int),
    "net.handshake_timeout_s": ("net", "handshake_timeout_s", float),
    "object.mass_g": ("object", "mass_g", float),
    "object.width_mm": ("object", "width_mm", float),
    "object.shape": ("object", "shape", lambda s: Shape(s.upper())),
    "object.mu_static": ("object", "mu_static", float),
    "object.mu_kinetic": ("object", "mu_kinetic", float),
    "object.texture_seed": ("object", "texture_seed", int),
}


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    top: dict = {}
    sections: dict[str, dict] = {}
    object_name = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected 'key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key == "object":
            if value not in CATALOG:
                raise ConfigInvalid(f"line {lineno}: unknown object {value!r}")
            object_name = value
            continue
        if key not in _KEYS:
            raise ConfigInvalid(f"line {lineno}: unknown key {key!r}")
        section, name, parse = _KEYS[key]
        try:
            parsed = parse(value)
        except (ValueError, TypeError) as exc:
            raise ConfigInvalid(f"line {lineno}: bad value for {key}: {exc}") from None
        if section is None:
            top[name] = parsed
        else:
            sections.setdefault(section, {})[name] = parsed

    cfg = base or RunConfig()
    try:
        obj = CATALOG[object_name] if object_name else cfg.object
        updates = dict(top)
        for section, fields in sections.items():
            current = obj if section == "object" else getattr(cfg, section)
            updates[section] = replace(current, **fields)
        if "object" not in updates:
            updates["object"] = obj
        return replace(cfg, **updates)
    except ConfigInvalid:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid(str(exc)) from None


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    """Serialize back to the text format (round-trips through parse_config)."""
    lines = [f"object = {cfg.object.name}"]
    for key, (section, name, _parse) in _KEYS.items():
        holder = cfg if section is None else getattr(cfg, section)
        value = getattr(holder, name)
        if key == "synth.hot_pixels":
            value = ";".join(f"{x}:{y}:{r!r}" for x, y, r in value)
        elif isinstance(value, float):
            value = repr(value)
        elif hasattr(value, "value"):
            value = value.value
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def with_gains(cfg: RunConfig, kp: float, ki: float, kd: float | None = None,
               mode: str | None = None) -> RunConfig:
    kd = cfg.gains.kd if kd is None else kd
    return replace(cfg, gains=PidGains(kp, ki, kd, mode or cfg.gains.mode))


__all__ = ["RunConfig", "NetConfig", "parse_config", "load_config", "dump_config", "with_gains"]
