"""Slip error and the discrete PID controller driving gripper position.

The error of one sample window is the number of positive events that land
inside the contact mask.  The controller output ``u`` is an offset that closes
the gripper below its pre-slip hold position.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .contact import ContactMask
from .errors import NonFiniteError
from .events import EventWindow, Polarity

MODES = ("P", "PD", "PI", "PID")


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.08
    ki: float = 4.0
    kd: float = 0.0
    mode: str = "PI"

    def __post_init__(self):
        mode = self.mode.upper()
        if mode not in MODES:
            raise ValueError(f"unknown controller mode {self.mode!r}")
        for name in ("kp", "ki", "kd"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite non-negative number")
        object.__setattr__(self, "mode", mode)
        if "I" not in mode:
            object.__setattr__(self, "ki", 0.0)
        if "D" not in mode:
            object.__setattr__(self, "kd", 0.0)


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    sample_time_s: float = 0.001
    setpoint: float = 0.0
    integral_max: float = 200.0

    def __post_init__(self):
        if not self.sample_time_s > 0:
            raise ValueError("sample_time_s must be positive")
        if not self.integral_max >= 0:
            raise ValueError("integral_max must be non-negative")


@dataclass(frozen=True)
class GripCommand:
    position_pct: float

    def __post_init__(self):
        if not 0.0 <= self.position_pct <= 100.0:
            raise ValueError(f"position {self.position_pct} outside [0, 100]")


def slip_error(window: EventWindow, mask: ContactMask) -> float:
    """Count of POS events of ``window`` whose pixel lies in the mask support."""
    ev = window.events
    if ev.size == 0 or mask.area_px == 0:
        return 0.0
    pos = ev[ev["p"] == Polarity.POS]
    return float(np.count_nonzero(mask.support[pos["y"], pos["x"]]))


def pid_step(state: PidState, gains: PidGains, error: float) -> tuple[float, PidState]:
    """One controller update.

    The integral uses rectangular integration and is clamped to
    ``[0, integral_max]``; the derivative is a backward difference.
    """
    if not math.isfinite(error):
        raise NonFiniteError(f"controller error must be finite, got {error}")
    # process variable is the slip count; deviation from setpoint drives the loop
    e = error - state.setpoint
    ts = state.sample_time_s
    integral = min(max(state.integral + e * ts, 0.0), state.integral_max)
    u = gains.kp * e + gains.ki * integral + gains.kd * (e - state.prev_error) / ts
    return u, replace(state, integral=integral, prev_error=e)


def command_position(u: float, base_position_pct: float, gain_to_pct: float = 0.5) -> GripCommand:
    """Map controller output to a gripper position below ``base_position_pct``.

    Negative outputs leave the gripper at its base; the result is clamped to
    the physical [0, 100] range.
    """
    pos = base_position_pct - gain_to_pct * max(u, 0.0)
    return GripCommand(min(max(pos, 0.0), 100.0))
