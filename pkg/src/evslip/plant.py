"""Gripper, silicone pad, grasped object and FSR402 force sensor.

Units: millimetres, seconds, newtons, grams.  ``obj_y_mm`` grows downward
from the grasp height.  The object rests on its support until the gripper
reaches its commanded hold position; from then on gravity acts against
two-pad Coulomb friction.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import NegativeForce, NonPositiveDt

G = 9.81


class Shape(str, enum.Enum):
    BOX = "BOX"
    SPHERE = "SPHERE"


class Phase(str, enum.Enum):
    OPEN = "OPEN"
    CLOSING = "CLOSING"
    HOLDING = "HOLDING"
    RELEASED = "RELEASED"


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    mass_g: float
    width_mm: float
    shape: Shape = Shape.BOX
    mu_static: float = 0.8
    mu_kinetic: float = 0.6
    texture_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if self.mass_g <= 0 or self.width_mm <= 0:
            raise ValueError("mass_g and width_mm must be positive")
        if not 0 < self.mu_kinetic <= self.mu_static:
            raise ValueError("need 0 < mu_kinetic <= mu_static")

    @property
    def mass_kg(self) -> float:
        return self.mass_g / 1000.0

    @property
    def weight_n(self) -> float:
        return self.mass_g * G / 1000.0


# The two plastic boxes are the reference light and heavy objects; the sphere
# and the 800 g box are filler entries so the catalog has four shapes/weights.
CATALOG = {
    "plastic_box_110": ObjectSpec("plastic_box_110", 110.0, 60.0, Shape.BOX, 0.8, 0.6, 11),
    "plastic_box_1360": ObjectSpec("plastic_box_1360", 1360.0, 60.0, Shape.BOX, 0.8, 0.6, 13),
    "sphere_300": ObjectSpec("sphere_300", 300.0, 60.0, Shape.SPHERE, 0.8, 0.6, 3),
    "box_800": ObjectSpec("box_800", 800.0, 60.0, Shape.BOX, 0.8, 0.6, 8),
}


@dataclass(frozen=True)
class PlantParams:
    k_sil: float = 5.0            # N/mm silicone stiffness
    max_open_mm: float = 80.0
    slew_pct_s: float = 50.0
    substep_s: float = 1e-4
    v_ref_mm_s: float = 20.0      # contact retention scale for the FSR during slip
    drop_limit_mm: float = 30.0   # past this the object has left the pads

    def __post_init__(self):
        if self.k_sil <= 0 or self.max_open_mm <= 0 or self.slew_pct_s <= 0:
            raise ValueError("plant constants must be positive")
        if not 0 < self.substep_s <= 1e-4:
            raise ValueError("substep_s must be in (0, 1e-4]")
        if self.v_ref_mm_s <= 0 or self.drop_limit_mm <= 0:
            raise ValueError("v_ref_mm_s and drop_limit_mm must be positive")


@dataclass(frozen=True)
class FsrReading:
    adc: int

    def __post_init__(self):
        if not 0 <= self.adc <= 1024:
            raise ValueError("ADC reading outside [0, 1024]")


@dataclass(frozen=True)
class PlantState:
    actual_pos_pct: float = 100.0
    commanded_pos_pct: float = 100.0
    obj_y_mm: float = 0.0
    obj_v_mm_s: float = 0.0
    normal_force_N: float = 0.0
    slipping: bool = False
    phase: Phase = Phase.OPEN
    sensed_force_N: float = 0.0

    @property
    def dropped(self) -> bool:
        return self.phase is Phase.RELEASED


def gap_mm(position_pct: float, params: PlantParams) -> float:
    return position_pct / 100.0 * params.max_open_mm


def contact_force(gap: float, obj: ObjectSpec, k_sil: float = 5.0) -> float:
    """Per-pad normal force of a linear silicone spring compressed by the object."""
    if gap < 0:
        raise ValueError("gap_mm must be non-negative")
    return k_sil * max(0.0, obj.width_mm - gap)


def slip_dynamics(normal_force: float, obj: ObjectSpec, v: float) -> tuple[float, bool]:
    """Vertical acceleration (mm/s^2, downward) and slip flag under Coulomb friction.

    ``v > 0`` means the object is already sliding.  A sliding object feels
    kinetic friction from both pads, which may exceed the weight and
    decelerate it; re-sticking when the velocity reaches zero is left to the
    integrator.
    """
    if normal_force < 0:
        raise NegativeForce("normal force must be non-negative")
    w = obj.weight_n
    if v <= 0.0 and 2.0 * obj.mu_static * normal_force >= w:
        return 0.0, False
    a = (w - 2.0 * obj.mu_kinetic * normal_force) / obj.mass_kg * 1000.0
    if v <= 0.0 and a <= 0.0:
        return 0.0, False
    return a, True


def contact_retention(v_mm_s: float, v_ref_mm_s: float = 20.0) -> float:
    """Fraction of pad-to-sensor contact kept while the object slides."""
    return 1.0 / (1.0 + abs(v_mm_s) / v_ref_mm_s)


FSR_R_FIXED = 10_000.0
FSR_R_OPEN = 1.5e6
FSR_A = 1.8e6
FSR_B = 0.889
FSR_MIN_N = 0.981  # 100 g-force


def fsr_resistance(force_n: float) -> float:
    if force_n < 0:
        raise NegativeForce("force must be non-negative")
    if force_n < FSR_MIN_N:
        return FSR_R_OPEN
    return FSR_A * (force_n / G * 1000.0) ** (-FSR_B)


def fsr_adc(force_n: float) -> FsrReading:
    """10-bit divider reading of the FSR402 with a 10 kOhm fixed resistor."""
    r = fsr_resistance(force_n)
    return FsrReading(int(math.floor(1023.0 * FSR_R_FIXED / (FSR_R_FIXED + r) + 0.5)))


def _next_phase(phase: Phase, actual: float, cmd: float) -> Phase:
    if phase is Phase.OPEN and cmd < actual:
        return Phase.CLOSING
    if phase is Phase.CLOSING and actual == cmd:
        return Phase.HOLDING
    return phase


def step_plant(state: PlantState, cmd, dt_s: float, obj: ObjectSpec,
               params: PlantParams = PlantParams()) -> PlantState:
    """Advance the plant by ``dt_s`` seconds with commanded position ``cmd``.

    ``cmd`` may be a GripCommand or a plain percentage.  Integration uses
    semi-implicit Euler with substeps no longer than ``params.substep_s``.
    """
    if not dt_s > 0:
        raise NonPositiveDt("dt_s must be positive")
    if dt_s > 1e-3 + 1e-12:
        raise ValueError("dt_s must not exceed one millisecond")
    target = float(getattr(cmd, "position_pct", cmd))
    target = min(max(target, 0.0), 100.0)

    n_sub = max(1, math.ceil(round(dt_s / params.substep_s, 9)))
    h = dt_s / n_sub
    max_move = params.slew_pct_s * h

    act = state.actual_pos_pct
    y, v = state.obj_y_mm, state.obj_v_mm_s
    slipping = state.slipping
    phase = state.phase
    normal = state.normal_force_N
    for _ in range(n_sub):
        d = target - act
        act = target if abs(d) <= max_move else act + math.copysign(max_move, d)
        phase = _next_phase(phase, act, target)
        if phase is Phase.HOLDING and y > params.drop_limit_mm:
            phase = Phase.RELEASED
        if phase is Phase.RELEASED:
            normal = 0.0
        else:
            normal = contact_force(gap_mm(act, params), obj, params.k_sil)
        if phase in (Phase.OPEN, Phase.CLOSING):
            continue  # object still rests on its support
        a, slipping = slip_dynamics(normal, obj, v)
        if slipping:
            v += a * h
            if v <= 0.0:
                v, slipping = 0.0, False
            y += v * h
        else:
            v = 0.0

    sensed = normal * contact_retention(v, params.v_ref_mm_s) if slipping else normal
    return replace(
        state,
        actual_pos_pct=act,
        commanded_pos_pct=target,
        obj_y_mm=y,
        obj_v_mm_s=v,
        normal_force_N=normal,
        slipping=slipping,
        phase=phase,
        sensed_force_N=sensed,
    )


def observed_state(actual_pos_pct: float, obj_y_mm: float, slipping: bool,
                   obj: ObjectSpec, params: PlantParams) -> PlantState:
    """Reconstruct what a camera sees from the quantities carried in telemetry."""
    if obj_y_mm > params.drop_limit_mm:
        normal = 0.0
    else:
        normal = contact_force(gap_mm(actual_pos_pct, params), obj, params.k_sil)
    return PlantState(actual_pos_pct=actual_pos_pct, commanded_pos_pct=actual_pos_pct,
                      obj_y_mm=obj_y_mm, normal_force_N=normal, slipping=slipping)
