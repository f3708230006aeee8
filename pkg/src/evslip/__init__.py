"""Event-camera slip detection and closed-loop grip control, with a simulated gripper."""
from .config import RunConfig, load_config, parse_config
from .contact import ContactMask, finalize_mask
from .control import GripCommand, PidGains, PidState, command_position, pid_step, slip_error
from .events import EventWindow, Polarity, SensorGeometry, read_event_file, write_event_file
from .experiment import RunReport, replay, run_experiment, sweep_gains
from .noise_filter import HotPixelParams, HotPixelSet, apply_filter, learn_hot_pixels
from .plant import CATALOG, ObjectSpec, PlantParams, PlantState, step_plant
from .synth import Camera, SynthParams, emit_events, render_scene

__version__ = "0.1.0"
