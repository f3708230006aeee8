"""Closed-loop grasp experiments, offline replay and gain sweeps.

One control tick is one millisecond.  At tick ``k`` the sensor side holds
telemetry for time ``k`` ms, observes the scene into event window
``[k, k+1)`` ms, computes the slip error and sends a grip command; the plant
integrates one millisecond and answers with telemetry for ``k+1``.  The plant
is either called directly or reached over a socket in a child process; both
paths carry exactly the same values, so their traces are byte-identical.
"""
from __future__ import annotations

import multiprocessing as mp
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import netlink
from .config import RunConfig, with_gains
from .contact import ContactAccumulator, ContactMask, accumulate, finalize_mask
from .control import PidState, command_position, pid_step, slip_error
from .errors import EvslipError, MaskFailure, NetworkFailure, NoContact
from .events import (
    EventFileWriter,
    EventWindow,
    concat,
    iter_windows,
    read_event_file,
    sort_events,
)
from .noise_filter import HotPixelSet, apply_filter, learn_hot_pixels
from .plant import PlantState, fsr_adc, observed_state, step_plant
from .synth import Camera, inject_noise
from .traces import export_svg, format_csv

WINDOW_US = 1000
OPEN_PCT = 100.0

POSITION_HEADER = ("t_ms", "commanded", "actual", "changed")
FORCE_HEADER = ("t_ms", "adc")
TRACE_HEADER = ("t_ms", "error", "u", "position_pct")
PLANT_HEADER = ("t_ms", "obj_y_mm", "slipping")
SWEEP_HEADER = ("kp", "ki", "mode", "slip_events", "total_slip_mm",
                "final_position_pct", "dropped")


@dataclass(frozen=True)
class RunReport:
    slip_events: int
    total_slip_mm: float
    final_position_pct: float
    min_adc: int
    max_adc: int
    ticks: int
    dropped: bool
    holding_tick: int = -1
    wall_s: float = 0.0
    tick_budget_fraction: float = float("nan")   # socket mode only

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunResult:
    report: RunReport
    position: list = field(default_factory=list)
    force: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    plant: list = field(default_factory=list)
    events: np.ndarray = None
    mask: ContactMask = None
    hot: HotPixelSet = None
    tick_wall_s: np.ndarray = None

    def csv_texts(self) -> dict[str, str]:
        return {
            "position.csv": format_csv(POSITION_HEADER, self.position),
            "force.csv": format_csv(FORCE_HEADER, self.force),
            "trace.csv": format_csv(TRACE_HEADER, self.trace),
            "plant.csv": format_csv(PLANT_HEADER, self.plant),
        }


def slip_bursts(errors, gap_ms: int) -> list[tuple[int, int]]:
    """Maximal runs of ticks with error > 0, merging runs separated by < ``gap_ms``."""
    ticks = np.flatnonzero(np.asarray(errors, dtype=float) > 0)
    if ticks.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(ticks) >= gap_ms)
    starts = np.concatenate(([ticks[0]], ticks[breaks + 1]))
    ends = np.concatenate((ticks[breaks], [ticks[-1]]))
    return [(int(s), int(e)) for s, e in zip(starts, ends)]


# -- plant endpoints -----------------------------------------------------------

class LocalPlant:
    """Plant stepped in the caller's process."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.state = PlantState()
        self.t_ms = 0

    def _telemetry(self) -> netlink.Telemetry:
        s = self.state
        return netlink.Telemetry(self.t_ms, s.actual_pos_pct, fsr_adc(s.sensed_force_N).adc,
                                 s.obj_y_mm, s.slipping)

    def start(self) -> netlink.Telemetry:
        return self._telemetry()

    def step(self, position_pct: float) -> netlink.Telemetry:
        self.state = step_plant(self.state, position_pct, self.cfg.sample_time_s,
                                self.cfg.object, self.cfg.plant)
        self.t_ms += 1
        return self._telemetry()

    def close(self) -> None:
        pass


def serve_plant(cfg: RunConfig, server) -> None:
    """Plant process body: accept one sensor, then answer every GRIP_CMD."""
    plant = LocalPlant(cfg)
    session = None
    try:
        session = netlink.accept(server, timeout=cfg.net.handshake_timeout_s)
        session.send(plant.start())
        while True:
            msg = session.recv()
            if isinstance(msg, netlink.Bye):
                break
            session.send(plant.step(msg.position_pct))
    finally:
        if session is not None:
            session.close()
        server.close()


def _plant_process(cfg: RunConfig, conn) -> None:
    try:
        server = netlink.listen(cfg.net.host, cfg.net.port)
    except OSError as exc:
        conn.send(("error", str(exc)))
        return
    conn.send(("port", server.getsockname()[1]))
    try:
        serve_plant(cfg, server)
    except (EvslipError, OSError):
        pass  # the sensor side reports the failure


class SocketPlant:
    """Plant in a child process, reached over the framed socket link."""

    def __init__(self, cfg: RunConfig):
        ctx = mp.get_context()
        parent, child = ctx.Pipe()
        self.proc = ctx.Process(target=_plant_process, args=(cfg, child), daemon=True)
        self.proc.start()
        if not parent.poll(10.0):
            self.proc.kill()
            raise NetworkFailure("plant process did not start")
        kind, value = parent.recv()
        if kind != "port":
            self.proc.join(1.0)
            raise NetworkFailure(f"plant cannot listen: {value}")
        self.port = value
        self.session = netlink.connect(cfg.net.host, value, timeout=cfg.net.handshake_timeout_s)
        self.timeout = max(cfg.net.handshake_timeout_s, 1.0)

    def _recv(self) -> netlink.Telemetry:
        try:
            return self.session.recv(timeout=self.timeout)
        except TimeoutError as exc:
            raise NetworkFailure("plant stopped answering") from exc

    def start(self) -> netlink.Telemetry:
        return self._recv()

    def step(self, position_pct: float) -> netlink.Telemetry:
        self.session.send(netlink.GripCmd(position_pct))
        return self._recv()

    def close(self) -> None:
        if not self.session.closed:
            try:
                self.session.send(netlink.Bye())
            except NetworkFailure:
                pass
            self.session.close()
        self.proc.join(2.0)
        if self.proc.is_alive():
            self.proc.kill()


# -- sensor / controller side --------------------------------------------------

class SensorLoop:
    """Camera, noise filter, contact mask and controller for one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.camera = Camera(cfg.object, cfg.geometry, cfg.synth, cfg.layout)
        self.learn_ticks = -(-cfg.filter.learn_period_us // WINDOW_US)
        self.learn_buffer: list[np.ndarray] = []
        self.hot = HotPixelSet(cfg.geometry)
        self.acc = ContactAccumulator(cfg.geometry)
        self.mask: ContactMask | None = None
        self.pid = PidState(sample_time_s=cfg.sample_time_s, integral_max=cfg.integral_max)
        self.phase = "OPEN"
        self.holding_tick = -1

    def window(self, k: int, tel: netlink.Telemetry) -> np.ndarray:
        """Raw events of window ``k`` given telemetry at time ``k`` ms."""
        cfg = self.cfg
        seen = observed_state(tel.actual_pos_pct, tel.obj_y_mm, bool(tel.slipping),
                              cfg.object, cfg.plant)
        t0 = k * WINDOW_US
        scene = self.camera.observe(seen, t0 - 1, t0 + WINDOW_US - 1)
        noise = inject_noise(t0, t0 + WINDOW_US, cfg.synth, (cfg.seed, k), cfg.geometry)
        if noise.size == 0:
            return scene
        if scene.size == 0:
            return noise
        return sort_events(np.concatenate((scene, noise)))

    def control(self, k: int, tel: netlink.Telemetry, raw: np.ndarray) -> tuple[float, float, float]:
        """Returns (error, u, commanded position) for tick ``k``."""
        cfg = self.cfg
        if k < self.learn_ticks:
            self.learn_buffer.append(raw)
            if k == self.learn_ticks - 1:
                self.hot = learn_hot_pixels(concat(self.learn_buffer), cfg.filter, cfg.geometry)
                self.learn_buffer = []
        win = apply_filter(EventWindow(k * WINDOW_US, (k + 1) * WINDOW_US, raw), self.hot)

        if self.phase == "OPEN":
            if k < cfg.open_ticks:
                return 0.0, 0.0, OPEN_PCT
            self.phase = "CLOSING"
        if self.phase == "CLOSING":
            accumulate(self.acc, win)
            if tel.actual_pos_pct == cfg.base_position_pct:
                try:
                    self.mask = finalize_mask(self.acc, cfg.min_contact_events)
                except NoContact as exc:
                    raise MaskFailure(str(exc)) from exc
                self.phase = "HOLDING"
                self.holding_tick = k
            return 0.0, 0.0, cfg.base_position_pct

        error = slip_error(win, self.mask)
        u, self.pid = pid_step(self.pid, cfg.gains, error)
        cmd = command_position(u, cfg.base_position_pct, cfg.gain_to_pct).position_pct
        return error, u, cmd


def run_experiment(cfg: RunConfig, out_dir=None, sockets: bool | None = None,
                   keep_events: bool = True) -> RunResult:
    """Run one grasp cycle.  Writes all run files under ``out_dir`` when given."""
    use_sockets = cfg.net.mode == "sockets" if sockets is None else sockets
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    sensor = SensorLoop(cfg)
    ticks = cfg.ticks
    position, force, trace, plant_rows = [], [], [], []
    chunks: list[np.ndarray] = []
    tick_wall = np.zeros(ticks)
    writer = EventFileWriter(out / "events.evs1", cfg.geometry) if out is not None else None

    wall0 = time.perf_counter()
    plant = SocketPlant(cfg) if use_sockets else LocalPlant(cfg)
    try:
        tel = plant.start()
        prev_cmd = None
        adc_holding: list[int] = []
        for k in range(ticks):
            t_start = time.perf_counter()
            raw = sensor.window(k, tel)
            error, u, cmd = sensor.control(k, tel, raw)
            tel = plant.step(cmd)
            tick_wall[k] = time.perf_counter() - t_start

            if writer is not None:
                writer.append(raw)
            if keep_events and raw.size:
                chunks.append(raw)
            position.append((tel.t_ms, cmd, tel.actual_pos_pct, cmd != prev_cmd))
            force.append((tel.t_ms, tel.adc))
            trace.append((k, error, u, cmd))
            plant_rows.append((tel.t_ms, tel.obj_y_mm, bool(tel.slipping)))
            if sensor.phase == "HOLDING":
                adc_holding.append(tel.adc)
            prev_cmd = cmd
    finally:
        plant.close()
        if writer is not None:
            writer.close()
    wall = time.perf_counter() - wall0

    adcs = adc_holding or [row[1] for row in force] or [0]
    report = RunReport(
        slip_events=len(slip_bursts([r[1] for r in trace], cfg.burst_gap_ms)),
        total_slip_mm=float(tel.obj_y_mm),
        final_position_pct=float(trace[-1][3]) if trace else cfg.base_position_pct,
        min_adc=int(min(adcs)),
        max_adc=int(max(adcs)),
        ticks=ticks,
        dropped=bool(tel.obj_y_mm > cfg.plant.drop_limit_mm),
        holding_tick=sensor.holding_tick,
        wall_s=wall,
        tick_budget_fraction=float(np.mean(tick_wall <= 1e-3)) if use_sockets and ticks else float("nan"),
    )
    result = RunResult(report, position, force, trace, plant_rows,
                       concat(chunks) if keep_events else None, sensor.mask, sensor.hot, tick_wall)
    if out is not None:
        _write_outputs(result, out)
    return result


def _write_outputs(result: RunResult, out: Path) -> None:
    for name, text in result.csv_texts().items():
        (out / name).write_text(text, encoding="utf-8", newline="\n")
    if result.mask is not None:
        result.mask.save(out / "mask.csv", out / "mask.pgm")
    result.hot.save(out / "hot_pixels.txt")
    r = result.report
    lines = [f"{k} = {v}" for k, v in r.as_dict().items()]
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for name in ("position.csv", "force.csv"):
        export_svg(out / name, out)


# -- replay --------------------------------------------------------------------

def closing_schedule(cfg: RunConfig) -> int:
    """Tick at which the sensor enters HOLDING, found by dry-running the plant closure."""
    plant = LocalPlant(cfg)
    tel = plant.start()
    for k in range(cfg.ticks):
        if k >= cfg.open_ticks and tel.actual_pos_pct == cfg.base_position_pct:
            return k
        tel = plant.step(OPEN_PCT if k < cfg.open_ticks else cfg.base_position_pct)
    return cfg.ticks


def replay(events_path, cfg: RunConfig, mask_path=None, out_dir=None) -> str:
    """Detection trace CSV (same schema as a live ``trace.csv``) for a recorded stream."""
    geometry, events = read_event_file(events_path)
    ticks = cfg.ticks
    hot = learn_hot_pixels(events, cfg.filter, geometry)
    holding = closing_schedule(cfg)
    windows = iter_windows(events, WINDOW_US, ticks * WINDOW_US)

    mask = ContactMask.load(mask_path) if mask_path is not None else None
    acc = ContactAccumulator(geometry)
    pid = PidState(sample_time_s=cfg.sample_time_s, integral_max=cfg.integral_max)
    rows = []
    for k, win in enumerate(windows):
        if k >= ticks:
            break
        win = apply_filter(win, hot)
        if k < cfg.open_ticks:
            rows.append((k, 0.0, 0.0, OPEN_PCT))
            continue
        if k <= holding:
            if mask_path is None:
                accumulate(acc, win)
                if k == holding:
                    try:
                        mask = finalize_mask(acc, cfg.min_contact_events)
                    except NoContact:
                        mask = ContactMask.empty(geometry)
            rows.append((k, 0.0, 0.0, cfg.base_position_pct))
            continue
        error = slip_error(win, mask)
        u, pid = pid_step(pid, cfg.gains, error)
        rows.append((k, error, u,
                     command_position(u, cfg.base_position_pct, cfg.gain_to_pct).position_pct))
    text = format_csv(TRACE_HEADER, rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "replay_trace.csv").write_text(text, encoding="utf-8", newline="\n")
    return text


# -- sweep ---------------------------------------------------------------------

def sweep_mode(cfg: RunConfig, ki: float, kd: float) -> str:
    mode = "P" + ("I" if ki > 0 else "")
    if "D" in cfg.gains.mode and kd > 0:
        mode = "PD" if mode == "P" else "PID"
    return mode


def sweep_gains(cfg: RunConfig, kp_list, ki_list, out_dir=None) -> list[tuple]:
    """One run per (kp, ki) grid point; rows sorted by slip then distance from base."""
    if not kp_list or not ki_list:
        raise ValueError("gain grids must be non-empty")
    rows = []
    for kp in kp_list:
        for ki in ki_list:
            mode = sweep_mode(cfg, ki, cfg.gains.kd)
            run_cfg = with_gains(cfg, kp, ki, cfg.gains.kd, mode)
            r = run_experiment(run_cfg, keep_events=False).report
            rows.append((float(kp), float(ki), mode, r.slip_events, r.total_slip_mm,
                         r.final_position_pct, r.dropped))
    rows.sort(key=lambda row: (row[4], abs(row[5] - cfg.base_position_pct)))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(format_csv(SWEEP_HEADER, rows), encoding="utf-8",
                                       newline="\n")
    return rows


__all__ = [
    "RunReport", "RunResult", "run_experiment", "replay", "sweep_gains", "slip_bursts",
    "closing_schedule", "LocalPlant", "SocketPlant", "SensorLoop",
]
