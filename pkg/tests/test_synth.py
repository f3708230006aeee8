import numpy as np
import pytest

from evslip.errors import GeometryMismatch
from evslip.events import Polarity, SensorGeometry
from evslip.noise_filter import HotPixelParams, learn_hot_pixels
from evslip.plant import CATALOG, PlantParams, PlantState, observed_state
from evslip.synth import Camera, SceneFrame, SynthParams, emit_events, inject_noise, render_scene

G = SensorGeometry()
BOX = CATALOG["plastic_box_110"]


def test_render_deterministic():
    s = PlantState(obj_y_mm=1.3, normal_force_N=4.0)
    a = render_scene(s, BOX, G).log_intensity
    b = render_scene(s, BOX, G).log_intensity
    assert np.array_equal(a, b) and np.all(np.isfinite(a))


def test_shift_changes_only_swept_band():
    a = render_scene(PlantState(obj_y_mm=0.0), BOX, G).log_intensity
    b = render_scene(PlantState(obj_y_mm=5.0), BOX, G).log_intensity
    rows = np.flatnonzero(np.any(a != b, axis=1))
    cols = np.flatnonzero(np.any(a != b, axis=0))
    assert rows.min() >= 44 and rows.max() <= 45 + 90 + 8 + 1
    assert cols.min() >= 120 - 45 and cols.max() < 120 + 45


def test_out_of_view_is_uniform():
    f = render_scene(PlantState(obj_y_mm=1000.0), BOX, G).log_intensity
    assert np.all(f == f[0, 0])


def test_emit_two_crossings():
    ref = np.zeros((2, 2))
    new = ref.copy()
    new[1, 0] = 0.4 + 1e-9
    ev, r = emit_events(ref, SceneFrame(SensorGeometry(2, 2), new), 0, 1000, SynthParams())
    assert len(ev) == 2 and set(ev["p"].tolist()) == {Polarity.POS}
    assert (ev["x"] == 0).all() and (ev["y"] == 1).all()
    assert np.all((ev["t"] > 0) & (ev["t"] <= 1000))
    assert r[1, 0] == pytest.approx(0.4)


def test_emit_oracle_random():
    rng = np.random.default_rng(5)
    g = SensorGeometry(40, 30)
    params = SynthParams(contrast_C=0.15, refractory_us=0)
    for _ in range(20):
        ref = rng.normal(0, 1, g.shape)
        new = ref + rng.normal(0, 0.5, g.shape)
        ev, r = emit_events(ref, SceneFrame(g, new), 100, 1100, params)
        counts = np.zeros(g.shape, int)
        np.add.at(counts, (ev["y"], ev["x"]), 1)
        assert np.array_equal(counts, np.floor(np.abs(new - ref) / 0.15).astype(int))
        assert np.all(np.abs(new - r) < 0.15 + 1e-12)


def test_refractory_limits_rate():
    ref = np.zeros((1, 1))
    ev, r = emit_events(ref, SceneFrame(SensorGeometry(1, 1), np.full((1, 1), 5.0)), 0, 1000,
                        SynthParams(contrast_C=0.2, refractory_us=100))
    assert len(ev) == 10 and np.all(np.diff(ev["t"].astype(int)) >= 100)
    assert r[0, 0] == pytest.approx(2.0)


def test_geometry_mismatch():
    with pytest.raises(GeometryMismatch):
        emit_events(np.zeros((3, 3)), SceneFrame(SensorGeometry(2, 2), np.zeros((2, 2))), 0, 1, SynthParams())


def test_noise_examples():
    assert inject_noise(0, 1000, SynthParams(), 1).size == 0
    p = SynthParams(hot_pixels=((5, 5, 5000.0),))
    ev = inject_noise(0, 100_000, p, 42)
    assert 400 <= ev.size <= 600
    assert learn_hot_pixels(ev, HotPixelParams(), G).hot == {(5, 5)}
    assert np.array_equal(ev, inject_noise(0, 100_000, p, 42))


def test_slip_produces_pos_in_contact_region():
    cam = Camera(BOX)
    params = PlantParams()
    cam.prime(observed_state(73.0, 0.0, False, BOX, params))
    pos_counts = []
    for k in range(1, 11):
        ev = cam.observe(observed_state(73.0, 0.05 * k, True, BOX, params), k * 1000 - 1, k * 1000 + 999)
        pos_counts.append(int((ev["p"] == Polarity.POS).sum()))
    assert all(c > 0 for c in pos_counts[2:])
    pos = ev[ev["p"] == Polarity.POS]
    inside = (pos["x"] >= 75) & (pos["x"] < 165) & (pos["y"] >= 45) & (pos["y"] < 135)
    assert inside.sum() > 50


def test_closing_darkens_contact():
    cam = Camera(BOX)
    params = PlantParams()
    cam.prime(observed_state(76.0, 0.0, False, BOX, params))
    ev = cam.observe(observed_state(74.0, 0.0, False, BOX, params), 0, 1000)
    assert (ev["p"] == Polarity.NEG).sum() > 1000 and (ev["p"] == Polarity.POS).sum() == 0


def test_cube_contact_area_exceeds_sphere():
    from evslip.contact import ContactAccumulator, accumulate, finalize_mask
    from evslip.events import EventWindow

    areas = {}
    for name in ("plastic_box_110", "sphere_300"):
        obj = CATALOG[name]
        cam = Camera(obj)
        acc = ContactAccumulator(G)
        params = PlantParams()
        cam.prime(observed_state(80.0, 0.0, False, obj, params))
        for k, pos in enumerate(np.arange(79.0, 72.9, -0.05)):
            ev = cam.observe(observed_state(float(pos), 0.0, False, obj, params), k * 1000, k * 1000 + 999)
            accumulate(acc, EventWindow(k * 1000, k * 1000 + 1000, ev))
        areas[name] = finalize_mask(acc).area_px
    assert areas["plastic_box_110"] > areas["sphere_300"] > 0
