import pytest

from evslip.config import RunConfig, dump_config, load_config, parse_config
from evslip.errors import ConfigInvalid
from evslip.plant import Shape


def test_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.ticks == 20000 and cfg.gains.mode == "PI" and cfg.gains.kp == 0.08


def test_parse_overrides():
    cfg = parse_config("""
        # comment
        object = plastic_box_1360
        gains.mode = P
        gains.ki = 3
        cycle_s = 1.5
        synth.hot_pixels = 1:2:300; 4:5:600
        object.shape = sphere
        net.mode = sockets
    """)
    assert cfg.object.name == "plastic_box_1360" and cfg.object.shape is Shape.SPHERE
    assert cfg.gains.mode == "P" and cfg.gains.ki == 0.0
    assert cfg.ticks == 1500
    assert cfg.synth.hot_pixels == ((1, 2, 300.0), (4, 5, 600.0))
    assert cfg.net.mode == "sockets"


@pytest.mark.parametrize("text", [
    "bogus = 1",
    "object = teapot",
    "cycle_s = 0",
    "cycle_s = fast",
    "gains.mode = PX",
    "gains.kp = -1",
    "open_s = 0.05",
    "net.mode = carrier_pigeon",
    "no equals sign",
    "base_position_pct = 120",
])
def test_invalid(text):
    with pytest.raises(ConfigInvalid):
        parse_config(text)


def test_dump_roundtrip():
    cfg = parse_config("object = sphere_300\ngains.mode = PID\ngains.kd = 0.001\nseed = 9\n")
    assert parse_config(dump_config(cfg)) == cfg


def test_load_missing(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "nope.cfg")
