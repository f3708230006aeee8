import itertools
import socket
import struct
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evslip import netlink
from evslip.errors import (
    FrameBadMagic,
    HandshakeTimeout,
    LengthMismatch,
    NeedMoreData,
    NetworkFailure,
    PayloadTooLarge,
    ProtocolError,
    RoleConflict,
    UnexpectedMessage,
    UnknownType,
)
from evslip.netlink import (
    Bye,
    FrameDecoder,
    GripCmd,
    HandshakeMachine,
    Hello,
    HelloAck,
    Ready,
    ReadyAck,
    Role,
    Session,
    Telemetry,
    decode_frame,
    encode_frame,
)

finite = st.floats(allow_nan=False, allow_infinity=False)
messages = st.one_of(
    st.builds(Hello, st.sampled_from(Role)),
    st.builds(HelloAck, st.sampled_from(Role)),
    st.just(Ready()),
    st.just(ReadyAck()),
    st.just(Bye()),
    st.builds(GripCmd, st.floats(0, 100)),
    st.builds(Telemetry, st.integers(0, 2**64 - 1), finite, st.integers(0, 1024), finite, st.booleans()),
)


def test_ready_bytes():
    assert encode_frame(Ready()) == bytes.fromhex("45 56 53 4C 01 03 00 00 00 00")


def test_grip_bytes():
    assert encode_frame(GripCmd(42.5)) == b"EVSL\x01\x10" + struct.pack("<I", 8) + struct.pack("<d", 42.5)


@settings(max_examples=300, deadline=None)
@given(messages)
def test_roundtrip(msg):
    assert decode_frame(encode_frame(msg)) == (msg, b"")


@settings(max_examples=100, deadline=None)
@given(st.lists(messages, min_size=1, max_size=8), st.data())
def test_byte_split_equivalence(msgs, data):
    stream = b"".join(encode_frame(m) for m in msgs)
    cuts = sorted(data.draw(st.lists(st.integers(0, len(stream)), max_size=10)))
    dec = FrameDecoder()
    got = []
    for a, b in zip([0] + cuts, cuts + [len(stream)]):
        got += dec.feed(stream[a:b])
    assert got == msgs and dec.pending == 0


def test_partial_and_corrupt():
    frame = encode_frame(GripCmd(1.0))
    with pytest.raises(NeedMoreData):
        decode_frame(frame[:5])
    with pytest.raises(FrameBadMagic):
        decode_frame(b"XXXX" + frame[4:])
    with pytest.raises(UnknownType):
        decode_frame(frame[:5] + b"\x09" + frame[6:])
    with pytest.raises(LengthMismatch):
        decode_frame(frame[:6] + struct.pack("<I", 9) + frame[10:] + b"\x00")
    three = encode_frame(Ready()) + frame + encode_frame(Bye())
    dec = FrameDecoder()
    assert dec.feed(three) == [Ready(), GripCmd(1.0), Bye()]


def test_payload_too_large():
    with pytest.raises(PayloadTooLarge):
        encode_frame(GripCmd(1.0), max_payload=4)


def test_invalid_field_values():
    with pytest.raises(ValueError):
        encode_frame(GripCmd(100.5))
    with pytest.raises(ValueError):
        encode_frame(Telemetry(0, 0.0, 1025, 0.0, False))


def test_fuzz_small():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        data = rng.integers(0, 256, rng.integers(0, 64)).astype(np.uint8).tobytes()
        if rng.random() < 0.5:
            data = b"EVSL\x01" + data
        try:
            FrameDecoder().feed(data)
        except ProtocolError:
            pass


# -- handshake -------------------------------------------------------------

ALL_MSGS = [Hello(Role.SENSOR), Hello(Role.PLANT), HelloAck(Role.SENSOR), HelloAck(Role.PLANT),
            Ready(), ReadyAck(), GripCmd(1.0), Telemetry(0, 0.0, 0, 0.0, False), Bye()]
EXPECTED = {Role.PLANT: [Hello(Role.SENSOR), Ready()],
            Role.SENSOR: [HelloAck(Role.PLANT), ReadyAck()]}


@pytest.mark.parametrize("role", list(Role))
def test_all_two_step_deviations(role):
    for m1, m2 in itertools.product(ALL_MSGS, repeat=2):
        machine = HandshakeMachine(role)
        machine.start()
        expected = EXPECTED[role]
        seq = [m1, m2]
        for i, msg in enumerate(seq):
            if msg == expected[i]:
                machine.on_message(msg)
                continue
            with pytest.raises((UnexpectedMessage, RoleConflict)):
                machine.on_message(msg)
            break
        else:
            assert machine.established


def test_role_conflict():
    with pytest.raises(RoleConflict):
        HandshakeMachine(Role.PLANT).on_message(Hello(Role.PLANT))


def _pair():
    a, b = socket.socketpair()
    return a, b


def _run_pair(left, right):
    """Run two callables concurrently and return their results or exceptions."""
    out = [None, None]

    def wrap(i, fn):
        try:
            out[i] = fn()
        except Exception as exc:  # collected for assertions
            out[i] = exc

    threads = [threading.Thread(target=wrap, args=(i, fn)) for i, fn in enumerate((left, right))]
    for t in threads:
        t.start()
    for t in threads:
        t.join(5)
    return out


def test_session_happy_path_and_direction_discipline():
    a, b = _pair()
    sensor, plant = Session(a, Role.SENSOR), Session(b, Role.PLANT)
    res = _run_pair(lambda: netlink.handshake(sensor), lambda: netlink.handshake(plant))
    assert all(isinstance(r, Session) and r.established for r in res)
    sensor.send(GripCmd(50.0))
    assert plant.recv(1.0) == GripCmd(50.0)
    with pytest.raises(UnexpectedMessage):
        sensor.send(Telemetry(0, 0.0, 0, 0.0, False))
    # a non-conforming peer writes raw bytes; the receiver must close the session
    b.sendall(encode_frame(GripCmd(1.0)))
    with pytest.raises(UnexpectedMessage):
        sensor.recv(1.0)
    assert sensor.closed
    plant.close()


def test_sensor_sensor_conflict():
    a, b = _pair()
    res = _run_pair(lambda: netlink.handshake(Session(a, Role.SENSOR), timeout=1.0),
                    lambda: netlink.handshake(Session(b, Role.SENSOR), timeout=1.0))
    assert any(isinstance(r, RoleConflict) for r in res)


def test_hello_answered_by_grip_cmd():
    a, b = _pair()
    sensor = Session(a, Role.SENSOR)

    def rogue():
        dec = FrameDecoder()
        while not dec.feed(b.recv(100)):
            pass
        b.sendall(encode_frame(GripCmd(3.0)))

    res = _run_pair(lambda: netlink.handshake(sensor, timeout=1.0), rogue)
    assert isinstance(res[0], UnexpectedMessage) and sensor.closed


def test_handshake_timeout():
    a, b = _pair()
    with pytest.raises(HandshakeTimeout):
        netlink.handshake(Session(a, Role.SENSOR), timeout=0.2)
    b.close()


def test_peer_close_is_network_failure():
    a, b = _pair()
    s = Session(a, Role.SENSOR)
    b.close()
    with pytest.raises(NetworkFailure):
        s.recv(1.0)


def test_tcp_listen_connect():
    srv = netlink.listen("127.0.0.1", 0)
    port = srv.getsockname()[1]
    res = _run_pair(lambda: netlink.accept(srv, timeout=2.0),
                    lambda: netlink.connect("127.0.0.1", port, timeout=2.0))
    assert all(isinstance(r, Session) and r.established for r in res)
    res[1].send(Bye())
    assert res[0].recv(1.0) == Bye()
    for r in res:
        r.close()
    srv.close()
