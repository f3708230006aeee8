"""Framed sensor <-> plant link over a stream socket.

Frame layout (little-endian)::

    magic "EVSL" | version u8 | msg_type u8 | payload_len u32 | payload

A session opens with HELLO -> HELLO_ACK -> READY -> READY_ACK.  After that
the sensor side sends only GRIP_CMD/BYE and the plant side only TELEMETRY/BYE.
"""
from __future__ import annotations

import enum
import math
import socket
import struct
import time
from dataclasses import dataclass
from typing import Union

from .errors import (
    FrameBadMagic,
    HandshakeTimeout,
    InvalidPayload,
    LengthMismatch,
    NeedMoreData,
    NetworkFailure,
    PayloadTooLarge,
    ProtocolError,
    RoleConflict,
    UnexpectedMessage,
    UnknownType,
    UnsupportedFrameVersion,
)

MAGIC = b"EVSL"
VERSION = 1
HEADER = struct.Struct("<4sBBI")
HEADER_SIZE = HEADER.size  # 10
MAX_PAYLOAD = 65536
DEFAULT_PORT = 7402
HANDSHAKE_TIMEOUT_S = 2.0


class Role(enum.IntEnum):
    SENSOR = 1
    PLANT = 2


class MsgType(enum.IntEnum):
    HELLO = 1
    HELLO_ACK = 2
    READY = 3
    READY_ACK = 4
    GRIP_CMD = 16
    TELEMETRY = 17
    BYE = 255


@dataclass(frozen=True)
class Hello:
    role: Role
    type = MsgType.HELLO


@dataclass(frozen=True)
class HelloAck:
    role: Role
    type = MsgType.HELLO_ACK


@dataclass(frozen=True)
class Ready:
    type = MsgType.READY


@dataclass(frozen=True)
class ReadyAck:
    type = MsgType.READY_ACK


@dataclass(frozen=True)
class GripCmd:
    position_pct: float
    type = MsgType.GRIP_CMD


@dataclass(frozen=True)
class Telemetry:
    t_ms: int
    actual_pos_pct: float
    adc: int
    obj_y_mm: float
    slipping: bool
    type = MsgType.TELEMETRY


@dataclass(frozen=True)
class Bye:
    type = MsgType.BYE


Message = Union[Hello, HelloAck, Ready, ReadyAck, GripCmd, Telemetry, Bye]

_ROLE = struct.Struct("<B")
_GRIP = struct.Struct("<d")
_TELEM = struct.Struct("<QdHdB")
_FIXED_LEN = {
    MsgType.HELLO: 1,
    MsgType.HELLO_ACK: 1,
    MsgType.READY: 0,
    MsgType.READY_ACK: 0,
    MsgType.GRIP_CMD: _GRIP.size,
    MsgType.TELEMETRY: _TELEM.size,
    MsgType.BYE: 0,
}


def _payload(msg: Message) -> bytes:
    if isinstance(msg, (Hello, HelloAck)):
        return _ROLE.pack(int(msg.role))
    if isinstance(msg, GripCmd):
        if not (math.isfinite(msg.position_pct) and 0.0 <= msg.position_pct <= 100.0):
            raise ValueError(f"grip position {msg.position_pct} outside [0, 100]")
        return _GRIP.pack(msg.position_pct)
    if isinstance(msg, Telemetry):
        if not 0 <= msg.adc <= 1024:
            raise ValueError(f"ADC value {msg.adc} outside [0, 1024]")
        return _TELEM.pack(msg.t_ms, msg.actual_pos_pct, msg.adc, msg.obj_y_mm, int(bool(msg.slipping)))
    if isinstance(msg, (Ready, ReadyAck, Bye)):
        return b""
    raise TypeError(f"not a protocol message: {msg!r}")


def encode_frame(msg: Message, max_payload: int = MAX_PAYLOAD) -> bytes:
    payload = _payload(msg)
    if len(payload) > max_payload:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {max_payload}")
    return HEADER.pack(MAGIC, VERSION, int(msg.type), len(payload)) + payload


def _parse_payload(msg_type: MsgType, payload: bytes) -> Message:
    if msg_type in (MsgType.HELLO, MsgType.HELLO_ACK):
        (raw,) = _ROLE.unpack(payload)
        try:
            role = Role(raw)
        except ValueError:
            raise InvalidPayload(f"unknown role {raw}") from None
        return Hello(role) if msg_type is MsgType.HELLO else HelloAck(role)
    if msg_type is MsgType.READY:
        return Ready()
    if msg_type is MsgType.READY_ACK:
        return ReadyAck()
    if msg_type is MsgType.BYE:
        return Bye()
    if msg_type is MsgType.GRIP_CMD:
        (pos,) = _GRIP.unpack(payload)
        if not (math.isfinite(pos) and 0.0 <= pos <= 100.0):
            raise InvalidPayload(f"grip position {pos} outside [0, 100]")
        return GripCmd(pos)
    t_ms, pos, adc, y, slip = _TELEM.unpack(payload)
    if adc > 1024 or slip > 1:
        raise InvalidPayload("telemetry field out of range")
    return Telemetry(t_ms, pos, adc, y, bool(slip))


def decode_frame(data, max_payload: int = MAX_PAYLOAD) -> tuple[Message, bytes]:
    """Decode one frame from the front of ``data``.

    Raises NeedMoreData (nothing consumed) on a partial frame and a
    ProtocolError subclass on corrupt input.
    """
    data = bytes(data)
    n = len(data)
    # validate whatever prefix of the header we already have
    if data[: min(n, 4)] != MAGIC[: min(n, 4)]:
        raise FrameBadMagic(f"bad frame magic {data[:4]!r}")
    if n >= 5 and data[4] != VERSION:
        raise UnsupportedFrameVersion(f"frame version {data[4]}")
    if n >= 6:
        try:
            msg_type = MsgType(data[5])
        except ValueError:
            raise UnknownType(f"unknown message type {data[5]}") from None
    if n < HEADER_SIZE:
        raise NeedMoreData(HEADER_SIZE - n)
    _magic, _ver, _t, length = HEADER.unpack_from(data)
    if length > max_payload or length != _FIXED_LEN[msg_type]:
        raise LengthMismatch(f"{msg_type.name} with payload_len {length}")
    end = HEADER_SIZE + length
    if n < end:
        raise NeedMoreData(end - n)
    return _parse_payload(msg_type, data[HEADER_SIZE:end]), data[end:]


class FrameDecoder:
    """Incremental decoder: feed arbitrary byte chunks, collect messages."""

    def __init__(self, max_payload: int = MAX_PAYLOAD):
        self.max_payload = max_payload
        self._buf = bytearray()

    def feed(self, chunk: bytes) -> list[Message]:
        self._buf += chunk
        out = []
        while self._buf:
            try:
                msg, rest = decode_frame(self._buf[:HEADER_SIZE + self.max_payload], self.max_payload)
            except NeedMoreData:
                break
            consumed = len(self._buf[:HEADER_SIZE + self.max_payload]) - len(rest)
            del self._buf[:consumed]
            out.append(msg)
        return out

    @property
    def pending(self) -> int:
        return len(self._buf)


# -- handshake -----------------------------------------------------------------

class HandshakeMachine:
    """Transport-free handshake state machine.

    The sensor initiates.  ``start()`` returns the messages to send first;
    ``on_message()`` consumes one peer message and returns replies.
    """

    def __init__(self, role: Role):
        self.role = Role(role)
        self.established = False
        self._expect = MsgType.HELLO_ACK if self.role is Role.SENSOR else MsgType.HELLO

    def start(self) -> list[Message]:
        return [Hello(self.role)] if self.role is Role.SENSOR else []

    def on_message(self, msg: Message) -> list[Message]:
        if self.established:
            raise UnexpectedMessage("handshake already complete")
        if isinstance(msg, (Hello, HelloAck)) and msg.role is self.role:
            raise RoleConflict(f"peer also claims role {self.role.name}")
        if msg.type is not self._expect:
            raise UnexpectedMessage(f"expected {self._expect.name}, got {msg.type.name}")
        if self.role is Role.SENSOR:
            if msg.type is MsgType.HELLO_ACK:
                self._expect = MsgType.READY_ACK
                return [Ready()]
            self.established = True
            return []
        if msg.type is MsgType.HELLO:
            self._expect = MsgType.READY
            return [HelloAck(self.role)]
        self.established = True
        return [ReadyAck()]


ALLOWED_AFTER_HANDSHAKE = {
    Role.SENSOR: frozenset({MsgType.GRIP_CMD, MsgType.BYE}),
    Role.PLANT: frozenset({MsgType.TELEMETRY, MsgType.BYE}),
}


class Session:
    """One framed connection.  Any protocol violation closes it."""

    def __init__(self, sock: socket.socket, role: Role, max_payload: int = MAX_PAYLOAD):
        self.sock = sock
        self.role = Role(role)
        self.peer_role = Role.PLANT if self.role is Role.SENSOR else Role.SENSOR
        self.established = False
        self.closed = False
        self._decoder = FrameDecoder(max_payload)
        self._inbox: list[Message] = []
        try:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        except (OSError, AttributeError):
            pass

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            try:
                self.sock.close()
            except OSError:
                pass

    def send(self, msg: Message) -> None:
        if self.closed:
            raise NetworkFailure("session is closed")
        if self.established and msg.type not in ALLOWED_AFTER_HANDSHAKE[self.role]:
            raise UnexpectedMessage(f"{self.role.name} may not send {msg.type.name}")
        try:
            self.sock.sendall(encode_frame(msg))
        except OSError as exc:
            self.close()
            raise NetworkFailure(str(exc)) from exc

    def recv(self, timeout: float | None = None) -> Message:
        if self.closed:
            raise NetworkFailure("session is closed")
        deadline = None if timeout is None else time.monotonic() + timeout
        while not self._inbox:
            if deadline is not None:
                left = deadline - time.monotonic()
                if left <= 0:
                    raise TimeoutError("no complete frame before the deadline")
                self.sock.settimeout(left)
            else:
                self.sock.settimeout(None)
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                raise TimeoutError("no complete frame before the deadline") from None
            except OSError as exc:
                self.close()
                raise NetworkFailure(str(exc)) from exc
            if not chunk:
                self.close()
                raise NetworkFailure("peer closed the connection")
            try:
                self._inbox.extend(self._decoder.feed(chunk))
            except ProtocolError:
                self.close()
                raise
        msg = self._inbox.pop(0)
        if self.established and msg.type not in ALLOWED_AFTER_HANDSHAKE[self.peer_role]:
            self.close()
            raise UnexpectedMessage(f"{self.peer_role.name} sent {msg.type.name}")
        return msg


def handshake(session: Session, role: Role | None = None,
              timeout: float = HANDSHAKE_TIMEOUT_S) -> Session:
    """Run the four-stage opening on ``session``; closes it on any failure."""
    machine = HandshakeMachine(session.role if role is None else role)
    deadline = time.monotonic() + timeout
    try:
        for msg in machine.start():
            session.send(msg)
        while not machine.established:
            left = deadline - time.monotonic()
            if left <= 0:
                raise HandshakeTimeout(f"no handshake within {timeout} s")
            try:
                msg = session.recv(timeout=left)
            except TimeoutError:
                raise HandshakeTimeout(f"no handshake within {timeout} s") from None
            for reply in machine.on_message(msg):
                session.send(reply)
    except Exception:
        session.close()
        raise
    session.established = True
    return session


def connect(host: str, port: int, timeout: float = HANDSHAKE_TIMEOUT_S,
            retry_s: float = 5.0) -> Session:
    """Open the sensor side: connect (retrying while the plant starts) and handshake."""
    deadline = time.monotonic() + retry_s
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            break
        except OSError as exc:
            if time.monotonic() > deadline:
                raise NetworkFailure(f"cannot reach plant at {host}:{port}: {exc}") from exc
            time.sleep(0.02)
    return handshake(Session(sock, Role.SENSOR), timeout=timeout)


def listen(host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> socket.socket:
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    return srv


def accept(server: socket.socket, timeout: float = HANDSHAKE_TIMEOUT_S,
           accept_timeout: float | None = 30.0) -> Session:
    server.settimeout(accept_timeout)
    try:
        sock, _addr = server.accept()
    except socket.timeout:
        raise NetworkFailure("no sensor connected") from None
    return handshake(Session(sock, Role.PLANT), timeout=timeout)
