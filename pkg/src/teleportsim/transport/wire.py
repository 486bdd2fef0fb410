"""Binary frame format shared by every transport.

Frame layout (big-endian)::

    0   4  magic "CTEL"
    4   1  version (0x01)
    5   1  message type
    6   8  session id
    14  4  trial index
    18  2  payload length
    20  *  payload

ClassicalBit and TwoBits carry one payload byte with the unused bits zero.
BoxTransfer carries an 8-byte box id and an 8-byte sealed-state token and
never the face. Control payloads are an opcode byte followed by a compact
JSON body.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from typing import Any

MAGIC = b"CTEL"
VERSION = 0x01
HEADER = struct.Struct(">4sBBQIH")
HEADER_SIZE = HEADER.size
MAX_PAYLOAD = 0xFFFF

ERR_VERSION_MISMATCH = 0x01
ERR_ROLE_CONFLICT = 0x02
ERR_PROTOCOL = 0x03


class FrameError(ValueError):
    """A frame could not be decoded; ``offset`` is the first bad byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class VersionMismatch(FrameError):
    def __init__(self, version: int):
        super().__init__(f"unsupported frame version 0x{version:02x}", 4)
        self.version = version


class MessageType(enum.IntEnum):
    CLASSICAL_BIT = 0x01
    TWO_BITS = 0x02
    BOX_TRANSFER = 0x03
    CONTROL = 0x04

    @property
    def semantic_bits(self) -> int:
        """Information bits a message of this type carries for the protocol."""
        return {MessageType.CLASSICAL_BIT: 1, MessageType.TWO_BITS: 2}.get(self, 0)


class ControlOp(enum.IntEnum):
    HELLO = 0x01
    WELCOME = 0x02
    REJECT = 0x03
    CONFIG = 0x04
    START = 0x05
    PREPARE = 0x06
    MEASURE = 0x07
    RESULT = 0x08
    CORRECT = 0x09
    TEARDOWN = 0x0A
    ERROR = 0x0B


@dataclass(frozen=True)
class Message:
    msg_type: MessageType
    session_id: int
    trial_index: int
    payload: bytes = b""

    def __post_init__(self):
        object.__setattr__(self, "msg_type", MessageType(self.msg_type))
        object.__setattr__(self, "payload", bytes(self.payload))
        if not 0 <= self.session_id < 2 ** 64:
            raise ValueError(f"session_id out of range: {self.session_id}")
        if not 0 <= self.trial_index < 2 ** 32:
            raise ValueError(f"trial_index out of range: {self.trial_index}")
        _check_payload(self.msg_type, self.payload, offset=None)

    # constructors

    @classmethod
    def classical_bit(cls, bit: int, session_id: int = 0, trial_index: int = 0) -> "Message":
        return cls(MessageType.CLASSICAL_BIT, session_id, trial_index, bytes([bit]))

    @classmethod
    def two_bits(cls, value: int, session_id: int = 0, trial_index: int = 0) -> "Message":
        return cls(MessageType.TWO_BITS, session_id, trial_index, bytes([value]))

    @classmethod
    def box_transfer(cls, box_id: int, token: int, session_id: int = 0,
                     trial_index: int = 0) -> "Message":
        return cls(MessageType.BOX_TRANSFER, session_id, trial_index,
                   struct.pack(">QQ", box_id, token))

    @classmethod
    def control(cls, op: ControlOp, body: dict[str, Any] | None = None,
                session_id: int = 0, trial_index: int = 0) -> "Message":
        raw = b"" if not body else json.dumps(body, sort_keys=True,
                                               separators=(",", ":")).encode()
        return cls(MessageType.CONTROL, session_id, trial_index, bytes([op]) + raw)

    # accessors

    @property
    def semantic_bits(self) -> int:
        return self.msg_type.semantic_bits

    @property
    def value(self) -> int:
        if self.msg_type not in (MessageType.CLASSICAL_BIT, MessageType.TWO_BITS):
            raise TypeError(f"{self.msg_type.name} carries no bit value")
        return self.payload[0]

    @property
    def box(self) -> tuple[int, int]:
        if self.msg_type is not MessageType.BOX_TRANSFER:
            raise TypeError(f"{self.msg_type.name} carries no box")
        return struct.unpack(">QQ", self.payload)

    @property
    def op(self) -> ControlOp:
        if self.msg_type is not MessageType.CONTROL:
            raise TypeError(f"{self.msg_type.name} is not a control message")
        return ControlOp(self.payload[0])

    @property
    def body(self) -> dict[str, Any]:
        if self.msg_type is not MessageType.CONTROL:
            raise TypeError(f"{self.msg_type.name} is not a control message")
        raw = self.payload[1:]
        return json.loads(raw) if raw else {}


def _check_payload(msg_type: MessageType, payload: bytes, offset: int | None) -> None:
    def fail(why):
        if offset is None:
            raise ValueError(why)
        raise FrameError(why, offset)

    if len(payload) > MAX_PAYLOAD:
        fail(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    if msg_type is MessageType.CLASSICAL_BIT:
        if len(payload) != 1 or payload[0] > 1:
            fail(f"ClassicalBit payload must be one byte 0x00/0x01, got {payload.hex()}")
    elif msg_type is MessageType.TWO_BITS:
        if len(payload) != 1 or payload[0] > 3:
            fail(f"TwoBits payload must be one byte 0x00-0x03, got {payload.hex()}")
    elif msg_type is MessageType.BOX_TRANSFER:
        if len(payload) != 16:
            fail(f"BoxTransfer payload must be 16 bytes, got {len(payload)}")
    elif msg_type is MessageType.CONTROL:
        if not payload:
            fail("Control payload needs an opcode byte")
        if payload[0] not in ControlOp._value2member_map_:
            fail(f"unknown control opcode 0x{payload[0]:02x}")


def encode(message: Message, version: int = VERSION) -> bytes:
    header = HEADER.pack(MAGIC, version, message.msg_type, message.session_id,
                         message.trial_index, len(message.payload))
    return header + message.payload


def decode_header(header: bytes) -> tuple[MessageType, int, int, int]:
    """Validate a 20-byte header; returns (type, session, trial, payload_len)."""
    if len(header) < HEADER_SIZE:
        raise FrameError(f"short read: {len(header)} of {HEADER_SIZE} header bytes",
                         len(header))
    magic, version, msg_type, session_id, trial_index, length = HEADER.unpack(
        header[:HEADER_SIZE])
    if magic != MAGIC:
        bad = next(i for i in range(4) if magic[i] != MAGIC[i])
        raise FrameError(f"bad magic {magic!r}", bad)
    if version != VERSION:
        raise VersionMismatch(version)
    try:
        kind = MessageType(msg_type)
    except ValueError:
        raise FrameError(f"unknown message type 0x{msg_type:02x}", 5) from None
    return kind, session_id, trial_index, length


def decode(frame: bytes) -> Message:
    kind, session_id, trial_index, length = decode_header(frame)
    payload = frame[HEADER_SIZE:]
    if len(payload) < length:
        raise FrameError(f"short read: payload has {len(payload)} of {length} bytes",
                         len(frame))
    if len(payload) > length:
        raise FrameError(f"{len(payload) - length} trailing bytes after payload",
                         HEADER_SIZE + length)
    _check_payload(kind, payload, offset=HEADER_SIZE)
    return Message(kind, session_id, trial_index, payload)
