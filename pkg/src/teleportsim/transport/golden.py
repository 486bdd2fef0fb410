"""Hand-assembled reference frames for codec conformance checks."""

from __future__ import annotations

from .wire import ControlOp, FrameError, Message, VersionMismatch

_H = "4354454c" + "01"  # magic + version

GOLDEN_FRAMES = [
    ("classical-bit-same", Message.classical_bit(0, 1, 0),
     _H + "01" + "0000000000000001" + "00000000" + "0001" + "00"),
    ("classical-bit-different", Message.classical_bit(1, 0x0102030405060708, 7),
     _H + "01" + "0102030405060708" + "00000007" + "0001" + "01"),
    ("two-bits-psi-minus", Message.two_bits(3, 42, 0xFFFF),
     _H + "02" + "000000000000002a" + "0000ffff" + "0001" + "03"),
    ("box-transfer", Message.box_transfer(5, 0xDEADBEEFCAFEBABE, 9, 1),
     _H + "03" + "0000000000000009" + "00000001" + "0010"
     + "0000000000000005" + "deadbeefcafebabe"),
    ("control-teardown", Message.control(ControlOp.TEARDOWN),
     _H + "04" + "0000000000000000" + "00000000" + "0001" + "0a"),
    ("control-reject-version", Message.control(ControlOp.REJECT, {"code": 1}),
     _H + "04" + "0000000000000000" + "00000000" + "000b" + "03"
     + "7b22636f6465223a317d"),
]

_OK = "0000000000000001" + "00000000" + "0001" + "00"

# (name, frame hex, exception type, offset of the first bad byte)
CORRUPT_FRAMES = [
    ("magic-first-byte", "5854454c" + "01" + "01" + _OK, FrameError, 0),
    ("magic-last-byte", "4354454d" + "01" + "01" + _OK, FrameError, 3),
    ("version", "4354454c" + "02" + "01" + _OK, VersionMismatch, 4),
    ("message-type", _H + "09" + _OK, FrameError, 5),
    ("short-header", _H + "01" + "00000000", FrameError, 10),
    ("short-payload", _H + "03" + "0000000000000001" + "00000000" + "0010" + "00",
     FrameError, 21),
    ("bit-out-of-range", _H + "01" + "0000000000000001" + "00000000" + "0001" + "02",
     FrameError, 20),
    ("trailing-bytes", _H + "01" + _OK + "ff", FrameError, 21),
]
