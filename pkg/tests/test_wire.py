import pytest
from hypothesis import given
from hypothesis import strategies as st

from teleportsim.transport.golden import CORRUPT_FRAMES, GOLDEN_FRAMES
from teleportsim.transport.wire import (HEADER_SIZE, MAGIC, VERSION, ControlOp, FrameError,
                                        Message, MessageType, VersionMismatch, decode,
                                        decode_header, encode)

u64 = st.integers(0, 2**64 - 1)
u32 = st.integers(0, 2**32 - 1)
bodies = st.none() | st.dictionaries(st.text(max_size=8),
                                     st.integers(-10**6, 10**6) | st.text(max_size=8),
                                     max_size=4)
messages = st.one_of(
    st.builds(Message.classical_bit, st.integers(0, 1), u64, u32),
    st.builds(Message.two_bits, st.integers(0, 3), u64, u32),
    st.builds(Message.box_transfer, u64, u64, u64, u32),
    st.builds(Message.control, st.sampled_from(list(ControlOp)), bodies, u64, u32),
)


@given(messages)
def test_round_trip(message):
    frame = encode(message)
    assert frame[:4] == MAGIC and frame[4] == VERSION
    assert len(frame) == HEADER_SIZE + len(message.payload)
    assert decode(frame) == message


@given(st.binary(max_size=64))
def test_arbitrary_bytes_never_crash_the_decoder(blob):
    try:
        decode(blob)
    except FrameError as exc:
        assert 0 <= exc.offset <= max(len(blob), HEADER_SIZE)


@pytest.mark.parametrize("name,message,hexed", GOLDEN_FRAMES, ids=[g[0] for g in GOLDEN_FRAMES])
def test_golden_bytes(name, message, hexed):
    assert encode(message).hex() == hexed
    assert decode(bytes.fromhex(hexed)) == message


@pytest.mark.parametrize("name,hexed,exc_type,offset", CORRUPT_FRAMES,
                         ids=[c[0] for c in CORRUPT_FRAMES])
def test_corrupt_frames_report_offset(name, hexed, exc_type, offset):
    with pytest.raises(exc_type) as info:
        decode(bytes.fromhex(hexed))
    assert type(info.value) is exc_type and info.value.offset == offset


def test_semantic_bits_by_type():
    assert Message.classical_bit(1).semantic_bits == 1
    assert Message.two_bits(2).semantic_bits == 2
    assert Message.box_transfer(1, 2).semantic_bits == 0
    assert Message.control(ControlOp.START).semantic_bits == 0


def test_encoding_other_version_is_refused_on_decode():
    frame = encode(Message.classical_bit(0), version=VERSION + 1)
    with pytest.raises(VersionMismatch):
        decode(frame)
    with pytest.raises(VersionMismatch):
        decode_header(frame[:HEADER_SIZE])


@pytest.mark.parametrize("build", [lambda: Message.classical_bit(2),
                                   lambda: Message.two_bits(4),
                                   lambda: Message(MessageType.BOX_TRANSFER, 0, 0, b"\0")])
def test_invalid_payloads_rejected_at_construction(build):
    with pytest.raises((FrameError, ValueError)):
        build()
