"""Classical teleportation of |x> with coins in sealed boxes.

1. A source prepares two Heads boxes, rotates both through the same random
   number of half turns, and gives one to Alice and one to Bob.
2. Charlie prepares a box in |x> and hands it to Alice.
3. A trusted device rotates both of Alice's boxes by a common random number
   of half turns, opens them, and tells Alice only "same" or "different".
4. Alice sends that one bit to Bob.
5. Bob rotates his box once on "different" and leaves it alone on "same".

Afterwards Bob's coin shows whatever Charlie's coin showed when Charlie
selected it, so Charlie's |x> now describes Bob's box.

``run_trial`` executes the steps one object at a time and is the reference.
``run_batch`` executes the same steps column-wise on numpy arrays with the
same substream draws, for Monte Carlo runs of 10^5 trials and more.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .epistemic_state import (ClassicalState, Face, PreparationMode, SealedBox,
                              SealedBoxError, check_probability, hidden_face,
                              prepare_shared_half_by_rotation, prepare_state)
from .events import EVENT_PARTIES, EVENTS, Event, EventLog, events_to_dicts
from .substreams import Substream, column_bit, column_random
from .transport.channel import Channel
from .transport.wire import Message, MessageType

PARTY_SOURCE = "source"
PARTY_CHARLIE = "charlie"
PARTY_DEVICE = "device"


class ClassicalOutcome(enum.IntEnum):
    SAME = 0
    DIFFERENT = 1

    @property
    def label(self) -> str:
        return "Same" if self is ClassicalOutcome.SAME else "Different"


class BobCorrection(enum.Enum):
    IDENTITY = "Identity"
    ROTATE = "Rotate"


class InvariantViolation(AssertionError):
    """Bob's final face differs from Charlie's face at selection."""

    def __init__(self, record: "TrialRecord"):
        super().__init__(
            f"trial {record.trial_index}: Bob ended with {record.truth_bob_face.name} "
            f"but Charlie selected {record.truth_charlie_face.name}")
        self.record = record


def bob_correction_for(outcome: ClassicalOutcome) -> BobCorrection:
    return BobCorrection.IDENTITY if outcome is ClassicalOutcome.SAME else BobCorrection.ROTATE


@dataclass(frozen=True)
class TrialRecord:
    """Everything that happened in one classical trial.

    ``truth_*`` fields come from the omniscient log and are for verification
    only; no party ever sees them during the protocol.
    ``truth_bob_face_at_measure`` is the snapshot taken at the measure event.
    """

    trial_index: int
    x: float
    outcome: ClassicalOutcome
    bits_sent: int
    correction: BobCorrection
    events: tuple[Event, ...]
    truth_charlie_face: Face
    truth_pair_face: Face
    truth_alice_faces: tuple[Face, Face]
    truth_bob_face_at_measure: Face
    truth_bob_face: Face

    @property
    def event_order(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.events)

    def tick(self, name: str) -> int:
        for e in self.events:
            if e.name == name:
                return e.tick
        raise KeyError(f"no {name!r} event in trial {self.trial_index}")

    @property
    def invariant_holds(self) -> bool:
        return self.truth_bob_face is self.truth_charlie_face

    def to_dict(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "protocol": "classical",
            "x": self.x,
            "outcome": self.outcome.label,
            "bits_sent": self.bits_sent,
            "correction": self.correction.value,
            "event_order": events_to_dicts(self.events),
            "truth_charlie_face": self.truth_charlie_face.name.title(),
            "truth_pair_face": self.truth_pair_face.name.title(),
            "truth_alice_faces": [f.name.title() for f in self.truth_alice_faces],
            "truth_bob_face_at_measure": self.truth_bob_face_at_measure.name.title(),
            "truth_bob_face": self.truth_bob_face.name.title(),
        }


class MeasurementDevice:
    """Trusted machine that performs Alice's joint measurement.

    It owns its randomness and reports only whether the two coins matched.
    """

    def __init__(self, rng: Substream):
        self.rng = rng

    def measure(self, box_a: SealedBox, box_b: SealedBox) -> ClassicalOutcome:
        for box in (box_a, box_b):
            if not box.sealed:
                raise SealedBoxError(f"box {box.id} was opened before the measurement")
        if self.rng.bit():
            box_a.rotate()
            box_b.rotate()
        same = box_a.open() is box_b.open()
        return ClassicalOutcome.SAME if same else ClassicalOutcome.DIFFERENT


def step1_distribute(rng: Substream) -> tuple[SealedBox, SealedBox]:
    """Shared |1/2>HH + |1/2>TT pair; first box to Alice, second to Bob."""
    alice_box, bob_box = prepare_shared_half_by_rotation(rng).pair
    return alice_box, bob_box


def step2_charlie_prepare(x, rng: Substream,
                          mode: PreparationMode | str = PreparationMode.DIRECT
                          ) -> tuple[SealedBox, ClassicalState]:
    return prepare_state(x, mode, rng, owner="charlie")


def step3_alice_measure(alice_box: SealedBox, charlie_box: SealedBox,
                        device: MeasurementDevice) -> ClassicalOutcome:
    return device.measure(charlie_box, alice_box)


def step4_send_bit(outcome: ClassicalOutcome, channel: Channel, trial_index: int = 0,
                   session_id: int = 0) -> Message:
    message = Message.classical_bit(int(outcome), session_id, trial_index)
    channel.send("alice", "bob", message)
    return message


def step5_bob_correct(bob_box: SealedBox, outcome: ClassicalOutcome) -> SealedBox:
    if bob_correction_for(outcome) is BobCorrection.ROTATE:
        bob_box.rotate()
    return bob_box


def run_trial(x, seed: int, trial_index: int, channel: Channel | None = None,
              mode: PreparationMode | str = PreparationMode.DIRECT,
              session_id: int = 0, check: bool = True) -> TrialRecord:
    """Run steps 1-5 for one trial and return its full record.

    Raises ``InvariantViolation`` (carrying the record) if Bob's final face
    is not Charlie's face at selection and ``check`` is set.
    """
    check_probability(float(x))
    own_channel = channel is None
    if own_channel:
        channel = Channel()
    log = EventLog()
    try:
        alice_box, bob_box = step1_distribute(Substream(seed, trial_index, PARTY_SOURCE))
        pair_face = hidden_face(bob_box)
        log.emit("distribute")

        charlie_box, state = step2_charlie_prepare(
            x, Substream(seed, trial_index, PARTY_CHARLIE), mode)
        charlie_face = hidden_face(charlie_box)
        log.emit("prepare")

        device = MeasurementDevice(Substream(seed, trial_index, PARTY_DEVICE))
        outcome = step3_alice_measure(alice_box, charlie_box, device)
        alice_faces = (charlie_box.face, alice_box.face)
        bob_at_measure = hidden_face(bob_box)
        log.emit("measure")

        step4_send_bit(outcome, channel, trial_index, session_id)
        log.emit("send")

        received = channel.recv("bob", "alice")
        if received.msg_type is not MessageType.CLASSICAL_BIT:
            raise RuntimeError(f"Bob expected a ClassicalBit, got {received.msg_type.name}")
        bob_outcome = ClassicalOutcome(received.value)
        step5_bob_correct(bob_box, bob_outcome)
        log.emit("correct")
        log.emit("done")

        record = TrialRecord(
            trial_index=trial_index,
            x=state.x,
            outcome=outcome,
            bits_sent=channel.semantic_bits("alice", "bob", trial_index),
            correction=bob_correction_for(bob_outcome),
            events=tuple(log.events),
            truth_charlie_face=charlie_face,
            truth_pair_face=pair_face,
            truth_alice_faces=alice_faces,
            truth_bob_face_at_measure=bob_at_measure,
            truth_bob_face=hidden_face(bob_box),
        )
    finally:
        if own_channel:
            channel.close()
    if check and not record.invariant_holds:
        raise InvariantViolation(record)
    return record


@dataclass
class TrialBatch:
    """Column-wise classical trials; faces are 0 = Heads, 1 = Tails."""

    x: float
    seed: int
    trial_index: np.ndarray
    pair_face: np.ndarray
    charlie_face: np.ndarray
    device_parity: np.ndarray
    alice_faces: np.ndarray        # (n, 2): opened charlie box, opened pair box
    outcome: np.ndarray            # 0 = Same, 1 = Different
    bob_face_at_measure: np.ndarray
    correction: np.ndarray         # 0 = Identity, 1 = Rotate
    bob_face: np.ndarray
    bits_sent: np.ndarray
    ticks: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.trial_index)

    @property
    def violations(self) -> np.ndarray:
        """Indices of trials where Bob's final face is not Charlie's."""
        return np.flatnonzero(self.bob_face != self.charlie_face)

    @property
    def bob_heads(self) -> int:
        return int(np.count_nonzero(self.bob_face == Face.HEADS))

    def record(self, i: int) -> TrialRecord:
        events = []
        for name in sorted(EVENTS, key=lambda n: int(self.ticks[n][i])):
            events.append(Event(int(self.ticks[name][i]), name, EVENT_PARTIES[name]))
        return TrialRecord(
            trial_index=int(self.trial_index[i]),
            x=self.x,
            outcome=ClassicalOutcome(int(self.outcome[i])),
            bits_sent=int(self.bits_sent[i]),
            correction=(BobCorrection.ROTATE if self.correction[i] else BobCorrection.IDENTITY),
            events=tuple(events),
            truth_charlie_face=Face(int(self.charlie_face[i])),
            truth_pair_face=Face(int(self.pair_face[i])),
            truth_alice_faces=(Face(int(self.alice_faces[i, 0])),
                               Face(int(self.alice_faces[i, 1]))),
            truth_bob_face_at_measure=Face(int(self.bob_face_at_measure[i])),
            truth_bob_face=Face(int(self.bob_face[i])),
        )

    def records(self) -> Iterator[TrialRecord]:
        for i in range(len(self)):
            yield self.record(i)


def run_batch(x, seed: int, count: int, first_trial: int = 0) -> TrialBatch:
    """Direct-mode trials ``first_trial .. first_trial+count-1``, column-wise."""
    check_probability(float(x))
    x = float(x)
    trials = np.arange(first_trial, first_trial + count, dtype=np.uint64)
    clock = 0
    ticks = {}

    def stamp(name):
        nonlocal clock
        ticks[name] = np.full(count, clock, dtype=np.int32)
        clock += 1

    # 1: common random half-turn parity on two Heads boxes
    pair = column_bit(seed, trials, PARTY_SOURCE).astype(np.int8)
    bob = pair.copy()
    stamp("distribute")

    # 2: Charlie's Bernoulli(x) selection
    u = column_random(seed, trials, PARTY_CHARLIE)
    charlie = np.where(u < x, Face.HEADS, Face.TAILS).astype(np.int8)
    stamp("prepare")

    # 3: device rotates both of Alice's boxes by a common parity, then opens
    parity = column_bit(seed, trials, PARTY_DEVICE).astype(np.int8)
    opened_charlie = charlie ^ parity
    opened_pair = pair ^ parity
    outcome = (opened_charlie != opened_pair).astype(np.int8)
    bob_at_measure = bob.copy()
    stamp("measure")

    # 4: one bit per trial
    bits = np.full(count, MessageType.CLASSICAL_BIT.semantic_bits, dtype=np.int8)
    received = outcome.copy()
    stamp("send")

    # 5: rotate on Different
    correction = (received == ClassicalOutcome.DIFFERENT).astype(np.int8)
    bob = bob ^ correction
    stamp("correct")
    stamp("done")

    return TrialBatch(
        x=x, seed=seed, trial_index=trials.astype(np.int64), pair_face=pair,
        charlie_face=charlie, device_parity=parity,
        alice_faces=np.stack([opened_charlie, opened_pair], axis=1),
        outcome=outcome, bob_face_at_measure=bob_at_measure, correction=correction,
        bob_face=bob, bits_sent=bits, ticks=ticks)
