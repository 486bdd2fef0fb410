"""Trial coordinator for networked runs.

The coordinator stands in for the physical world: it holds the boxes (or the
qubit register), runs the source and the trusted measurement device, applies
the rotations parties ask for, and keeps the omniscient log. Parties only
ever hold handles. Traffic between parties (Charlie's box to Alice, Alice's
bits to Bob) passes through here so it can be routed and counted.

Randomness comes from the same (seed, trial, party) substreams as the
in-process runners, so a networked trial yields an identical record.
"""

from __future__ import annotations

import logging
import secrets
from dataclasses import dataclass, field

from ..classical_protocol import (PARTY_CHARLIE, PARTY_DEVICE, PARTY_SOURCE, BobCorrection,
                                  ClassicalOutcome, InvariantViolation, MeasurementDevice,
                                  TrialRecord, step1_distribute, step2_charlie_prepare)
from ..epistemic_state import PreparationMode, hidden_face
from ..events import EventLog
from ..quantum_protocol import (Correction, PureState, QuantumTrialRecord, bell_measure,
                                compose, fidelity, prepare_epr, random_pure_state)
from ..substreams import Substream, stream_key
from .channel import ChannelClosed
from .parties import ROLES
from .wire import VERSION, ControlOp, Message, MessageType

log = logging.getLogger(__name__)


class HandshakeRejected(ConnectionError):
    def __init__(self, role: str, code: int, reason: str):
        super().__init__(f"{role} rejected the session (code 0x{code:02x}): {reason}")
        self.role = role
        self.code = code


class TrialAborted(RuntimeError):
    def __init__(self, trial_index: int, cause: str):
        super().__init__(f"trial {trial_index} aborted: {cause}")
        self.trial_index = trial_index
        self.cause = cause


@dataclass
class Handle:
    obj: object
    owner: str
    token: int = field(default_factory=lambda: secrets.randbits(64))


class _World:
    """Handles, ownership and tokens shared by both protocol worlds."""

    def __init__(self, seed: int):
        self.seed = seed
        self.handles: dict[int, Handle] = {}
        self._next = 1

    def issue(self, obj, owner: str, handle_id: int | None = None) -> tuple[int, int]:
        if handle_id is None:
            handle_id = self._next
            self._next += 1
        h = Handle(obj, owner)
        self.handles[handle_id] = h
        return handle_id, h.token

    def claim(self, ref, party: str, trial: int):
        handle_id, token = ref
        h = self.handles.get(handle_id)
        if h is None or h.token != token:
            raise TrialAborted(trial, f"{party} presented an unknown box handle {handle_id}")
        if h.owner != party:
            raise TrialAborted(trial, f"{party} does not hold box {handle_id}")
        return h.obj

    def transfer(self, ref, sender: str, receiver: str, trial: int) -> None:
        self.claim(ref, sender, trial)
        self.handles[ref[0]].owner = receiver


class ClassicalWorld(_World):
    def __init__(self, seed: int, mode=PreparationMode.DIRECT):
        super().__init__(seed)
        self.mode = PreparationMode(mode)

    def begin(self, trial: int):
        self.log = EventLog()
        self.truth: dict = {}
        self.bits = 0
        alice_box, bob_box = step1_distribute(Substream(self.seed, trial, PARTY_SOURCE))
        self.alice_box, self.bob_box = alice_box, bob_box
        self.truth["pair"] = hidden_face(bob_box)
        self.log.emit("distribute")
        return (self.issue(alice_box, "alice", alice_box.id),
                self.issue(bob_box, "bob", bob_box.id))

    def prepare(self, trial: int, body: dict):
        box, state = step2_charlie_prepare(float(body["x"]),
                                           Substream(self.seed, trial, PARTY_CHARLIE),
                                           self.mode)
        self.x = state.x
        self.truth["charlie"] = hidden_face(box)
        self.log.emit("prepare")
        return self.issue(box, "charlie", box.id)

    def measure(self, trial: int, boxes) -> dict:
        held = [self.claim(ref, "alice", trial) for ref in boxes]
        charlie_box = next(b for b in held if b is not self.alice_box)
        device = MeasurementDevice(Substream(self.seed, trial, PARTY_DEVICE))
        outcome = device.measure(charlie_box, self.alice_box)
        self.outcome = outcome
        self.truth["alice"] = (charlie_box.face, self.alice_box.face)
        self.truth["bob_at_measure"] = hidden_face(self.bob_box)
        self.log.emit("measure")
        return {"outcome": int(outcome)}

    def correct(self, trial: int, ref, op: str) -> None:
        box = self.claim(ref, "bob", trial)
        self.correction = BobCorrection(op)
        if self.correction is BobCorrection.ROTATE:
            box.rotate()
        self.log.emit("correct")

    def finish(self, trial: int) -> TrialRecord:
        self.log.emit("done")
        self.handles.clear()
        record = TrialRecord(
            trial_index=trial, x=self.x, outcome=ClassicalOutcome(self.outcome),
            bits_sent=self.bits, correction=self.correction, events=tuple(self.log.events),
            truth_charlie_face=self.truth["charlie"], truth_pair_face=self.truth["pair"],
            truth_alice_faces=self.truth["alice"],
            truth_bob_face_at_measure=self.truth["bob_at_measure"],
            truth_bob_face=hidden_face(self.bob_box))
        if not record.invariant_holds:
            raise InvariantViolation(record)
        return record


class QuantumWorld(_World):
    """Qubits never leave the coordinator; handles stand for them."""

    def begin(self, trial: int):
        self.log = EventLog()
        self.bits = 0
        self.epr = prepare_epr()
        self.log.emit("distribute")
        return self.issue("alice-qubit", "alice"), self.issue("bob-qubit", "bob")

    def prepare(self, trial: int, body: dict):
        requested = body["state"]
        if requested == "random":
            psi = random_pure_state(Substream(self.seed, trial, PARTY_CHARLIE))
        else:
            a_re, a_im, b_re, b_im = requested
            psi = PureState(complex(a_re, a_im), complex(b_re, b_im))
        self.psi = psi
        self.register = compose(psi, self.epr)
        self.log.emit("prepare")
        return self.issue("charlie-qubit", "charlie")

    def measure(self, trial: int, refs) -> dict:
        for ref in refs:
            self.claim(ref, "alice", trial)
        outcome, bob = bell_measure(self.register, Substream(self.seed, trial, PARTY_DEVICE))
        self.outcome, self.bob_before = outcome, bob
        self.log.emit("measure")
        return {"outcome": outcome.wire_value}

    def correct(self, trial: int, ref, op: str) -> None:
        self.claim(ref, "bob", trial)
        self.correction = Correction(op)
        self.bob_final = PureState.from_vector(self.correction.matrix @ self.bob_before.vector)
        self.log.emit("correct")

    def finish(self, trial: int) -> QuantumTrialRecord:
        self.log.emit("done")
        self.handles.clear()
        return QuantumTrialRecord(
            trial_index=trial, outcome=self.outcome, bits_sent=self.bits,
            correction=self.correction, events=tuple(self.log.events),
            truth_psi=self.psi, truth_bob_before_correction=self.bob_before,
            truth_bob_final=self.bob_final, fidelity=fidelity(self.psi, self.bob_final))


class Coordinator:
    """Drives trials across three party links (in-process or TCP)."""

    def __init__(self, links: dict, seed: int, protocol: str = "classical",
                 mode=PreparationMode.DIRECT, timeout: float = 30.0):
        missing = set(ROLES) - set(links)
        if missing:
            raise ValueError(f"missing links for {sorted(missing)}")
        self.links = links
        self.seed = seed
        self.protocol = protocol
        self.timeout = timeout
        self.session_id = stream_key(seed, 0, "session")
        self.world = (QuantumWorld(seed) if protocol == "quantum"
                      else ClassicalWorld(seed, mode))
        self.frames: dict[tuple[str, str, str], int] = {}

    # plumbing

    def _send(self, role: str, message: Message) -> None:
        self.links[role].send(message)

    def _expect(self, role: str, trial: int, msg_type: MessageType,
                op: ControlOp | None = None) -> Message:
        try:
            message = self.links[role].recv(self.timeout)
        except (ChannelClosed, TimeoutError) as exc:
            raise TrialAborted(trial, f"lost {role}: {exc}") from exc
        if message.msg_type is MessageType.CONTROL and message.op is ControlOp.ERROR:
            raise TrialAborted(trial, f"{role} reported: {message.body.get('reason')}")
        if message.msg_type is not msg_type or (op is not None and message.op is not op):
            got = message.op.name if message.msg_type is MessageType.CONTROL else \
                message.msg_type.name
            raise TrialAborted(trial, f"expected {op.name if op else msg_type.name} "
                                      f"from {role}, got {got}")
        if message.trial_index != trial or message.session_id != self.session_id:
            raise TrialAborted(trial, f"{role} answered for session {message.session_id} "
                                      f"trial {message.trial_index}")
        return message

    def _count(self, sender: str, receiver: str, message: Message) -> None:
        key = (sender, receiver, message.msg_type.name)
        self.frames[key] = self.frames.get(key, 0) + 1

    def _control(self, op: ControlOp, body: dict | None = None, trial: int = 0) -> Message:
        return Message.control(op, body, self.session_id, trial)

    # session

    def handshake(self, config: dict) -> None:
        for role in ROLES:
            link = self.links[role]
            link.send(self._control(ControlOp.HELLO, {"role": role, "version": VERSION}))
            reply = link.recv(self.timeout)
            if reply.msg_type is MessageType.CONTROL and reply.op is ControlOp.REJECT:
                body = reply.body
                raise HandshakeRejected(role, body.get("code", 0), body.get("reason", ""))
            if (reply.msg_type is not MessageType.CONTROL or reply.op is not ControlOp.WELCOME
                    or reply.body.get("role") != role):
                raise HandshakeRejected(role, 0x02, f"unexpected handshake reply {reply}")
        for role in ROLES:
            body = {"protocol": self.protocol}
            if role == "charlie":
                body.update(config)
            self._send(role, self._control(ControlOp.CONFIG, body))

    def teardown(self) -> None:
        for role in ROLES:
            try:
                self._send(role, self._control(ControlOp.TEARDOWN))
            except ChannelClosed:
                pass

    def run_trial(self, trial: int):
        world = self.world
        bit_type = (MessageType.TWO_BITS if self.protocol == "quantum"
                    else MessageType.CLASSICAL_BIT)
        alice_ref, bob_ref = world.begin(trial)
        self._send("alice", Message.box_transfer(*alice_ref, self.session_id, trial))
        self._send("bob", Message.box_transfer(*bob_ref, self.session_id, trial))

        self._send("charlie", self._control(ControlOp.START, None, trial))
        request = self._expect("charlie", trial, MessageType.CONTROL, ControlOp.PREPARE)
        charlie_ref = world.prepare(trial, request.body)
        self._send("charlie", Message.box_transfer(*charlie_ref, self.session_id, trial))
        handover = self._expect("charlie", trial, MessageType.BOX_TRANSFER)
        world.transfer(handover.box, "charlie", "alice", trial)
        self._count("charlie", "alice", handover)
        self._send("alice", handover)

        request = self._expect("alice", trial, MessageType.CONTROL, ControlOp.MEASURE)
        result = world.measure(trial, [tuple(b) for b in request.body["boxes"]])
        self._send("alice", self._control(ControlOp.RESULT, result, trial))

        bits = self._expect("alice", trial, bit_type)
        self._count("alice", "bob", bits)
        world.bits += bits.semantic_bits
        world.log.emit("send")
        self._send("bob", bits)

        request = self._expect("bob", trial, MessageType.CONTROL, ControlOp.CORRECT)
        world.correct(trial, tuple(request.body["box"]), request.body["op"])
        return world.finish(trial)

    def run(self, trials: int, config: dict, first_trial: int = 0):
        """Handshake, run ``trials`` trials, tear down; returns the records."""
        self.handshake(config)
        records = []
        try:
            for t in range(first_trial, first_trial + trials):
                try:
                    records.append(self.run_trial(t))
                except TrialAborted:
                    log.exception("networked trial %d aborted", t)
                    raise
        finally:
            self.teardown()
        return records
