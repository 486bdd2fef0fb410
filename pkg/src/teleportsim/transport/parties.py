"""Party engines and the TCP host that runs one of them.

A party sees only what arrives on its link: box handles (id plus sealed-state
token), protocol bits, and control messages. The physical boxes, the
measurement device and the ground-truth log stay with the coordinator.
"""

from __future__ import annotations

import logging
import socket
import threading
from typing import Callable

from ..classical_protocol import ClassicalOutcome, bob_correction_for
from ..quantum_protocol import BellOutcome, correction_for
from .channel import ChannelClosed, SocketLink
from .wire import (ERR_PROTOCOL, ERR_ROLE_CONFLICT, ERR_VERSION_MISMATCH, VERSION,
                   ControlOp, FrameError, Message, MessageType, VersionMismatch)

log = logging.getLogger(__name__)

ROLES = ("alice", "bob", "charlie")


class ProtocolError(RuntimeError):
    pass


class PartyEngine:
    """Reacts to inbound messages with outbound ones, for one role."""

    role = ""

    def __init__(self):
        self.config: dict = {}
        self.session_id = 0

    def reply(self, trial_index: int, op: ControlOp, body: dict | None = None) -> Message:
        return Message.control(op, body, self.session_id, trial_index)

    def handle(self, message: Message) -> list[Message]:
        if message.msg_type is MessageType.CONTROL and message.op is ControlOp.CONFIG:
            self.config = message.body
            return []
        return self.on_message(message)

    def on_message(self, message: Message) -> list[Message]:
        raise NotImplementedError

    @property
    def protocol(self) -> str:
        return self.config.get("protocol", "classical")


class AliceEngine(PartyEngine):
    role = "alice"

    def __init__(self):
        super().__init__()
        self.held: list[tuple[int, int]] = []

    def on_message(self, message):
        t = message.trial_index
        if message.msg_type is MessageType.BOX_TRANSFER:
            self.held.append(message.box)
            if len(self.held) == 2:
                boxes, self.held = self.held, []
                return [self.reply(t, ControlOp.MEASURE, {"boxes": [list(b) for b in boxes]})]
            return []
        if message.msg_type is MessageType.CONTROL and message.op is ControlOp.RESULT:
            outcome = message.body["outcome"]
            if self.protocol == "quantum":
                return [Message.two_bits(outcome, self.session_id, t)]
            return [Message.classical_bit(outcome, self.session_id, t)]
        raise ProtocolError(f"alice cannot handle {message.msg_type.name}")


class BobEngine(PartyEngine):
    role = "bob"

    def __init__(self):
        super().__init__()
        self.box: tuple[int, int] | None = None

    def on_message(self, message):
        t = message.trial_index
        if message.msg_type is MessageType.BOX_TRANSFER:
            self.box = message.box
            return []
        if message.msg_type is MessageType.CLASSICAL_BIT:
            op = bob_correction_for(ClassicalOutcome(message.value)).value
        elif message.msg_type is MessageType.TWO_BITS:
            op = correction_for(BellOutcome.from_wire(message.value)).value
        else:
            raise ProtocolError(f"bob cannot handle {message.msg_type.name}")
        if self.box is None:
            raise ProtocolError("bob received bits before his box")
        box, self.box = self.box, None
        return [self.reply(t, ControlOp.CORRECT, {"box": list(box), "op": op})]


class CharlieEngine(PartyEngine):
    role = "charlie"

    def on_message(self, message):
        t = message.trial_index
        if message.msg_type is MessageType.CONTROL and message.op is ControlOp.START:
            if self.protocol == "quantum":
                return [self.reply(t, ControlOp.PREPARE, {"state": self.config["state"]})]
            return [self.reply(t, ControlOp.PREPARE, {"x": self.config["x"]})]
        if message.msg_type is MessageType.BOX_TRANSFER:
            # hand the freshly prepared box over to Alice, unopened
            box_id, token = message.box
            return [Message.box_transfer(box_id, token, self.session_id, t)]
        raise ProtocolError(f"charlie cannot handle {message.msg_type.name}")


ENGINES = {"alice": AliceEngine, "bob": BobEngine, "charlie": CharlieEngine}


def engine_for(role: str) -> PartyEngine:
    if role not in ENGINES:
        raise ValueError(f"unknown role {role!r}; expected one of {ROLES}")
    return ENGINES[role]()


def _reject(link, code: int, reason: str, session_id: int = 0) -> None:
    try:
        link.send(Message.control(ControlOp.REJECT, {"code": code, "reason": reason,
                                                     "version": VERSION}, session_id))
    except ChannelClosed:
        pass


def accept_session(link, engine: PartyEngine, timeout: float | None = None) -> bool:
    """Answer the driver's HELLO. Returns True if the session was accepted."""
    try:
        hello = link.recv(timeout)
    except VersionMismatch as exc:
        _reject(link, ERR_VERSION_MISMATCH, str(exc))
        return False
    except FrameError as exc:
        _reject(link, ERR_PROTOCOL, str(exc))
        return False
    if hello.msg_type is not MessageType.CONTROL or hello.op is not ControlOp.HELLO:
        _reject(link, ERR_PROTOCOL, "expected HELLO", hello.session_id)
        return False
    body = hello.body
    if body.get("version") != VERSION:
        _reject(link, ERR_VERSION_MISMATCH,
                f"driver speaks version {body.get('version')}, party speaks {VERSION}",
                hello.session_id)
        return False
    if body.get("role") != engine.role:
        _reject(link, ERR_ROLE_CONFLICT,
                f"endpoint serves {engine.role}, not {body.get('role')}", hello.session_id)
        return False
    engine.session_id = hello.session_id
    link.send(Message.control(ControlOp.WELCOME, {"role": engine.role, "version": VERSION},
                              hello.session_id))
    return True


def run_engine(link, engine: PartyEngine) -> None:
    """Pump messages through ``engine`` until TEARDOWN or the link closes."""
    while True:
        try:
            message = link.recv()
        except ChannelClosed:
            log.warning("%s: link closed before teardown", engine.role)
            return
        if message.msg_type is MessageType.CONTROL and message.op is ControlOp.TEARDOWN:
            return
        try:
            replies = engine.handle(message)
        except ProtocolError as exc:
            link.send(Message.control(ControlOp.ERROR, {"reason": str(exc)},
                                      engine.session_id, message.trial_index))
            continue
        for out in replies:
            link.send(out)


def serve_party(role: str, host: str = "127.0.0.1", port: int = 0,
                ready: Callable[[tuple[str, int]], None] | None = None) -> int:
    """Host one party for a single session; returns 0 after a clean teardown.

    ``ready`` is called with the bound address once the socket listens.
    Connections arriving while a session is active are rejected with
    ERR_ROLE_CONFLICT.
    """
    engine = engine_for(role)
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(4)
    if ready is not None:
        ready(listener.getsockname())
    busy = threading.Event()
    done = threading.Event()
    accepted: list[SocketLink] = []

    def acceptor():
        while not done.is_set():
            try:
                conn, _ = listener.accept()
            except OSError:
                return
            link = SocketLink(conn)
            if busy.is_set():
                threading.Thread(target=_turn_away, args=(link, role), daemon=True).start()
                continue
            accepted.append(link)
            busy.set()

    def _session_started():
        return busy.wait(0.05)

    thread = threading.Thread(target=acceptor, daemon=True)
    thread.start()
    try:
        while True:
            if not _session_started():
                continue
            link = accepted[-1]
            if accept_session(link, engine, timeout=30):
                run_engine(link, engine)
                link.close()
                return 0
            link.close()
            accepted.clear()
            busy.clear()
    finally:
        done.set()
        listener.close()


def _turn_away(link: SocketLink, role: str) -> None:
    try:
        hello = link.recv(timeout=5)
        _reject(link, ERR_ROLE_CONFLICT, f"role {role} is already engaged in a session",
                hello.session_id)
    except (ChannelClosed, FrameError, TimeoutError):
        pass
    finally:
        link.close()
