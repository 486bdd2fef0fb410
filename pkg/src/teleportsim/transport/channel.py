"""Point-to-point links and the named-party channel built on them.

A link is one end of a reliable, ordered, bidirectional frame pipe. Both the
in-process and the socket implementation carry encoded frames, so a message
always makes the same trip through the codec regardless of transport.
"""

from __future__ import annotations

import queue
import socket
import threading
from dataclasses import dataclass
from typing import Callable

from .wire import HEADER_SIZE, FrameError, Message, decode, decode_header, encode


class ChannelClosed(ConnectionError):
    pass


class UnknownParty(ValueError):
    pass


_CLOSED = object()


class QueueLink:
    """In-process link end. Create connected ends with ``link_pair``."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def send(self, message: Message) -> None:
        if self._closed:
            raise ChannelClosed("link is closed")
        self._outbox.put(encode(message))

    def send_frame(self, frame: bytes) -> None:
        if self._closed:
            raise ChannelClosed("link is closed")
        self._outbox.put(bytes(frame))

    def recv(self, timeout: float | None = None) -> Message:
        if self._closed:
            raise ChannelClosed("link is closed")
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no message within timeout") from None
        if item is _CLOSED:
            self._closed = True
            raise ChannelClosed("peer closed the link")
        return decode(item)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(_CLOSED)
            self._inbox.put(_CLOSED)


def link_pair() -> tuple[QueueLink, QueueLink]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return QueueLink(b_to_a, a_to_b), QueueLink(a_to_b, b_to_a)


class SocketLink:
    """Link end over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._send_lock = threading.Lock()
        self._closed = False
        try:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        except OSError:
            pass  # not TCP (socketpair)

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 10.0) -> "SocketLink":
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.settimeout(None)
        return cls(sock)

    def send(self, message: Message) -> None:
        self.send_frame(encode(message))

    def send_frame(self, frame: bytes) -> None:
        if self._closed:
            raise ChannelClosed("link is closed")
        try:
            with self._send_lock:
                self.sock.sendall(frame)
        except OSError as exc:
            raise ChannelClosed(f"send failed: {exc}") from exc

    def _read_exact(self, n: int, already: int) -> bytes:
        chunks = []
        got = 0
        while got < n:
            try:
                chunk = self.sock.recv(n - got)
            except socket.timeout:
                raise TimeoutError("no message within timeout") from None
            except OSError as exc:
                raise ChannelClosed(f"recv failed: {exc}") from exc
            if not chunk:
                if got == 0 and already == 0:
                    raise ChannelClosed("peer closed the connection")
                raise FrameError(f"short read: connection closed after "
                                 f"{already + got} bytes", already + got)
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def recv(self, timeout: float | None = None) -> Message:
        if self._closed:
            raise ChannelClosed("link is closed")
        self.sock.settimeout(timeout)
        header = self._read_exact(HEADER_SIZE, 0)
        _, _, _, length = decode_header(header)
        payload = self._read_exact(length, HEADER_SIZE) if length else b""
        return decode(header + payload)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def socket_link_pair() -> tuple[SocketLink, SocketLink]:
    """Two ends joined by a real loopback TCP connection."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as listener:
        listener.bind(("127.0.0.1", 0))
        listener.listen(1)
        client = socket.create_connection(listener.getsockname())
        server, _ = listener.accept()
    return SocketLink(client), SocketLink(server)


@dataclass(frozen=True)
class Delivery:
    sender: str
    receiver: str
    trial_index: int
    msg_type: str
    semantic_bits: int
    wire_bytes: int


class Channel:
    """Reliable FIFO messaging between named parties.

    Each ordered (sender, receiver) pair gets its own link, so ordering holds
    per pair. Every send is recorded for bit accounting: ``semantic_bits``
    counts protocol information, ``wire_bytes`` the full frame.
    """

    def __init__(self, parties=("alice", "bob", "charlie"),
                 link_factory: Callable[[], tuple] = link_pair):
        self.parties = tuple(parties)
        self._factory = link_factory
        self._links: dict[tuple[str, str], tuple] = {}
        self._lock = threading.Lock()
        self.deliveries: list[Delivery] = []
        self.closed = False

    def _link(self, sender: str, receiver: str):
        for p in (sender, receiver):
            if p not in self.parties:
                raise UnknownParty(f"unknown party {p!r}")
        with self._lock:
            if (sender, receiver) not in self._links:
                self._links[(sender, receiver)] = self._factory()
            return self._links[(sender, receiver)]

    def send(self, sender: str, receiver: str, message: Message) -> None:
        if self.closed:
            raise ChannelClosed("channel is closed")
        out_end, _ = self._link(sender, receiver)
        out_end.send(message)
        with self._lock:
            self.deliveries.append(Delivery(
                sender, receiver, message.trial_index, message.msg_type.name,
                message.semantic_bits, HEADER_SIZE + len(message.payload)))

    def recv(self, receiver: str, sender: str, timeout: float | None = None) -> Message:
        if self.closed:
            raise ChannelClosed("channel is closed")
        _, in_end = self._link(sender, receiver)
        return in_end.recv(timeout)

    def semantic_bits(self, sender: str | None = None, receiver: str | None = None,
                      trial_index: int | None = None) -> int:
        return sum(d.semantic_bits for d in self._select(sender, receiver, trial_index))

    def wire_bytes(self, sender: str | None = None, receiver: str | None = None,
                   trial_index: int | None = None) -> int:
        return sum(d.wire_bytes for d in self._select(sender, receiver, trial_index))

    def _select(self, sender, receiver, trial_index):
        with self._lock:
            return [d for d in self.deliveries
                    if (sender is None or d.sender == sender)
                    and (receiver is None or d.receiver == receiver)
                    and (trial_index is None or d.trial_index == trial_index)]

    def close(self) -> None:
        self.closed = True
        with self._lock:
            links = list(self._links.values())
        for a, b in links:
            a.close()
            b.close()
