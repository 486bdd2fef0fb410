"""Frames, links and the three-party messaging layer."""

from .channel import (Channel, ChannelClosed, QueueLink, SocketLink, UnknownParty,
                      link_pair, socket_link_pair)
from .wire import (ERR_PROTOCOL, ERR_ROLE_CONFLICT, ERR_VERSION_MISMATCH, HEADER_SIZE,
                   MAGIC, VERSION, ControlOp, FrameError, Message, MessageType,
                   VersionMismatch, decode, encode)

__all__ = [
    "Channel", "ChannelClosed", "QueueLink", "SocketLink", "UnknownParty", "link_pair",
    "socket_link_pair", "ERR_PROTOCOL", "ERR_ROLE_CONFLICT", "ERR_VERSION_MISMATCH",
    "HEADER_SIZE", "MAGIC", "VERSION", "ControlOp", "FrameError", "Message",
    "MessageType", "VersionMismatch", "decode", "encode",
]
