"""Logical-clock event logs shared by both protocols."""

from __future__ import annotations

from dataclasses import dataclass

EVENTS = ("distribute", "prepare", "measure", "send", "correct", "done")
EVENT_PARTIES = {"distribute": "source", "prepare": "charlie", "measure": "alice",
                 "send": "alice", "correct": "bob", "done": "coordinator"}


@dataclass(frozen=True)
class Event:
    tick: int
    name: str
    party: str


class EventLog:
    """Logical clock plus ordered event list for one trial."""

    def __init__(self):
        self.events: list[Event] = []

    def emit(self, name: str, party: str | None = None) -> Event:
        event = Event(len(self.events), name, party or EVENT_PARTIES.get(name, name))
        self.events.append(event)
        return event


def events_to_dicts(events) -> list[dict]:
    return [{"tick": e.tick, "event": e.name, "party": e.party} for e in events]
