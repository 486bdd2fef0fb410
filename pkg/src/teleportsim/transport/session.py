"""Wire up the three parties and a coordinator, in-process or over TCP."""

from __future__ import annotations

import queue
import threading
from contextlib import contextmanager

from ..epistemic_state import PreparationMode
from .channel import SocketLink, link_pair
from .coordinator import Coordinator
from .parties import ROLES, accept_session, engine_for, run_engine, serve_party


@contextmanager
def inprocess_links():
    """Coordinator-side links to party engines running on threads."""
    links, threads = {}, []
    for role in ROLES:
        ours, theirs = link_pair()
        engine = engine_for(role)

        def party(link=theirs, engine=engine):
            if accept_session(link, engine, timeout=30):
                run_engine(link, engine)

        t = threading.Thread(target=party, name=f"party-{role}", daemon=True)
        t.start()
        links[role] = ours
        threads.append(t)
    try:
        yield links
    finally:
        for link in links.values():
            link.close()
        for t in threads:
            t.join(timeout=5)


def start_local_servers(host: str = "127.0.0.1") -> tuple[dict, list[threading.Thread]]:
    """Run ``serve_party`` for every role on ephemeral ports.

    Returns the bound endpoints and the server threads.
    """
    endpoints, threads = {}, []
    for role in ROLES:
        bound: queue.Queue = queue.Queue()
        t = threading.Thread(target=serve_party, args=(role, host, 0, bound.put),
                             name=f"serve-{role}", daemon=True)
        t.start()
        endpoints[role] = bound.get(timeout=10)
        threads.append(t)
    return endpoints, threads


@contextmanager
def tcp_links(endpoints: dict | None = None):
    """Socket links to each party; local servers are started if none are given."""
    threads = []
    if endpoints is None:
        endpoints, threads = start_local_servers()
    links = {role: SocketLink.connect(*endpoints[role]) for role in ROLES}
    try:
        yield links
    finally:
        for link in links.values():
            link.close()
        for t in threads:
            t.join(timeout=5)


def run_networked(protocol: str, trials: int, seed: int, config: dict,
                  transport: str = "inprocess", endpoints: dict | None = None,
                  mode=PreparationMode.DIRECT, first_trial: int = 0):
    """Run a full session and return ``(records, coordinator)``."""
    if transport == "inprocess":
        opener = inprocess_links()
    elif transport == "tcp":
        opener = tcp_links(endpoints)
    else:
        raise ValueError(f"unknown transport {transport!r}")
    with opener as links:
        coordinator = Coordinator(links, seed, protocol, mode)
        records = coordinator.run(trials, config, first_trial)
    return records, coordinator
