"""Exact enumeration of the classical trial, independent of the simulator.

A trial has three binary unknowns: Charlie's face ('H' with probability x),
the shared pair's face (uniform), and the device's rotation parity
(uniform). Walking all eight combinations by hand gives exact probabilities
for everything the Monte Carlo checks estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

_OTHER = {"H": "T", "T": "H"}


@dataclass(frozen=True)
class Branch:
    charlie: str
    pair: str
    parity: int
    weight: Fraction
    opened: tuple[str, str]     # (charlie box, alice's pair box) after the device
    outcome: str                # "same" / "different"
    bob_before: str
    bob_after: str


def branches(x) -> list[Branch]:
    x = Fraction(str(x))
    out = []
    for charlie, pair, parity in product("HT", "HT", (0, 1)):
        weight = (x if charlie == "H" else 1 - x) * Fraction(1, 2) * Fraction(1, 2)
        c_open = _OTHER[charlie] if parity else charlie
        p_open = _OTHER[pair] if parity else pair
        outcome = "same" if c_open == p_open else "different"
        bob_before = pair
        bob_after = bob_before if outcome == "same" else _OTHER[bob_before]
        out.append(Branch(charlie, pair, parity, weight, (c_open, p_open), outcome,
                          bob_before, bob_after))
    return out


@dataclass(frozen=True)
class BranchSummary:
    p_same: Fraction
    p_bob_heads: Fraction
    p_bob_heads_given_same: Fraction | None
    p_bob_heads_given_different: Fraction | None
    p_opened_charlie_heads: Fraction
    p_opened_pair_heads: Fraction
    p_bob_matches_charlie: Fraction


def summarize(x) -> BranchSummary:
    bs = branches(x)

    def p(pred):
        return sum((b.weight for b in bs if pred(b)), Fraction(0))

    p_same = p(lambda b: b.outcome == "same")
    p_diff = 1 - p_same
    heads_same = p(lambda b: b.outcome == "same" and b.bob_before == "H")
    heads_diff = p(lambda b: b.outcome == "different" and b.bob_before == "H")
    return BranchSummary(
        p_same=p_same,
        p_bob_heads=p(lambda b: b.bob_after == "H"),
        p_bob_heads_given_same=heads_same / p_same if p_same else None,
        p_bob_heads_given_different=heads_diff / p_diff if p_diff else None,
        p_opened_charlie_heads=p(lambda b: b.opened[0] == "H"),
        p_opened_pair_heads=p(lambda b: b.opened[1] == "H"),
        p_bob_matches_charlie=p(lambda b: b.bob_after == b.charlie),
    )
