"""Coins in sealed boxes and the epistemic classical state |x>.

A coin sits in a sealed box showing Heads or Tails. Nobody holding the box
can read the face; they can only rotate the box by 180 degrees (which flips
the face) or open it (which reveals the face and ends the box's sealed life).
``ClassicalState(x)`` is somebody's knowledge that the coin shows Heads, the
reference configuration, with probability ``x``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Iterable

from .substreams import Substream

MAX_ENSEMBLE_SIZE = 10 ** 6

_box_ids = itertools.count(1)


class SealedBoxError(RuntimeError):
    """An operation needed a sealed box and got an opened one."""


class PreparationError(ValueError):
    """A state could not be prepared as requested."""


class Face(enum.IntEnum):
    HEADS = 0
    TAILS = 1

    def flip(self) -> "Face":
        return Face(self ^ 1)


REFERENCE = Face.HEADS


class PreparationMode(str, enum.Enum):
    DIRECT = "direct"
    ENSEMBLE = "ensemble"


class SealedBox:
    """A coin fixed inside a sealed box.

    The face is not exposed while the box is sealed. ``rotate`` flips it
    without revealing it; ``open`` reveals it and unseals the box for good.
    """

    __slots__ = ("id", "_face", "_sealed")

    def __init__(self, face: Face, box_id: int | None = None):
        self.id = next(_box_ids) if box_id is None else box_id
        self._face = Face(face)
        self._sealed = True

    def __repr__(self) -> str:
        if self._sealed:
            return f"SealedBox(id={self.id}, sealed)"
        return f"SealedBox(id={self.id}, opened, {self._face.name})"

    @property
    def sealed(self) -> bool:
        return self._sealed

    def rotate(self) -> "SealedBox":
        if not self._sealed:
            raise SealedBoxError(f"box {self.id} is already open")
        self._face = self._face.flip()
        return self

    def open(self) -> Face:
        if not self._sealed:
            raise SealedBoxError(f"box {self.id} is already open")
        self._sealed = False
        return self._face

    @property
    def face(self) -> Face:
        """Face of an opened box."""
        if self._sealed:
            raise SealedBoxError(f"box {self.id} is sealed")
        return self._face


def hidden_face(box: SealedBox) -> Face:
    """Ground-truth face of a box, sealed or not.

    For the omniscient trial log and for tests only; protocol parties never
    call this.
    """
    return box._face


def rotate(box: SealedBox) -> SealedBox:
    return box.rotate()


@dataclass(frozen=True)
class ClassicalState:
    """Knowledge held by ``owner`` that a coin shows Heads with probability x."""

    x: float
    owner: str = "charlie"

    def __post_init__(self):
        check_probability(self.x)

    def rotated(self) -> "ClassicalState":
        return ClassicalState(1 - self.x, self.owner)

    @property
    def is_certain(self) -> bool:
        return self.x in (0, 1)


def check_probability(p, name: str = "x") -> None:
    if not 0 <= p <= 1:
        raise PreparationError(f"{name}={p!r} is not a probability in [0, 1]")


def ensemble_size_for(x) -> int:
    """Smallest N = 10**d such that N*x is a whole number.

    ``x`` is read by its decimal digits (``str(0.3)`` is ``'0.3'``), so
    binary floating-point noise does not inflate the precision.
    """
    try:
        dec = Decimal(str(x))
    except InvalidOperation:
        raise PreparationError(f"cannot read {x!r} as a decimal") from None
    exponent = dec.normalize().as_tuple().exponent
    digits = max(0, -exponent)
    size = 10 ** digits
    if size > MAX_ENSEMBLE_SIZE:
        raise PreparationError(
            f"x={x!r} needs {digits} decimal digits; ensemble mode is capped at "
            f"N={MAX_ENSEMBLE_SIZE}, use direct mode")
    return size


def heads_count(x, size: int) -> int:
    n = Fraction(str(x)) * size
    if n.denominator != 1:
        raise PreparationError(f"x*N = {x}*{size} is not a whole number")
    return int(n)


class Ensemble:
    """``size`` sealed boxes, exactly ``n_heads`` of them Heads, shuffled."""

    def __init__(self, n_heads: int, size: int, rng: Substream | None = None):
        if not 0 <= n_heads <= size or size < 1:
            raise PreparationError(f"invalid ensemble n_heads={n_heads}, size={size}")
        self.n_heads = n_heads
        self.size = size
        faces = [Face.HEADS] * n_heads + [Face.TAILS] * (size - n_heads)
        if rng is not None:
            order = rng.generator().permutation(size)
            faces = [faces[i] for i in order]
        self.boxes = [SealedBox(f) for f in faces]

    def __len__(self) -> int:
        return len(self.boxes)

    def draw(self, rng: Substream) -> SealedBox:
        """Remove and return a uniformly chosen box."""
        if not self.boxes:
            raise PreparationError("ensemble is exhausted")
        return self.boxes.pop(rng.integers(len(self.boxes)))


def prepare_state(x, mode: PreparationMode | str = PreparationMode.DIRECT,
                  rng: Substream | None = None, owner: str = "charlie",
                  size: int | None = None) -> tuple[SealedBox, ClassicalState]:
    """Prepare a box whose coin shows Heads with probability ``x``.

    Direct mode makes one Bernoulli(x) draw. Ensemble mode builds the
    ensemble numbered N*x (N*x Heads out of N boxes, shuffled) and draws one
    box from it; the ensemble is discarded afterwards.
    """
    if rng is None:
        raise ValueError("prepare_state needs a substream")
    check_probability(float(x))
    mode = PreparationMode(mode)
    if mode is PreparationMode.DIRECT:
        face = Face.HEADS if rng.random() < float(x) else Face.TAILS
        box = SealedBox(face)
    else:
        n = ensemble_size_for(x) if size is None else size
        ensemble = Ensemble(heads_count(x, n), n, rng)
        box = ensemble.draw(rng)
    return box, ClassicalState(float(x), owner)


@dataclass
class CorrelatedPairState:
    """Two boxes known to show the same face; HH with probability y."""

    y: float
    pair: tuple[SealedBox, SealedBox]

    def __post_init__(self):
        check_probability(self.y, "y")
        if hidden_face(self.pair[0]) != hidden_face(self.pair[1]):
            raise PreparationError("correlated pair holds opposite faces")


def prepare_correlated_pair(y, rng: Substream,
                            mode: PreparationMode | str = PreparationMode.DIRECT
                            ) -> CorrelatedPairState:
    """Select a pair from the ensemble of pairs numbered N*y.

    In ensemble mode the N pairs are built explicitly (N*y of them HH) and
    one is drawn; direct mode draws the common face from Bernoulli(y).
    """
    check_probability(float(y), "y")
    if PreparationMode(mode) is PreparationMode.DIRECT:
        face = Face.HEADS if rng.random() < float(y) else Face.TAILS
    else:
        n = ensemble_size_for(y)
        pairs = Ensemble(heads_count(y, n), n, rng)
        face = hidden_face(pairs.draw(rng))
    return CorrelatedPairState(float(y), (SealedBox(face), SealedBox(face)))


def prepare_shared_half_by_rotation(rng: Substream) -> CorrelatedPairState:
    """Two Heads boxes rotated through the same random number of half turns.

    Only the parity of the turn count matters, so one uniform bit is drawn.
    The bit is consumed here and never returned.
    """
    a, b = SealedBox(Face.HEADS), SealedBox(Face.HEADS)
    if rng.bit():
        a.rotate()
        b.rotate()
    return CorrelatedPairState(0.5, (a, b))


def estimate_state(boxes: Iterable[SealedBox]) -> float:
    """Open every box and return the fraction showing Heads."""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("cannot estimate a state from zero boxes")
    heads = sum(1 for box in boxes if box.open() is Face.HEADS)
    return heads / len(boxes)


def prepare_many(x, count: int, seed: int, first_trial: int = 0,
                 party: str = "charlie") -> list[SealedBox]:
    """``count`` independent direct-mode preparations, one substream each."""
    return [prepare_state(x, rng=Substream(seed, first_trial + i, party))[0]
            for i in range(count)]
