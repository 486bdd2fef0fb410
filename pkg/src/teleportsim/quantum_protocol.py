"""State-vector teleportation of one qubit over a (charlie, alice, bob) register.

Qubit order is big-endian: basis index ``4*c + 2*a + b`` for the charlie,
alice and bob bits. States are compared up to global phase throughout
(through ``fidelity``), since the corrections leave outcome-dependent phases.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .epistemic_state import ClassicalState
from .events import EventLog, events_to_dicts
from .substreams import Substream
from .transport.channel import Channel
from .transport.wire import Message, MessageType

ATOL = 1e-12
"""Shared tolerance for every exactness claim in double precision."""

LABELS = ("charlie", "alice", "bob")

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
_S = 1 / math.sqrt(2)


class QuantumStateError(ValueError):
    pass


class BellOutcome(enum.Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"

    @property
    def bits(self) -> tuple[int, int]:
        """(x_needed, z_needed): the two bits Alice sends."""
        return (int(self in (BellOutcome.PSI_PLUS, BellOutcome.PSI_MINUS)),
                int(self in (BellOutcome.PHI_MINUS, BellOutcome.PSI_MINUS)))

    @property
    def wire_value(self) -> int:
        x_bit, z_bit = self.bits
        return x_bit | (z_bit << 1)

    @classmethod
    def from_bits(cls, x_bit: int, z_bit: int) -> "BellOutcome":
        return _FROM_BITS[(x_bit, z_bit)]

    @classmethod
    def from_wire(cls, value: int) -> "BellOutcome":
        if value not in (0, 1, 2, 3):
            raise ValueError(f"two-bit payload out of range: {value}")
        return cls.from_bits(value & 1, value >> 1)

    @property
    def vector(self) -> np.ndarray:
        return _BELL_VECTORS[self]


_FROM_BITS = {o.bits: o for o in BellOutcome}

# Order fixed so sampling is reproducible.
BELL_ORDER = (BellOutcome.PHI_PLUS, BellOutcome.PHI_MINUS,
              BellOutcome.PSI_PLUS, BellOutcome.PSI_MINUS)

_BELL_VECTORS = {
    BellOutcome.PHI_PLUS: np.array([_S, 0, 0, _S], dtype=complex),
    BellOutcome.PHI_MINUS: np.array([_S, 0, 0, -_S], dtype=complex),
    BellOutcome.PSI_PLUS: np.array([0, _S, _S, 0], dtype=complex),
    BellOutcome.PSI_MINUS: np.array([0, _S, -_S, 0], dtype=complex),
}


class Correction(enum.Enum):
    IDENTITY = "Identity"
    FLIP_X = "FlipX"
    PHASE_Z = "PhaseZ"
    FLIP_X_PHASE_Z = "FlipXPhaseZ"

    @property
    def matrix(self) -> np.ndarray:
        return _CORRECTION_MATRICES[self]


_CORRECTION_MATRICES = {
    Correction.IDENTITY: I2,
    Correction.FLIP_X: X,
    Correction.PHASE_Z: Z,
    Correction.FLIP_X_PHASE_Z: X @ Z,
}

# Convention: PhiPlus is the do-nothing case.
CORRECTION_TABLE = {
    BellOutcome.PHI_PLUS: Correction.IDENTITY,
    BellOutcome.PSI_PLUS: Correction.FLIP_X,
    BellOutcome.PHI_MINUS: Correction.PHASE_Z,
    BellOutcome.PSI_MINUS: Correction.FLIP_X_PHASE_Z,
}


def correction_for(outcome: BellOutcome) -> Correction:
    return CORRECTION_TABLE[outcome]


def pre_correction_transform(outcome: BellOutcome) -> np.ndarray:
    """The known unitary relating Bob's qubit to psi right after measurement."""
    return np.linalg.inv(correction_for(outcome).matrix)


@dataclass(frozen=True)
class PureState:
    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1) > ATOL:
            raise QuantumStateError(f"state not normalized: |a|^2+|b|^2 = {norm!r}")

    @classmethod
    def from_vector(cls, vec) -> "PureState":
        vec = np.asarray(vec, dtype=complex)
        return cls(complex(vec[0]), complex(vec[1]))

    @classmethod
    def normalized(cls, alpha, beta) -> "PureState":
        norm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        if norm == 0:
            raise QuantumStateError("zero vector has no direction")
        return cls(complex(alpha) / norm, complex(beta) / norm)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    def bloch(self) -> np.ndarray:
        a, b = self.alpha, self.beta
        ab = a.conjugate() * b
        return np.array([2 * ab.real, 2 * ab.imag, abs(a) ** 2 - abs(b) ** 2])


ZERO = PureState(1, 0)
ONE = PureState(0, 1)
PLUS = PureState(_S, _S)


@dataclass(frozen=True)
class RegisterState:
    amplitudes: np.ndarray
    labels: tuple[str, ...] = field(default=LABELS)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2 ** len(self.labels),):
            raise QuantumStateError(
                f"{len(self.labels)} qubits need {2 ** len(self.labels)} amplitudes, "
                f"got shape {amps.shape}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1) > ATOL:
            raise QuantumStateError(f"register not normalized: {norm!r}")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)


def norm(state: RegisterState | PureState) -> float:
    v = state.amplitudes if isinstance(state, RegisterState) else state.vector
    return float(np.sqrt(np.vdot(v, v).real))


def prepare_epr() -> RegisterState:
    """(|00> + |11>)/sqrt(2) on (alice, bob)."""
    return RegisterState(BellOutcome.PHI_PLUS.vector.copy(), ("alice", "bob"))


def random_pure_state(rng: Substream) -> PureState:
    """Haar-random qubit: a uniform point on the Bloch sphere."""
    cos_theta = 1.0 - 2.0 * rng.random()
    phi = 2.0 * math.pi * rng.random()
    theta = math.acos(cos_theta)
    return PureState.normalized(math.cos(theta / 2),
                                complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2))


def compose(psi: PureState, epr: RegisterState) -> RegisterState:
    """Charlie's qubit joins the EPR pair: psi (x) epr in (charlie, alice, bob)."""
    return RegisterState(np.kron(psi.vector, epr.amplitudes),
                         ("charlie",) + tuple(epr.labels))


def _bob_component(state: RegisterState, outcome: BellOutcome) -> np.ndarray:
    """Unnormalized bob vector after projecting (charlie, alice) onto ``outcome``."""
    if state.labels != LABELS:
        raise QuantumStateError(f"expected a {LABELS} register, got {state.labels}")
    ca_b = state.amplitudes.reshape(4, 2)
    return outcome.vector.conj() @ ca_b


def bell_probabilities(state: RegisterState) -> dict[BellOutcome, float]:
    """Born probabilities of the four Bell outcomes, from projection norms."""
    out = {}
    for outcome in BELL_ORDER:
        v = _bob_component(state, outcome)
        out[outcome] = float(np.vdot(v, v).real)
    return out


def project_bell(state: RegisterState, outcome: BellOutcome) -> RegisterState:
    """Post-measurement register: Bell state on (charlie, alice), bob collapsed."""
    bob = _bob_component(state, outcome)
    p = float(np.vdot(bob, bob).real)
    if p < ATOL:
        raise QuantumStateError(f"outcome {outcome.value} has zero probability")
    return RegisterState(np.kron(outcome.vector, bob / math.sqrt(p)), state.labels)


def bell_measure(state: RegisterState, rng: Substream | None = None,
                 force: BellOutcome | None = None) -> tuple[BellOutcome, PureState]:
    """Bell measurement of (charlie, alice).

    The outcome is sampled from the Born rule with ``rng`` unless ``force``
    picks it. Returns the outcome and Bob's normalized qubit.
    """
    if abs(norm(state) - 1) > ATOL:
        raise QuantumStateError("register not normalized")
    probs = bell_probabilities(state)
    if force is None:
        if rng is None:
            raise ValueError("bell_measure needs a substream or a forced outcome")
        u = rng.random()
        acc = 0.0
        outcome = BELL_ORDER[-1]
        for candidate in BELL_ORDER:
            acc += probs[candidate]
            if u < acc:
                outcome = candidate
                break
    else:
        outcome = force
    if probs[outcome] < ATOL:
        raise QuantumStateError(f"sampled zero-probability outcome {outcome.value}")
    bob = _bob_component(state, outcome)
    return outcome, PureState.from_vector(bob / math.sqrt(probs[outcome]))


def apply_correction(bob_state: PureState, outcome: BellOutcome) -> PureState:
    return PureState.from_vector(correction_for(outcome).matrix @ bob_state.vector)


def apply_unitary(u: np.ndarray, state: PureState) -> PureState:
    return PureState.from_vector(u @ state.vector)


def fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|^2, clipped to [0, 1]."""
    f = abs(np.vdot(a.vector, b.vector)) ** 2
    return float(min(1.0, max(0.0, f)))


def reduced_density(state: RegisterState, keep) -> np.ndarray:
    """Partial trace keeping one label or a tuple of labels (in that order)."""
    keep = (keep,) if isinstance(keep, str) else tuple(keep)
    unknown = set(keep) - set(state.labels)
    if unknown:
        raise QuantumStateError(f"no qubit labelled {sorted(unknown)}")
    n = state.num_qubits
    kept_axes = [state.labels.index(k) for k in keep]
    traced = [i for i in range(n) if i not in kept_axes]
    psi = np.transpose(state.tensor(), kept_axes + traced)
    psi = psi.reshape(2 ** len(kept_axes), 2 ** len(traced))
    return psi @ psi.conj().T


def deterministic_observable_exists(state: PureState | ClassicalState) -> bool:
    """Is there a measurement whose outcome can be predicted with certainty?

    For a pure qubit the projector onto the state itself always works. A
    classical |x> can only be examined by opening the box, which is certain
    only when x is 0 or 1; otherwise |x> acts like the mixed state
    diag(x, 1 - x), which has no such measurement either.
    """
    if isinstance(state, PureState):
        v = state.vector
        projector = np.outer(v, v.conj())
        return abs(float(np.vdot(v, projector @ v).real) - 1.0) <= ATOL
    if isinstance(state, ClassicalState):
        rho = np.diag([state.x, 1 - state.x])
        # Certainty needs a rank-one density matrix.
        return bool(np.isclose(np.max(np.linalg.eigvalsh(rho)), 1.0, atol=ATOL, rtol=0))
    raise TypeError(f"not a state: {type(state).__name__}")


@dataclass(frozen=True)
class QuantumTrialRecord:
    """One quantum trial. ``truth_*`` fields are verification-only."""

    trial_index: int
    outcome: BellOutcome
    bits_sent: int
    correction: Correction
    events: tuple
    truth_psi: PureState
    truth_bob_before_correction: PureState
    truth_bob_final: PureState
    fidelity: float

    @property
    def event_order(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.events)

    def tick(self, name: str) -> int:
        for e in self.events:
            if e.name == name:
                return e.tick
        raise KeyError(f"no {name!r} event in trial {self.trial_index}")

    def to_dict(self) -> dict:
        def amps(s: PureState):
            return [[s.alpha.real, s.alpha.imag], [s.beta.real, s.beta.imag]]

        return {
            "trial_index": self.trial_index,
            "protocol": "quantum",
            "outcome": self.outcome.value,
            "bits_sent": self.bits_sent,
            "correction": self.correction.value,
            "event_order": events_to_dicts(self.events),
            "truth_psi": amps(self.truth_psi),
            "truth_bob_before_correction": amps(self.truth_bob_before_correction),
            "truth_bob_final": amps(self.truth_bob_final),
            "fidelity": self.fidelity,
        }


def run_quantum_trial(psi: PureState | None, seed: int, trial_index: int,
                      channel: Channel | None = None, force: BellOutcome | None = None,
                      session_id: int = 0) -> QuantumTrialRecord:
    """Teleport ``psi`` (Haar-random from Charlie's substream when None)."""
    own_channel = channel is None
    if own_channel:
        channel = Channel()
    log = EventLog()
    try:
        epr = prepare_epr()
        log.emit("distribute")
        if psi is None:
            psi = random_pure_state(Substream(seed, trial_index, "charlie"))
        register = compose(psi, epr)
        log.emit("prepare")
        outcome, bob = bell_measure(register, Substream(seed, trial_index, "device"), force)
        log.emit("measure")
        channel.send("alice", "bob", Message.two_bits(outcome.wire_value, session_id,
                                                      trial_index))
        log.emit("send")
        received = channel.recv("bob", "alice")
        if received.msg_type is not MessageType.TWO_BITS:
            raise RuntimeError(f"Bob expected TwoBits, got {received.msg_type.name}")
        bob_outcome = BellOutcome.from_wire(received.value)
        final = apply_correction(bob, bob_outcome)
        log.emit("correct")
        log.emit("done")
        return QuantumTrialRecord(
            trial_index=trial_index,
            outcome=outcome,
            bits_sent=channel.semantic_bits("alice", "bob", trial_index),
            correction=correction_for(bob_outcome),
            events=tuple(log.events),
            truth_psi=psi,
            truth_bob_before_correction=bob,
            truth_bob_final=final,
            fidelity=fidelity(psi, final),
        )
    finally:
        if own_channel:
            channel.close()
