import pytest
from hypothesis import given
from hypothesis import strategies as st

from teleportsim.classical_protocol import (BobCorrection, ClassicalOutcome, InvariantViolation,
                                            MeasurementDevice, TrialRecord, bob_correction_for,
                                            run_batch, run_trial, step1_distribute,
                                            step2_charlie_prepare, step3_alice_measure,
                                            step4_send_bit, step5_bob_correct)
from teleportsim.epistemic_state import (Face, PreparationMode, SealedBox, SealedBoxError,
                                         hidden_face)
from teleportsim.substreams import Substream
from teleportsim.transport.channel import Channel
from teleportsim.verification import oracle

probs = st.floats(0, 1, allow_nan=False)


def test_corrections_follow_outcome():
    assert bob_correction_for(ClassicalOutcome.SAME) is BobCorrection.IDENTITY
    assert bob_correction_for(ClassicalOutcome.DIFFERENT) is BobCorrection.ROTATE


@pytest.mark.parametrize("a,b,parity,expected", [
    (Face.HEADS, Face.HEADS, 0, ClassicalOutcome.SAME),
    (Face.HEADS, Face.HEADS, 1, ClassicalOutcome.SAME),
    (Face.HEADS, Face.TAILS, 0, ClassicalOutcome.DIFFERENT),
    (Face.TAILS, Face.HEADS, 1, ClassicalOutcome.DIFFERENT),
])
def test_device_compares_faces_after_common_rotation(a, b, parity, expected):
    # find a device substream with the wanted parity bit
    t = next(t for t in range(100) if Substream(0, t, "device").bit() == parity)
    box_a, box_b = SealedBox(a), SealedBox(b)
    assert MeasurementDevice(Substream(0, t, "device")).measure(box_a, box_b) is expected
    assert not box_a.sealed and not box_b.sealed
    assert box_a.face is (a.flip() if parity else a)


def test_device_refuses_opened_boxes():
    a, b = SealedBox(Face.HEADS), SealedBox(Face.HEADS)
    a.open()
    with pytest.raises(SealedBoxError):
        MeasurementDevice(Substream(0, 0, "device")).measure(a, b)


def test_steps_compose_into_a_faithful_trial():
    channel = Channel()
    alice_box, bob_box = step1_distribute(Substream(1, 0, "source"))
    assert hidden_face(alice_box) is hidden_face(bob_box)
    charlie_box, state = step2_charlie_prepare(0.7, Substream(1, 0, "charlie"))
    outcome = step3_alice_measure(alice_box, charlie_box, MeasurementDevice(
        Substream(1, 0, "device")))
    step4_send_bit(outcome, channel, 0)
    received = ClassicalOutcome(channel.recv("bob", "alice").value)
    step5_bob_correct(bob_box, received)
    assert bob_box.sealed
    assert channel.semantic_bits("alice", "bob") == 1
    assert state.x == 0.7


@given(probs, st.integers(0, 2**32), st.integers(0, 2**20))
def test_bob_always_ends_with_charlies_face(x, seed, t):
    record = run_trial(x, seed, t)
    assert record.truth_bob_face is record.truth_charlie_face
    assert record.bits_sent == 1


@given(st.integers(0, 1000).map(lambda n: n / 1000), st.integers(0, 2**32),
       st.integers(0, 2**20))
def test_ensemble_mode_is_also_faithful(x, seed, t):
    record = run_trial(x, seed, t, mode=PreparationMode.ENSEMBLE)
    assert record.invariant_holds


@given(probs, st.integers(0, 2**32), st.integers(0, 2**20))
def test_record_agrees_with_enumerated_branch(x, seed, t):
    r = run_trial(x, seed, t)
    parity = Substream(seed, t, "device").bit()
    branch = next(b for b in oracle.branches(0.5)
                  if b.charlie == r.truth_charlie_face.name[0]
                  and b.pair == r.truth_pair_face.name[0] and b.parity == parity)
    assert branch.outcome == r.outcome.label.lower()
    assert branch.opened == tuple(f.name[0] for f in r.truth_alice_faces)
    assert branch.bob_before == r.truth_bob_face_at_measure.name[0]
    assert branch.bob_after == r.truth_bob_face.name[0]


def test_event_order_and_before_send_snapshot():
    r = run_trial(0.3, 42, 0)
    assert r.event_order == ("distribute", "prepare", "measure", "send", "correct", "done")
    assert r.tick("measure") < r.tick("send") < r.tick("correct")
    expected_before = (r.truth_charlie_face if r.outcome is ClassicalOutcome.SAME
                       else r.truth_charlie_face.flip())
    assert r.truth_bob_face_at_measure is expected_before


def test_record_serializes_with_truth_prefix():
    d = run_trial(0.3, 42, 5).to_dict()
    assert {"trial_index", "x", "outcome", "bits_sent", "correction", "event_order"} <= set(d)
    hidden = {k for k in d if "face" in k}
    assert hidden and all(k.startswith("truth_") for k in hidden)


def test_invariant_violation_carries_record():
    good = run_trial(0.3, 1, 0)
    bad = TrialRecord(**{**good.__dict__, "truth_bob_face": good.truth_charlie_face.flip()})
    err = InvariantViolation(bad)
    assert err.record is bad and not bad.invariant_holds


def test_run_trial_reproducible_from_seed():
    assert run_trial(0.3, 42, 17) == run_trial(0.3, 42, 17)


@given(probs, st.integers(0, 2**32), st.integers(0, 2**30), st.integers(1, 40))
def test_batch_matches_per_trial_runner(x, seed, first, count):
    batch = run_batch(x, seed, count, first)
    assert batch.violations.size == 0
    for i, record in enumerate(batch.records()):
        assert record == run_trial(x, seed, first + i)


def test_batch_at_certain_states():
    assert run_batch(1.0, 3, 1000).bob_heads == 1000
    assert run_batch(0.0, 3, 1000).bob_heads == 0
