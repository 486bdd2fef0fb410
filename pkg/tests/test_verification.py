import json

import pytest

from teleportsim.verification import checks, report
from teleportsim.verification.checks import Feature, Protocol, VerificationConfig

SMALL = VerificationConfig(trials_per_point=10_000, num_states=10, info_gap_trials=20,
                           crosscheck_trials=50, transport_trials=30, transport_messages=300)


def test_correctness_rejects_small_samples():
    with pytest.raises(ValueError):
        checks.verify_classical_correctness([0.5], 100, 1)
    with pytest.raises(ValueError):
        checks.verify_quantum_correctness(0, 1)


def test_certain_states_give_exact_frequencies():
    results = checks.verify_classical_correctness([0.0, 1.0], 10_000, 9, crosscheck=10)
    assert [r.point_estimate for r in results] == [0.0, 1.0]
    assert all(r.passed for r in results)


def test_invariant_violation_is_reported_with_record(monkeypatch):
    from teleportsim import classical_protocol
    real = classical_protocol.run_batch

    def broken(*args, **kwargs):
        batch = real(*args, **kwargs)
        batch.bob_face[3] ^= 1
        return batch
    monkeypatch.setattr(checks, "run_batch", broken)
    checks.classical_sweep.cache_clear()
    with pytest.raises(classical_protocol.InvariantViolation) as info:
        checks.classical_point(0.4, 1, 0, 10_000, 0)
    assert info.value.record.trial_index == 3
    checks.classical_sweep.cache_clear()


def test_quantum_correctness_on_basis_state_outcomes():
    out = checks.verify_quantum_correctness(5, 3)
    assert out["passed"] and not out["failures"]
    assert out["max_fidelity_deficit"] <= 1e-12


@pytest.mark.parametrize("protocol,bits", [(Protocol.CLASSICAL, 1), (Protocol.QUANTUM, 2)])
def test_info_gap_bits_constant(protocol, bits):
    entry = checks.feature_a_info_gap(protocol, (1, 3, 6, 12), 10, 5)
    assert entry.passed and entry.metrics["bits_per_trial"] == bits
    assert [r["bits_per_trial"] for r in entry.metrics["by_precision"]] == [[bits]] * 4
    assert entry.metrics["parameters"] == bits
    if protocol is Protocol.CLASSICAL:
        assert entry.metrics["two_trials_total_bits"] == 2


@pytest.mark.parametrize("fn", [checks.feature_b_ignorance, checks.feature_c_instantaneity,
                                checks.feature_d_erasure])
@pytest.mark.parametrize("protocol", list(Protocol))
def test_features_pass_on_small_config(fn, protocol):
    entry = fn(protocol, SMALL)
    assert entry.passed, entry.metrics
    assert entry.evidence_kind == ("statistical" if protocol is Protocol.CLASSICAL
                                   else "analytic")


def test_comparison_has_all_eight_entries():
    out = report.compare_protocols(SMALL)
    keys = {(e["feature"], e["protocol"]) for e in out["entries"]}
    assert keys == {(f.value, p.value) for f in Feature for p in Protocol}
    assert out["rows"]["bits_per_trial"] == {"Classical": 1, "Quantum": 2}
    assert out["rows"]["state_parameters"] == {"Classical": 1, "Quantum": 2}
    assert out["passed"]


def test_report_files_are_deterministic(tmp_path):
    a = report.build_report("all", SMALL)
    b = report.build_report("all", VerificationConfig(**{**SMALL.__dict__, "jobs": 2}))
    assert report.to_json(a) == report.to_json(b)
    json_path, md_path = report.write_report(a, tmp_path)
    loaded = json.loads(json_path.read_text())
    assert loaded["passed"] and "jobs" not in loaded["config"]
    assert "| (a) InfoGap |" in md_path.read_text()


def test_unknown_suite():
    with pytest.raises(ValueError):
        report.build_report("nonsense", SMALL)


def test_estimation_and_certainty_checks():
    out = checks.estimation_and_certainty_checks(1, repetitions=400)
    assert out["passed"]
    assert abs(out["rms_ratio"] - 2) <= 0.4
