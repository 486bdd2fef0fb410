"""Assemble verification suites into a JSON report and a markdown table.

Reports contain no timings, hostnames or process details, so the same seed
and configuration always produce byte-identical files whatever ``jobs`` is.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .. import __version__
from ..classical_protocol import InvariantViolation, run_trial
from ..quantum_protocol import run_quantum_trial
from ..substreams import Substream
from ..transport.golden import CORRUPT_FRAMES, GOLDEN_FRAMES
from ..transport.session import run_networked
from ..transport.wire import ControlOp, FrameError, Message, MessageType, decode, encode
from . import checks
from .checks import (FEATURE_LETTERS, BatchMismatch, Feature, FeatureEntry, Protocol,
                     VerificationConfig)
from .stats import plugin_bias_bits

SUITES = ("correctness", "features", "transport", "all")


# comparison

def compare_protocols(config: VerificationConfig) -> dict:
    """All four features for both protocols, plus the two structural rows."""
    entries: list[FeatureEntry] = []
    for protocol in Protocol:
        entries.append(checks.feature_a_info_gap(protocol, config.precisions,
                                                 config.info_gap_trials, config.seed))
        entries.append(checks.feature_b_ignorance(protocol, config))
        entries.append(checks.feature_c_instantaneity(protocol, config))
        entries.append(checks.feature_d_erasure(protocol, config))
    entries.sort(key=lambda e: (FEATURE_LETTERS[e.feature], e.protocol.value))
    n = config.trials_per_point * len(config.feature_grid)
    bias = plugin_bias_bits(n, 2, len(config.feature_grid))
    return {
        "entries": [e.to_dict() for e in entries],
        "rows": {
            "bits_per_trial": {"Classical": 1, "Quantum": 2},
            "state_parameters": {"Classical": 1, "Quantum": 2},
            "description": {"Classical": "one real parameter: infinite information",
                            "Quantum": "two real parameters: doubly infinite information"},
        },
        "mi_threshold": {"bits": config.mi_threshold,
                         "plugin_bias_bits": bias,
                         "bias_formula": "(|O|-1)(|L|-1) / (2 N ln 2)",
                         "pooled_samples": n,
                         "headroom_factor": config.mi_threshold / bias if bias else math.inf},
        "passed": all(e.passed for e in entries),
    }


# correctness

def correctness_suite(config: VerificationConfig) -> dict:
    out: dict = {}
    try:
        results = checks.verify_classical_correctness(
            config.correctness_grid, config.trials_per_point, config.seed, config.z,
            config.crosscheck_trials, config.jobs)
        points = checks.classical_sweep(tuple(float(x) for x in config.correctness_grid),
                                        config.trials_per_point, config.seed,
                                        config.crosscheck_trials, config.jobs)
        oracle = checks.oracle_crosscheck(points, config.z)
        out["classical"] = {
            "results": [r.to_dict() for r in results],
            "trials": sum(p.trials for p in points),
            "invariant_violations": 0,
            "crosschecked_trials": sum(p.crosscheck_trials for p in points),
            "oracle": [r.to_dict() for r in oracle],
            "passed": all(r.passed for r in results) and all(r.passed for r in oracle),
        }
    except InvariantViolation as exc:
        out["classical"] = {"invariant_violations": 1, "offending_record": exc.record.to_dict(),
                            "passed": False}
    except BatchMismatch as exc:
        out["classical"] = {"batch_mismatch": str(exc), "passed": False}
    out["quantum"] = checks.verify_quantum_correctness(config.num_states, config.seed,
                                                       config.atol)
    out["estimation_and_certainty"] = checks.estimation_and_certainty_checks(
        config.seed, num_states=config.num_states)
    out["passed"] = all(v["passed"] for v in out.values())
    return out


# transport

def _generated_message(rng: Substream) -> Message:
    kind = rng.integers(4) + 1
    session = rng.next_u64()
    trial = rng.integers(1 << 32)
    if kind == MessageType.CLASSICAL_BIT:
        return Message.classical_bit(rng.integers(2), session, trial)
    if kind == MessageType.TWO_BITS:
        return Message.two_bits(rng.integers(4), session, trial)
    if kind == MessageType.BOX_TRANSFER:
        return Message.box_transfer(rng.next_u64(), rng.next_u64(), session, trial)
    op = list(ControlOp)[rng.integers(len(ControlOp))]
    body = {"n": rng.integers(1000)} if rng.bit() else None
    return Message.control(op, body, session, trial)


def frame_round_trips(seed: int, count: int) -> dict:
    failures = 0
    for i in range(count):
        message = _generated_message(Substream(seed, i, "wire"))
        if decode(encode(message)) != message:
            failures += 1
    return {"messages": count, "failures": failures, "passed": failures == 0}


def golden_fixtures() -> dict:
    golden_bad = [name for name, message, hexed in GOLDEN_FRAMES
                  if encode(message).hex() != hexed or decode(bytes.fromhex(hexed)) != message]
    corrupt_bad = []
    for name, hexed, exc_type, offset in CORRUPT_FRAMES:
        try:
            decode(bytes.fromhex(hexed))
            corrupt_bad.append(name)
        except FrameError as exc:
            if type(exc) is not exc_type or exc.offset != offset:
                corrupt_bad.append(name)
    return {"golden": len(GOLDEN_FRAMES), "golden_mismatches": golden_bad,
            "corrupt": len(CORRUPT_FRAMES), "corrupt_mismatches": corrupt_bad,
            "passed": not golden_bad and not corrupt_bad}


def networked_equivalence(config: VerificationConfig, transport: str,
                          endpoints: dict | None = None, x: float = 0.3) -> dict:
    """Networked records must equal the in-process runners trial by trial."""
    out = {}
    for protocol, setup, reference in (
            ("classical", {"x": x}, lambda t: run_trial(x, config.seed, t)),
            ("quantum", {"state": "random"},
             lambda t: run_quantum_trial(None, config.seed, t))):
        records, coordinator = run_networked(protocol, config.transport_trials, config.seed,
                                             setup, transport, endpoints)
        mismatches = [r.trial_index for r in records
                      if r.to_dict() != reference(r.trial_index).to_dict()]
        bit_type = "TWO_BITS" if protocol == "quantum" else "CLASSICAL_BIT"
        out[protocol] = {
            "trials": len(records), "mismatched_trials": mismatches[:10],
            "mismatch_count": len(mismatches),
            "alice_to_bob_frames": coordinator.frames.get(("alice", "bob", bit_type), 0),
            "bits_per_trial": sorted({r.bits_sent for r in records}),
            "passed": not mismatches and len(records) == config.transport_trials,
        }
    out["passed"] = all(v["passed"] for v in out.values())
    return out


def transport_suite(config: VerificationConfig) -> dict:
    out = {"round_trips": frame_round_trips(config.seed, config.transport_messages),
           "fixtures": golden_fixtures(),
           "inprocess": networked_equivalence(config, "inprocess"),
           "tcp_loopback": networked_equivalence(config, "tcp")}
    out["passed"] = all(v["passed"] for v in out.values())
    return out


# assembly

def build_report(suite: str, config: VerificationConfig) -> dict:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES}")
    report = {"tool": "teleportsim", "version": __version__, "suite": suite,
              "config": config.to_dict()}
    if suite in ("correctness", "all"):
        report["correctness"] = correctness_suite(config)
    if suite in ("features", "all"):
        report["features"] = compare_protocols(config)
    if suite in ("transport", "all"):
        report["transport"] = transport_suite(config)
    report["passed"] = all(report[k]["passed"] for k in ("correctness", "features", "transport")
                           if k in report)
    return report


def to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _mark(ok: bool) -> str:
    return "pass" if ok else "FAIL"


def _g(v) -> str:
    return f"{v:.3g}" if isinstance(v, float) else str(v)


def _entry_summary(entry: dict) -> str:
    m = entry["metrics"]
    feature = entry["feature"]
    if feature == Feature.INFO_GAP.value:
        text = f"{m['bits_per_trial']} bit(s)/trial at every precision"
        if "two_trials_total_bits" in m:
            text += f"; two trials = {m['two_trials_total_bits']} bits"
        return text
    if feature == Feature.IGNORANCE.value:
        if "mi_outcome_x_bits" in m:
            return (f"I(outcome;x) = {_g(m['mi_outcome_x_bits'])} bits, "
                    f"I(bit;x) = {_g(m['mi_message_bit_x_bits'])} bits")
        return f"max abs(p_k - 1/4) = {_g(m['max_outcome_deviation'])}"
    if feature == Feature.INSTANTANEITY.value:
        if "conditionals" in m:
            ok = sum(c["passed"] for c in m["conditionals"])
            z = _g(entry["threshold"]["z"])
            return (f"{ok}/{len(m['conditionals'])} conditionals within {z} sigma, "
                    f"{m['order_violations']} order violations")
        return (f"max pre-correction deficit = {_g(m['max_pre_correction_deficit'])}, "
                f"{m['order_violations']} order violations")
    if "min_p_value" in m:
        return (f"min chi-square p = {_g(m['min_p_value'])}, max I(face;x) = "
                f"{_g(max(m['mi_charlie_box_x_bits'], m['mi_pair_box_x_bits']))} bits")
    return (f"Bell-state deviation = {_g(m['max_bell_state_deviation'])}, "
            f"single-qubit deviation = {_g(m['max_single_qubit_deviation'])}")


def to_markdown(report: dict) -> str:
    cfg = report["config"]
    lines = [f"# teleportsim verification report ({report['suite']})", "",
             f"seed {cfg['seed']}, {cfg['trials_per_point']} trials per grid point, "
             f"z = {_g(cfg['z'])}, chi-square alpha = {_g(cfg['chi2_alpha'])}, "
             f"MI threshold = {_g(cfg['mi_threshold'])} bits, analytic tolerance = "
             f"{_g(cfg['atol'])}", "",
             f"Overall: **{_mark(report['passed'])}**", ""]

    if "correctness" in report:
        c = report["correctness"]
        lines += ["## Correctness", "", "| check | estimate | target | tolerance | result |",
                  "|---|---|---|---|---|"]
        classical = c["classical"]
        for r in classical.get("results", []):
            lines.append(f"| {r['label']} | {r['point_estimate']:.5f} | {_g(r['target'])} | "
                         f"{r['tolerance']:.5f} | {_mark(r['passed'])} |")
        if "offending_record" in classical:
            lines.append(f"| invariant violated | {json.dumps(classical['offending_record'])} "
                         "| | | FAIL |")
        if "oracle" in classical:
            ok = sum(r["passed"] for r in classical["oracle"])
            lines.append(f"| enumeration cross-check | {ok}/{len(classical['oracle'])} | | "
                         f"z = {_g(cfg['z'])} | {_mark(ok == len(classical['oracle']))} |")
            lines.append(f"| Bob's face = Charlie's face | {classical['trials']} trials, "
                         f"{classical['invariant_violations']} violations | 0 | exact | "
                         f"{_mark(classical['invariant_violations'] == 0)} |")
        q = c["quantum"]
        lines.append(f"| quantum fidelity deficit ({q['states']} states x 4 outcomes) | "
                     f"{_g(q['max_fidelity_deficit'])} | 0 | {_g(q['atol'])} | "
                     f"{_mark(not q['failures'])} |")
        lines.append(f"| quantum max abs(p_k - 1/4) | {_g(q['max_outcome_probability_deviation'])} "
                     f"| 0 | {_g(q['atol'])} | {_mark(q['passed'])} |")
        f = c["estimation_and_certainty"]
        lines.append(f"| RMS error ratio, M = 1000 vs 4000 | {f['rms_ratio']:.3f} | "
                     f"{_g(f['expected_ratio'])} | 20% | {_mark(f['passed'])} |")
        lines.append(f"| certain outcome: pure states / classical 0<x<1 | "
                     f"{f['pure_states_with_certain_outcome']}/{f['pure_states']} / "
                     f"{sum(f['classical_certain_outcome'].values())}/"
                     f"{len(f['classical_certain_outcome'])} | all / none | exact | "
                     f"{_mark(f['passed'])} |")
        lines.append("")

    if "features" in report:
        feat = report["features"]
        by_key = {(e["feature"], e["protocol"]): e for e in feat["entries"]}
        lines += ["## Feature correspondence", "",
                  "| feature | classical | quantum |", "|---|---|---|"]
        for feature in Feature:
            cells = []
            for protocol in Protocol:
                e = by_key[(feature.value, protocol.value)]
                cells.append(f"{_entry_summary(e)} ({e['evidence_kind']}, "
                             f"**{_mark(e['passed'])}**)")
            lines.append(f"| ({FEATURE_LETTERS[feature]}) {feature.value} | {cells[0]} | "
                         f"{cells[1]} |")
        rows = feat["rows"]
        lines.append(f"| bits per trial | {rows['bits_per_trial']['Classical']} | "
                     f"{rows['bits_per_trial']['Quantum']} |")
        lines.append(f"| state parameters | {rows['state_parameters']['Classical']} "
                     f"({rows['description']['Classical']}) | "
                     f"{rows['state_parameters']['Quantum']} "
                     f"({rows['description']['Quantum']}) |")
        mi = feat["mi_threshold"]
        passed = sum(e["passed"] for e in feat["entries"])
        lines += ["", f"{passed}/{len(feat['entries'])} feature entries pass.", "",
                  f"MI threshold {_g(mi['bits'])} bits; plug-in bias {mi['bias_formula']} = "
                  f"{_g(mi['plugin_bias_bits'])} bits at N = {mi['pooled_samples']}.", ""]

    if "transport" in report:
        t = report["transport"]
        rt, fx = t["round_trips"], t["fixtures"]
        lines += ["## Transport", "", "| check | result |", "|---|---|",
                  f"| {rt['messages']} generated frames round-trip ({rt['failures']} failures) "
                  f"| {_mark(rt['passed'])} |",
                  f"| {fx['golden']} golden frames, {fx['corrupt']} corrupt frames "
                  f"| {_mark(fx['passed'])} |"]
        for name in ("inprocess", "tcp_loopback"):
            for protocol in ("classical", "quantum"):
                r = t[name][protocol]
                lines.append(f"| {name} {protocol}: {r['trials']} trials equal to direct run, "
                             f"{r['mismatch_count']} mismatches, bits/trial "
                             f"{r['bits_per_trial']} | {_mark(r['passed'])} |")
        lines.append("")
    return "\n".join(lines)


def write_report(report: dict, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path, md_path = out / "report.json", out / "report.md"
    json_path.write_text(to_json(report), encoding="utf-8")
    md_path.write_text(to_markdown(report), encoding="utf-8")
    return json_path, md_path
