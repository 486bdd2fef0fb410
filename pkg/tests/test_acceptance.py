"""One test per acceptance criterion, each printing a single pass/fail line."""

import subprocess
import sys
import time
from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES
from teleportsim.classical_protocol import run_trial
from teleportsim.epistemic_state import PreparationMode
from teleportsim.verification import checks, report
from teleportsim.verification.checks import Protocol, VerificationConfig

SEED = 42
CONFIG = VerificationConfig(seed=SEED)


@pytest.fixture
def announce(capsys):
    def emit(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line
    return emit


def test_criterion_1_classical_correctness(announce):
    checks.classical_sweep.cache_clear()
    start = time.perf_counter()
    results = checks.verify_classical_correctness(
        (0, 0.25, 0.3, 0.5, 0.75, 1), 100_000, SEED, z=3, crosscheck=CONFIG.crosscheck_trials)
    elapsed = time.perf_counter() - start
    # x = 0 and x = 1 must match exactly; elsewhere report |p - x| in tolerance units
    worst = max(abs(r.point_estimate - r.target) / r.tolerance for r in results if r.tolerance)
    announce(1, all(r.passed for r in results) and elapsed < 10,
             f"6 x 10^5 trials within x +/- 3 sigma (largest |p - x| is {worst:.2f} of the "
             f"tolerance; x=0 and x=1 exact), {elapsed:.2f} s < 10 s")


def test_criterion_2_classical_determinism(announce):
    violations = trials = 0
    for grid in (CONFIG.correctness_grid, CONFIG.feature_grid):
        for p in checks.classical_sweep(tuple(float(x) for x in grid), 100_000, SEED,
                                        CONFIG.crosscheck_trials, 1):
            violations += p.violations
            trials += p.trials
    for mode in PreparationMode:
        for t in range(2000):
            trials += 1
            violations += not run_trial(0.3, SEED, t, mode=mode).invariant_holds
    announce(2, violations == 0,
             f"Bob's final face equals Charlie's in {trials - violations}/{trials} trials")


def test_criterion_3_quantum_exactness(announce):
    start = time.perf_counter()
    out = checks.verify_quantum_correctness(100, SEED)
    elapsed = time.perf_counter() - start
    announce(3, out["passed"] and elapsed < 1,
             f"max fidelity deficit {out['max_fidelity_deficit']:.2e}, max |p - 1/4| "
             f"{out['max_outcome_probability_deviation']:.2e}, {elapsed:.2f} s < 1 s")


def test_criterion_4_info_gap(announce):
    entries = [checks.feature_a_info_gap(p, (1, 3, 6, 12), CONFIG.info_gap_trials, SEED)
               for p in Protocol]
    c, q = entries
    ok = (all(e.passed for e in entries) and c.metrics["bits_per_trial"] == 1
          and q.metrics["bits_per_trial"] == 2 and c.metrics["two_trials_total_bits"] == 2)
    announce(4, ok, f"bits/trial classical {c.metrics['bits_per_trial']}, quantum "
                    f"{q.metrics['bits_per_trial']} at 1/3/6/12 digits; two classical "
                    f"trials {c.metrics['two_trials_total_bits']} bits")


def test_criterion_5_ignorance(announce):
    c = checks.feature_b_ignorance(Protocol.CLASSICAL, CONFIG)
    q = checks.feature_b_ignorance(Protocol.QUANTUM, CONFIG)
    announce(5, c.passed and q.passed,
             f"MI(outcome;x) {c.metrics['mi_outcome_x_bits']:.2e}, MI(bit;x) "
             f"{c.metrics['mi_message_bit_x_bits']:.2e} <= 0.01 bits; quantum max deviation "
             f"{q.metrics['max_outcome_deviation']:.2e}")


def test_criterion_6_instantaneity(announce):
    c = checks.feature_c_instantaneity(Protocol.CLASSICAL, CONFIG)
    q = checks.feature_c_instantaneity(Protocol.QUANTUM, CONFIG)
    n_ok = sum(r["passed"] for r in c.metrics["conditionals"])
    announce(6, c.passed and q.passed,
             f"{n_ok}/{len(c.metrics['conditionals'])} classical conditionals within 3 sigma; "
             f"quantum pre-correction deficit {q.metrics['max_pre_correction_deficit']:.2e}; "
             f"order violations {c.metrics['order_violations'] + q.metrics['order_violations']}")


def test_criterion_7_erasure(announce):
    c = checks.feature_d_erasure(Protocol.CLASSICAL, CONFIG)
    q = checks.feature_d_erasure(Protocol.QUANTUM, CONFIG)
    announce(7, c.passed and q.passed,
             f"min chi-square p {c.metrics['min_p_value']:.4f} > 0.001; quantum Bell deviation "
             f"{q.metrics['max_bell_state_deviation']:.2e}, single-qubit deviation "
             f"{q.metrics['max_single_qubit_deviation']:.2e}")


def test_criterion_8_estimation_and_certainty_checks(announce):
    out = checks.estimation_and_certainty_checks(SEED)
    announce(8, out["passed"],
             f"RMS ratio M=1000/M=4000 {out['rms_ratio']:.3f} (2 +/- 20%); certain outcome for "
             f"{out['pure_states_with_certain_outcome']}/100 pure states and "
             f"{sum(out['classical_certain_outcome'].values())}/3 classical states")


def _start_server(role):
    proc = subprocess.Popen([sys.executable, "-m", "teleportsim", "serve", "--role", role],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    line = proc.stdout.readline()
    return proc, line.split()[-1]


def test_criterion_9_transport_equivalence(announce, tmp_path):
    servers = {role: _start_server(role) for role in ("alice", "bob", "charlie")}
    try:
        args = [f"--{role}={addr}" for role, (_, addr) in servers.items()]
        tcp = subprocess.run([sys.executable, "-m", "teleportsim", "run", "classical",
                              "--x", "0.3", "--trials", "1000", "--seed", str(SEED),
                              "--transport", "tcp", *args, "--log", str(tmp_path / "tcp")],
                             capture_output=True, text=True, timeout=120)
        codes = [proc.wait(timeout=30) for proc, _ in servers.values()]
    finally:
        for proc, _ in servers.values():
            if proc.poll() is None:
                proc.kill()
    local = subprocess.run([sys.executable, "-m", "teleportsim", "run", "classical",
                            "--x", "0.3", "--trials", "1000", "--seed", str(SEED),
                            "--log", str(tmp_path / "local")],
                           capture_output=True, text=True, timeout=120)
    tcp_lines = (tmp_path / "tcp").read_text().splitlines()
    same = tcp_lines == (tmp_path / "local").read_text().splitlines()
    trips = report.frame_round_trips(SEED, 10_000)
    fixtures = report.golden_fixtures()
    ok = (tcp.returncode == 0 and local.returncode == 0 and codes == [0, 0, 0] and same
          and len(tcp_lines) == 1000 and trips["passed"] and fixtures["passed"])
    announce(9, ok, f"3 serve processes + tcp driver: {len(tcp_lines)} records "
                    f"{'identical' if same else 'DIFFERENT'} to in-process, servers exited "
                    f"{codes}; {trips['messages']} round trips, {trips['failures']} failures; "
                    f"{fixtures['golden']} golden + {fixtures['corrupt']} corrupt fixtures "
                    f"{'match' if fixtures['passed'] else 'MISMATCH'}")


def test_criterion_10_reproducibility(announce, tmp_path):
    outputs = []
    for name, extra in (("first", []), ("second", []), ("parallel", ["--jobs", "2"])):
        proc = subprocess.run([sys.executable, "-m", "teleportsim", "verify", "--suite", "all",
                               "--seed", str(SEED), "--out", str(tmp_path / name), *extra],
                              capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, proc.stderr
        outputs.append(tuple(Path(tmp_path / name / f).read_bytes()
                             for f in ("report.json", "report.md")))
    identical = outputs[0] == outputs[1] == outputs[2]
    verdict = "byte-identical" if identical else "DIFFER"
    announce(10, identical, "verify --suite all --seed 42 run twice and with --jobs 2: "
                            f"report.json and report.md {verdict}")
