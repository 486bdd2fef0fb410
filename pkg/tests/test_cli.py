import json
import subprocess
import sys

import pytest

from teleportsim.cli import main, parse_endpoint, parse_state, UsageError


def run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "teleportsim", *args], capture_output=True,
                          text=True, timeout=300, env=env)


def test_run_classical_certain_state(capsys):
    assert main(["run", "classical", "--x", "1", "--trials", "100"]) == 0
    out, err = capsys.readouterr()
    lines = [json.loads(line) for line in out.splitlines()]
    assert len(lines) == 100 and all(r["truth_bob_face"] == "Heads" for r in lines)
    assert "frequency: 1.000000" in err and "bits/trial: 1" in err


def test_run_log_fields(capsys):
    assert main(["run", "classical", "--x", "0.3", "--trials", "5", "--seed", "4"]) == 0
    record = json.loads(capsys.readouterr().out.splitlines()[0])
    for key in ("trial_index", "x", "outcome", "bits_sent", "correction", "event_order",
                "truth_charlie_face", "truth_bob_face"):
        assert key in record


def test_run_quantum_random(tmp_path, capsys):
    log = tmp_path / "q.ndjson"
    assert main(["run", "quantum", "--state", "random", "--trials", "50", "--seed", "7",
                 "--log", str(log)]) == 0
    assert len(log.read_text().splitlines()) == 50
    assert "bits/trial: 2" in capsys.readouterr().err


def test_state_parsing():
    assert parse_state(["random"]) is None
    psi = parse_state(["0.6", "0", "0.8000001", "0"])
    assert abs(abs(psi.alpha) ** 2 + abs(psi.beta) ** 2 - 1) < 1e-12
    with pytest.raises(UsageError):
        parse_state(["0.6", "0", "0.9", "0"])
    with pytest.raises(UsageError):
        parse_state(["1", "0"])
    assert parse_endpoint("localhost:9000") == ("localhost", 9000)
    with pytest.raises(UsageError):
        parse_endpoint("nohost")


@pytest.mark.parametrize("argv", [
    ["run", "classical"],
    ["run", "classical", "--x", "1.5"],
    ["run", "quantum", "--x", "0.5"],
    ["run", "quantum", "--state", "2", "0", "0", "0"],
    ["run", "classical", "--x", "0.5", "--trials", "0"],
    ["run", "classical", "--x", "0.5", "--transport", "tcp", "--alice", "h:1"],
    ["verify", "--suite", "bogus"],
    ["verify", "--trials", "10"],
    ["serve", "--role", "eve"],
    ["launch"],
])
def test_usage_errors_exit_2(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_seed_from_environment():
    env = {"TELEPORTSIM_SEED": "42", "PATH": ""}
    a = run_cli("run", "classical", "--x", "0.3", "--trials", "20", env=env)
    b = run_cli("run", "classical", "--x", "0.3", "--trials", "20", "--seed", "42")
    assert a.returncode == 0 and a.stdout == b.stdout


def test_tcp_run_without_endpoints_hosts_locally():
    tcp = run_cli("run", "classical", "--x", "0.3", "--trials", "50", "--seed", "42",
                  "--transport", "tcp")
    local = run_cli("run", "classical", "--x", "0.3", "--trials", "50", "--seed", "42")
    assert tcp.returncode == 0 and tcp.stdout == local.stdout


def test_verify_writes_reports(tmp_path):
    proc = run_cli("verify", "--suite", "transport", "--seed", "3", "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["suite"] == "transport" and data["passed"]
    assert (tmp_path / "report.md").read_text().startswith("# teleportsim verification report")
