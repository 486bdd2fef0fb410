"""Command-line driver: run trials, run verification suites, host a party.

Exit codes: 0 success, 1 invariant or verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from contextlib import contextmanager

from .classical_protocol import InvariantViolation, run_batch, run_trial
from .epistemic_state import PreparationMode, check_probability
from .quantum_protocol import ATOL, PureState, run_quantum_trial
from .transport.coordinator import HandshakeRejected, TrialAborted
from .transport.parties import ROLES, serve_party
from .transport.session import run_networked
from .verification.checks import VerificationConfig
from .verification.report import SUITES, build_report, to_markdown, write_report
from .verification.stats import check_frequency

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
NORMALIZE_LIMIT = 1e-6
DEFAULT_TRIALS = 100_000

log = logging.getLogger("teleportsim")


class UsageError(ValueError):
    pass


# argument helpers

def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"{name}={raw!r} is not an integer") from None


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise UsageError(f"endpoint {text!r} is not host:port")
    return host, int(port)


def parse_state(values: list[str]) -> PureState | None:
    """``["random"]`` or four reals (Re a, Im a, Re b, Im b)."""
    if values == ["random"]:
        return None
    if len(values) != 4:
        raise UsageError("--state takes 'random' or four reals: Re(a) Im(a) Re(b) Im(b)")
    try:
        a_re, a_im, b_re, b_im = (float(v) for v in values)
    except ValueError:
        raise UsageError(f"--state values must be numbers, got {values}") from None
    alpha, beta = complex(a_re, a_im), complex(b_re, b_im)
    norm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
    if not math.isfinite(norm) or abs(norm - 1.0) >= NORMALIZE_LIMIT:
        raise UsageError(f"state norm {norm} is not within {NORMALIZE_LIMIT} of 1")
    if abs(norm - 1.0) > ATOL:
        log.warning("state norm %.12g differs from 1; normalizing", norm)
    return PureState.normalized(alpha, beta)


def _endpoints(args) -> dict | None:
    given = {}
    for role in ROLES:
        text = getattr(args, role) or os.environ.get(f"TELEPORTSIM_{role.upper()}")
        if text:
            given[role] = parse_endpoint(text)
    if not given:
        return None
    missing = [r for r in ROLES if r not in given]
    if missing:
        raise UsageError(f"tcp transport needs all three endpoints; missing {missing}")
    return given


@contextmanager
def _log_sink(path: str):
    if path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _emit(sink, record) -> None:
    sink.write(json.dumps(record.to_dict(), separators=(",", ":")) + "\n")


# commands

def cmd_run(args) -> int:
    seed = args.seed if args.seed is not None else _env_int("TELEPORTSIM_SEED", 0)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    mode = PreparationMode(args.mode)
    if args.protocol == "classical":
        if args.x is None:
            raise UsageError("run classical needs --x")
        if args.state is not None:
            raise UsageError("--state applies to the quantum protocol")
        try:
            check_probability(args.x)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        psi = None
    else:
        if args.x is not None:
            raise UsageError("--x applies to the classical protocol")
        psi = parse_state(args.state or ["random"])

    endpoints = _endpoints(args) if args.transport == "tcp" else None
    with _log_sink(args.log) as sink:
        try:
            records = _run_records(args, seed, mode, psi, endpoints)
            summary = (_classical_summary if args.protocol == "classical"
                       else _quantum_summary)(records, sink, args)
        except InvariantViolation as exc:
            _emit(sink, exc.record)
            print(f"invariant violated: {json.dumps(exc.record.to_dict())}", file=sys.stderr)
            return EXIT_FAILURE
    print(summary["text"], file=sys.stderr)
    return EXIT_OK if summary["ok"] else EXIT_FAILURE


def _run_records(args, seed, mode, psi, endpoints):
    """An iterable of trial records for the requested protocol and transport."""
    if args.transport == "tcp":
        if endpoints is None:
            log.warning("no endpoints given; hosting all three parties on loopback")
        config = ({"x": args.x} if args.protocol == "classical" else
                  {"state": "random" if psi is None else
                   [psi.alpha.real, psi.alpha.imag, psi.beta.real, psi.beta.imag]})
        records, _ = run_networked(args.protocol, args.trials, seed, config, "tcp",
                                   endpoints, mode)
        return records
    if args.protocol == "quantum":
        return (run_quantum_trial(psi, seed, t) for t in range(args.trials))
    if mode is PreparationMode.DIRECT:
        batch = run_batch(args.x, seed, args.trials)
        bad = batch.violations
        if bad.size:
            raise InvariantViolation(batch.record(int(bad[0])))
        return batch.records()
    return (run_trial(args.x, seed, t, mode=mode) for t in range(args.trials))


def _classical_summary(records, sink, args) -> dict:
    n = heads = violations = 0
    bits = set()
    for record in records:
        _emit(sink, record)
        n += 1
        heads += record.truth_bob_face.name == "HEADS"
        violations += not record.invariant_holds
        bits.add(record.bits_sent)
    result = check_frequency(heads, n, args.x, args.z)
    text = "\n".join([
        f"trials: {n}",
        f"Bob Heads frequency: {result.point_estimate:.6f} "
        f"(CI [{result.ci_low:.6f}, {result.ci_high:.6f}] at z={args.z:g}; "
        f"target {args.x:g} +/- {result.tolerance:.6f}: "
        f"{'within' if result.passed else 'OUTSIDE'})",
        f"invariant violations: {violations}",
        f"bits/trial: {_bits_text(bits)}",
    ])
    return {"ok": violations == 0, "text": text}


def _quantum_summary(records, sink, args) -> dict:
    n = 0
    worst = 0.0
    bits = set()
    for record in records:
        _emit(sink, record)
        n += 1
        worst = max(worst, 1.0 - record.fidelity)
        bits.add(record.bits_sent)
    text = "\n".join([
        f"trials: {n}",
        f"min fidelity: {1.0 - worst:.15f} (deficit {worst:.3g}, tolerance {ATOL:g})",
        f"bits/trial: {_bits_text(bits)}",
    ])
    return {"ok": worst <= ATOL, "text": text}


def _bits_text(bits: set) -> str:
    return str(next(iter(bits))) if len(bits) == 1 else ",".join(map(str, sorted(bits)))


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else _env_int("TELEPORTSIM_SEED", 42)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    overrides = {"seed": seed, "jobs": args.jobs}
    if args.trials is not None:
        if args.trials < 10_000:
            raise UsageError("--trials must be at least 10000 per grid point")
        overrides["trials_per_point"] = args.trials
    report = build_report(args.suite, VerificationConfig(**overrides))
    json_path, md_path = write_report(report, args.out)
    if args.print:
        print(to_markdown(report))
    print(f"wrote {json_path} and {md_path}: {'pass' if report['passed'] else 'FAIL'}",
          file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FAILURE


def cmd_serve(args) -> int:
    host = args.host or os.environ.get("TELEPORTSIM_HOST", "127.0.0.1")
    port = args.port if args.port is not None else _env_int("TELEPORTSIM_PORT", 0)

    def ready(address):
        print(f"{args.role} listening on {address[0]}:{address[1]}", flush=True)

    try:
        return serve_party(args.role, host, port, ready)
    except OSError as exc:
        print(f"cannot serve {args.role} on {host}:{port}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teleportsim",
        description="Simulate classical and quantum teleportation and verify their features.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run trials and stream one JSON record per trial")
    run.add_argument("protocol", choices=("classical", "quantum"))
    run.add_argument("--x", type=float, help="classical state: probability of Heads")
    run.add_argument("--state", nargs="+", metavar="V",
                     help="quantum state: 'random' or Re(a) Im(a) Re(b) Im(b)")
    run.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    run.add_argument("--seed", type=int, help="root seed (env TELEPORTSIM_SEED, default 0)")
    run.add_argument("--mode", choices=[m.value for m in PreparationMode],
                     default=PreparationMode.DIRECT.value)
    run.add_argument("--transport", choices=("inprocess", "tcp"), default="inprocess")
    for role in ROLES:
        run.add_argument(f"--{role}", metavar="HOST:PORT",
                         help=f"{role} endpoint (env TELEPORTSIM_{role.upper()})")
    run.add_argument("--log", default="-", help="run log path, '-' for stdout")
    run.add_argument("--z", type=float, default=3.0, help="interval width in sigma")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="run verification suites and write reports")
    verify.add_argument("--suite", choices=SUITES, default="all")
    verify.add_argument("--seed", type=int, help="root seed (env TELEPORTSIM_SEED, default 42)")
    verify.add_argument("--out", default="verification-report", help="report directory")
    verify.add_argument("--jobs", type=int, default=1, help="worker processes")
    verify.add_argument("--trials", type=int, help="trials per grid point (default 100000)")
    verify.add_argument("--print", action="store_true", help="also print the markdown table")
    verify.set_defaults(func=cmd_verify)

    serve = sub.add_parser("serve", help="host one party over TCP for a single session")
    serve.add_argument("--role", choices=ROLES, required=True)
    serve.add_argument("--host", help="bind address (env TELEPORTSIM_HOST, default 127.0.0.1)")
    serve.add_argument("--port", type=int, help="bind port (env TELEPORTSIM_PORT, default 0)")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="teleportsim: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"teleportsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HandshakeRejected, TrialAborted, ConnectionError, TimeoutError) as exc:
        print(f"teleportsim: {exc}", file=sys.stderr)
        return EXIT_FAILURE
