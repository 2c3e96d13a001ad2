"""Command-line interface: ``simulate``, ``decay`` and ``verify``.

Exit status is 0 on success, 1 when a verification check fails and 2 for
usage, parse or parameter errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .circuit import ParseError, load_circuit
from .experiments import MODES, RunConfig, decay_csv, decay_curve, experiment_csv, named_circuit, run_experiment
from .params import HiddenModelInapplicable
from .verify import verify_suite

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2
NAMED = ("teleport", "ghz", "epr")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _run_flags(p: argparse.ArgumentParser, default_mode: str | None = "hidden"):
    eps = p.add_mutually_exclusive_group()
    eps.add_argument("--alpha", type=float, help="polarization per qubit; epsilon = alpha N / 2^N (default 2e-6)")
    eps.add_argument("--epsilon", type=float, help="pseudopure fraction, overrides alpha")
    p.add_argument("--samples", type=_positive_int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.add_argument("--workers", type=_positive_int, default=1, help="threads for the particle loops")
    if default_mode is not None:
        p.add_argument("--mode", choices=MODES, default=default_mode)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmrtops", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one circuit in one mode")
    sim.add_argument("--circuit", required=True, help=f"circuit file, or one of the bundled names {NAMED}")
    _run_flags(sim)

    dec = sub.add_parser("decay", help="ratio against entangling-gate count on the standard chain")
    dec.add_argument("--qubits", type=int, required=True)
    dec.add_argument("--gates", type=_positive_int, required=True)
    dec.add_argument("--modes", default=",".join(MODES), help="comma-separated subset of " + ",".join(MODES))
    _run_flags(dec, default_mode=None)

    ver = sub.add_parser("verify", help="run the self-check suite and print a JSON report")
    ver.add_argument("--fast", action="store_true", help="fewer points and particles")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--workers", type=_positive_int, default=1)
    ver.add_argument("--corrupt-eta", type=float, default=None, help=argparse.SUPPRESS)
    return parser


def _config(args, mode) -> RunConfig:
    return RunConfig(mode, args.alpha, args.epsilon, args.samples, args.seed, args.out, args.workers)


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    if args.circuit in NAMED:
        circuit = named_circuit(args.circuit)
    else:
        circuit = load_circuit(args.circuit)
    result = run_experiment(circuit, _config(args, args.mode))
    _emit(experiment_csv(result, args.out), args.out)
    return EXIT_OK


def cmd_decay(args) -> int:
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    bad = [m for m in modes if m not in MODES]
    if bad or not modes:
        raise ValueError(f"unknown modes {bad}; choose from {MODES}")
    rows, _ = decay_curve(args.qubits, args.gates, _config(args, "quantum"), modes)
    _emit(decay_csv(rows, args.out), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    report = verify_suite(fast=args.fast, corrupt_eta=args.corrupt_eta, seed=args.seed, workers=args.workers)
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if report["passed"] else EXIT_CHECK


COMMANDS = {"simulate": cmd_simulate, "decay": cmd_decay, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad usage
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
    except HiddenModelInapplicable as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
