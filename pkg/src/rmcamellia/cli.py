"""Command-line entry point: ``camellia <subcommand> ...``.

Exit status is 0 on success, 2 for usage or configuration errors and 3 when
an exhaustive computation would exceed its budget.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .analysis import entropy_audit, exact_expected_covariance, parseval_check, petal_function, petals_containing
from .camellia import CamelliaSpec, correlation_rho, petal_dimension, rho_asymptotic_bound, verify_camellia
from .channel import SymmetricChannel, capacity, channel_from_descriptor, make_bec, make_bsc, make_mixture
from .errors import BudgetError, ConfigError
from .harness import ExperimentConfig, fmt, run_experiment
from .rm import build_rm, rate

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3


def _add_channel_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--bsc", type=float, metavar="EPS")
    g.add_argument("--bec", type=float, metavar="P")
    g.add_argument("--mixture", metavar="W:EPS,...", help="e.g. 0.5:0,0.5:0.5")
    g.add_argument("--channel", metavar="JSON", help="channel descriptor as JSON")


def _channel(args) -> SymmetricChannel:
    try:
        if args.bsc is not None:
            return make_bsc(args.bsc)
        if args.bec is not None:
            return make_bec(args.bec)
        if args.mixture is not None:
            parts = [c.split(":") for c in args.mixture.split(",")]
            return make_mixture([(float(w), float(e)) for w, e in parts])
        return channel_from_descriptor(json.loads(args.channel))
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _code(args):
    try:
        return build_rm(args.m, args.r)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_rate(args) -> None:
    _emit(fmt(rate(_code(args))) + "\n", args.out)


def cmd_capacity(args) -> None:
    _emit(fmt(capacity(_channel(args))) + "\n", args.out)


def cmd_petals(args) -> None:
    code = _code(args)
    d = args.d if args.d is not None else (petal_dimension(code.m) if code.m >= 5 else code.m - 1)
    if not 1 <= d <= code.m:
        raise ConfigError(f"petal dimension {d} outside [1, {code.m}]")
    payload = {"code": code.descriptor(), "camellia": CamelliaSpec.for_code(code.m, d).to_dict()}
    if code.m >= 5:
        payload["rho_asymptotic_bound"] = rho_asymptotic_bound(code.m)
    if code.m <= 5:
        report = verify_camellia(code, d, args.rate_margin, rho_threshold=args.rho_threshold)
        payload["verify"] = report.to_dict()
    _emit(json.dumps(payload, indent=2) + "\n", args.out)


def _load_config(args) -> ExperimentConfig:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    cfg = ExperimentConfig.from_json(text)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.random_codeword:
        changes["random_codeword"] = True
    return cfg.replace(**changes) if changes else cfg


def cmd_simulate(args) -> None:
    cfg = _load_config(args)
    report = run_experiment(cfg, args.workers)
    _emit(report.to_json() if args.format == "json" else report.to_csv(), args.out)


def cmd_audit(args) -> None:
    code = _code(args)
    channel = _channel(args)
    d = args.d if args.d is not None else max(1, code.m - 1)
    payload: dict = {"code": code.descriptor(), "channel": channel.descriptor(), "d": d, "i": args.i}
    if code.n <= 16:
        payload["entropy"] = entropy_audit(code, channel).to_dict()
    # the single-petal check hits its budget first, so run it before the pair sum
    petal = petals_containing(code.m, d, args.i)[0]
    parseval = parseval_check(petal_function(code, channel, petal, args.i)).to_dict()
    cov = exact_expected_covariance(code, channel, args.i, d)
    bound = float(correlation_rho(code.m, d)) ** 0.5
    payload["covariance"] = {"exact": cov, "sqrt_rho": bound, "within_bound": cov <= bound}
    payload["parseval"] = parseval
    _emit(json.dumps(payload, indent=2) + "\n", args.out)


def cmd_trend(args) -> None:
    channel = _channel(args)
    lines = ["m,n,coord,metric,estimate,ci_lo,ci_hi,trials,seed"]
    for m in args.ms:
        decoder = {"kind": "boosted", "K": args.K}
        if args.d is not None:
            decoder["d"] = args.d
        cfg = ExperimentConfig.from_dict({
            "code": {"family": "rm", "m": m, "r": args.r},
            "channel": channel.descriptor(),
            "decoder": decoder,
            "target": "P_bit",
            "trials": args.trials,
            "seed": args.seed,
            "coordinates": [args.i],
        })
        row = run_experiment(cfg, args.workers).rows[0]
        lines.append(",".join([str(m), str(1 << m), row.coord, row.metric, fmt(row.estimate),
                               fmt(row.ci_lo), fmt(row.ci_hi), str(row.trials), str(args.seed)]))
    _emit("\n".join(lines) + "\n", args.out)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camellia", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def code_args(p):
        p.add_argument("--m", type=int, required=True)
        p.add_argument("--r", type=int, required=True)

    p = sub.add_parser("rate", help="rate of RM(m, r)")
    code_args(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("capacity", help="capacity of a symmetric channel")
    _add_channel_args(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("petals", help="coset camellia parameters and exhaustive check")
    code_args(p)
    p.add_argument("--d", type=int)
    p.add_argument("--rate-margin", type=float, default=0.3)
    p.add_argument("--rho-threshold", type=float)
    p.set_defaults(func=cmd_petals)

    p = sub.add_parser("simulate", help="Monte-Carlo estimate from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--random-codeword", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("audit", help="exact oracles on a small code")
    code_args(p)
    _add_channel_args(p)
    p.add_argument("--d", type=int)
    p.add_argument("--i", type=int, default=0)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("trend", help="boosted P_bit versus block length, as CSV")
    p.add_argument("--ms", type=_int_list, default=[6, 8, 10])
    p.add_argument("--r", type=int, default=1)
    _add_channel_args(p)
    p.add_argument("--K", type=int, default=64)
    p.add_argument("--d", type=int)
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_trend)

    for p in sub.choices.values():
        p.add_argument("--out", help="write output here instead of stdout")
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"camellia: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"camellia: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"camellia: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())
