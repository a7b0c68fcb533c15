"""Command-line entry point: ``fslab <subcommand> [flags]``.

Exit status is 0 on success, 2 when an experiment's pass column has a
failure, and 1 on any error (including bad arguments or config).
"""

from __future__ import annotations

import argparse
import logging
import sys

import tomli

from fslab.lab import ConfigError, build_config, run_experiment

SUBCOMMANDS = {
    "gen": "generate",
    "ap-check": "ap-counterexample",
    "scan": "direction-scan",
    "content": "content-duality",
    "branching": "branching-audit",
    "inverse": "inverse-probe",
    "prop3": "prop3-probe",
    "dim": "dimension",
}

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse would exit with 2, which is reserved for failed bounds
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat TOML file of config keys")
    p.add_argument("--out", metavar="PATH", help="CSV path (a .json sidecar is written next to it)")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--jobs", type=int, metavar="N", help="worker processes (default: all cores)")
    p.add_argument("--level", type=int, metavar="L")
    p.add_argument("--theta-level", type=int, metavar="Q")
    for name in ("sigma", "eta", "tau", "epsilon", "rho"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any other config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fslab", description="Dyadic projection and sumset experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, kind in SUBCOMMANDS.items():
        _add_common(sub.add_parser(name, help=f"run the {kind} experiment"))
    return parser


def _read_config(path: str) -> dict:
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(key, "nested tables are not supported; keep the file flat")
    return data


def _parse_override(text: str):
    key, sep, raw = text.partition("=")
    if not sep:
        raise ConfigError(text, "expected KEY=VALUE")
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw  # bare words such as generator names
    return key.strip(), value


def config_from_args(args) -> dict:
    values = _read_config(args.config) if args.config else {}
    for text in args.set:
        key, value = _parse_override(text)
        values[key] = value
    flags = {"out": args.out, "seed": args.seed, "jobs": args.jobs, "level": args.level,
             "theta_level": args.theta_level, "sigma": args.sigma, "eta": args.eta,
             "tau": args.tau, "epsilon": args.epsilon, "rho": args.rho}
    values.update({k: v for k, v in flags.items() if v is not None})
    values["kind"] = SUBCOMMANDS[args.command]
    if "jobs" not in values:
        from fslab.parallel import default_jobs

        values["jobs"] = default_jobs()
    return values


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(config_from_args(args))
        table = run_experiment(config)
    except (ConfigError, OSError, tomli.TOMLDecodeError) as exc:
        print(f"fslab: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"fslab: experiment error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if table.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
