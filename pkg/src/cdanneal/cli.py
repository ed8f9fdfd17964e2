"""Command-line front end: ``cdanneal <experiment> [flags]``.

Configuration precedence, lowest first: recipe defaults, ``--config`` JSON
file, command-line flags. Exit status is 0 on success, 2 on configuration
errors and 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .experiments import (
    EXPERIMENTS,
    ConfigError,
    ExperimentAborted,
    ExperimentConfig,
    run_experiment,
    write_result,
)

log = logging.getLogger("cdanneal")

OUT_ENV = "CDANNEAL_OUT"
DEFAULT_OUT = "results"

# (flag, config key, type, nargs, description)
_FLAGS = [
    ("--qubits", "qubits", int, "+", "system sizes N"),
    ("--j", "j", float, "+", "Ising couplings J"),
    ("--h0", "h0", float, None, "mixer strength h0"),
    ("--h-z", "h_z", float, None, "longitudinal field (carried only; evolution uses h_z = 0)"),
    ("--dt", "dt", float, None, "Trotter interval"),
    ("--total-time", "total_time", float, None, "total annealing time T"),
    ("--iterations", "iterations", int, None, "SPSA iterations N_k"),
    ("--spsa-a", "spsa_a", float, None, "SPSA step gain a (CD arm)"),
    ("--spsa-c", "spsa_c", float, None, "SPSA perturbation c (CD arm)"),
    ("--spsa-A", "spsa_A", float, None, "SPSA stability offset A (unset: 0.01 * iterations)"),
    ("--qaoa-spsa-a", "qaoa_spsa_a", float, None, "SPSA step gain a (QAOA arm)"),
    ("--qaoa-spsa-c", "qaoa_spsa_c", float, None, "SPSA perturbation c (QAOA arm)"),
    ("--shots", "shots", int, None, "shots for the sampled SPSA objective (0 = exact)"),
    ("--restarts", "restarts", int, None, "SPSA restarts per point, best reported"),
    ("--seed", "seed", int, None, "base random seed"),
    ("--p", "p", int, "+", "QAOA depths"),
    ("--t-prime", "t_prime", float, None, "QAOA total time T'"),
    ("--trotter-dts", "trotter_dts", float, "+", "Trotter intervals for the scaling fit"),
    ("--trotter-ref-dt", "trotter_ref_dt", float, None, "reference Trotter interval"),
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _fmt_default(value: Any) -> str:
    if isinstance(value, list):
        return " ".join(str(v) for v in value)
    return str(value)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cdanneal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    for name in EXPERIMENTS:
        defaults = ExperimentConfig.defaults(name).to_dict()
        sp = sub.add_parser(name, help=f"run the {name} recipe",
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        for flag, key, kind, nargs, text in _FLAGS:
            sp.add_argument(flag, dest=key, type=kind, nargs=nargs, default=argparse.SUPPRESS,
                            metavar="N" if kind is int else "X", help=f"{text} (default: {_fmt_default(defaults[key])})")
        _common(sp)
        sp.add_argument("--config", type=Path, help="JSON config file (flat key/value)")
        sp.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")

    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("--config", type=Path, required=True)
    val.add_argument("--experiment", choices=EXPERIMENTS, help="recipe to validate against (else the file's 'experiment' key)")
    _common(val)

    sub.add_parser("version", help="print the package version")
    return parser


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("-v", "--verbose", action="count", default=0)
    sp.add_argument("-q", "--quiet", action="store_true")


def _load_config_file(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a JSON object")
    return data


def resolve_config(experiment: str | None, args: argparse.Namespace) -> tuple[ExperimentConfig, Path | None]:
    """Merge defaults, config file and flags; return the config and any file-given output dir."""
    file_values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    file_out = file_values.pop("out", None)
    experiment = experiment or file_values.get("experiment")
    if experiment is None:
        raise ConfigError("experiment", "no recipe given (use --experiment or an 'experiment' key)")
    defaults = ExperimentConfig.defaults(experiment)
    cfg = defaults.updated(file_values)
    # an echoed config lists every key; only complain about changed ones
    for key in cfg.unused_keys(file_values):
        if getattr(cfg, key) != getattr(defaults, key):
            log.warning("config key %r is not used by %s", key, experiment)
    flags = {key: getattr(args, key) for _, key, *_ in _FLAGS if hasattr(args, key)}
    cfg = cfg.updated(flags)
    cfg.validate()
    return cfg, Path(file_out) if file_out else None


def print_effective_config(cfg: ExperimentConfig, stream=None) -> None:
    stream = sys.stdout if stream is None else stream
    stream.write(json.dumps(cfg.to_dict(), indent=2) + "\n")
    stream.flush()


def _setup_logging(args: argparse.Namespace) -> None:
    level = logging.ERROR if getattr(args, "quiet", False) else (
        logging.DEBUG if getattr(args, "verbose", 0) > 1 else
        logging.INFO if getattr(args, "verbose", 0) == 1 else logging.WARNING
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args)

    if args.command == "version":
        print(f"cdanneal {__version__}")
        return 0

    try:
        if args.command == "validate":
            cfg, _ = resolve_config(args.experiment, args)
        else:
            cfg, file_out = resolve_config(args.command, args)
    except ConfigError as exc:
        print(f"cdanneal: configuration error in field '{exc.field}': {exc.message}", file=sys.stderr)
        return 2

    print_effective_config(cfg)
    if args.command == "validate":
        log.info("configuration is valid")
        return 0

    out_dir = args.out or file_out or Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)
    try:
        result = run_experiment(cfg, threads=args.threads)
    except ExperimentAborted as exc:
        paths = write_result(exc.result, out_dir)
        print(f"cdanneal: {exc}; partial results in {paths[0]}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure, not a config problem
        log.debug("run failed", exc_info=True)
        print(f"cdanneal: {cfg.experiment} failed: {exc}", file=sys.stderr)
        return 1

    for path in write_result(result, out_dir):
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
