"""Command line entry point.

    graphperc <subcommand> --config cfg.json [--out path] [--seed S] [--reps R]
              [--format csv|json|plotdata]

Exit status: 0 when every check passes, 1 when any check fails, 2 on a
configuration or runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from graphperc.harness import experiments
from graphperc.harness.config import ConfigError, ExperimentConfig
from graphperc.harness.report import FORMATS, emit

log = logging.getLogger("graphperc")

SUBCOMMANDS = {
    "threshold-scan": "threshold_scan",
    "census": "component_census",
    "log-scaling": "log_scaling",
    "reducible-demo": "reducible_demo",
    "branching-validate": "branching_validation",
    "convergence": "convergence",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphperc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", help="output path (defaults to the config's output)")
        p.add_argument("--seed", type=int, help="override base_seed (u64)")
        p.add_argument("--reps", type=int, help="override reps")
        p.add_argument("--format", choices=FORMATS, default=None,
                       help="output format (default: from the --out suffix, else csv)")
        p.add_argument("--no-rerun", action="store_true",
                       help="do not repeat a failing stochastic run at 3x reps")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load(args) -> ExperimentConfig:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
    d = ExperimentConfig.from_json(text).to_dict()
    want = SUBCOMMANDS[args.command]
    if d["kind"] != want:
        log.info("config kind %s overridden by subcommand %s", d["kind"], want)
        d["kind"] = want
    if args.seed is not None:
        d["base_seed"] = args.seed
    if args.reps is not None:
        d["reps"] = args.reps
    return ExperimentConfig.from_dict(d)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        report = experiments.run(cfg, rerun=not args.no_rerun)
        out = args.out or cfg.output
        if out:
            fmt = args.format or {".json": "json", ".dat": "plotdata"}.get(Path(out).suffix, "csv")
            emit(report, out, fmt)
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(report.summary())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
