"""Command-line entry point.

Usage::

    pmcmc-lab <simulate|oracle|bounds|pgibbs|sticky> --config cfg.json [--seed S] [--out DIR]

Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
inequality-check suite reports a violation (named on stderr).
"""

from __future__ import annotations

import argparse
import sys

from .errors import AssertionFailure, ConfigError, PmcmcLabError
from .harness import load_config, run_experiment

_SUBCOMMAND_KINDS = {
    "simulate": ("icsmc", "isir", "pimh", "pmmh"),
    "oracle": ("oracle",),
    "bounds": ("bounds",),
    "pgibbs": ("pgibbs",),
    "sticky": ("sticky",),
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmcmc-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_KINDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        allowed = _SUBCOMMAND_KINDS[args.command]
        if cfg.kind not in allowed:
            raise ConfigError(
                f"kind {cfg.kind!r} is not valid for subcommand {args.command!r}"
                f" (expected one of {allowed})"
            )
        if args.seed is not None:
            cfg.seed = args.seed
        out = run_experiment(cfg, out_dir=args.out)
    except AssertionFailure as exc:
        print(f"pmcmc-lab: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, PmcmcLabError) as exc:
        print(f"pmcmc-lab: {exc}", file=sys.stderr)
        return 1
    if cfg.kind == "bounds":
        print((out / "bounds.csv").read_text(), end="")
    print(out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
