"""Command line entry point ``bergman-lab``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .errors import BergmanLabError, ConfigError
from .lab.config import config_from_dict, load_config
from .lab.runner import EXIT_CONFIG, EXIT_NUMERICAL, run

SUBCOMMANDS = {"diagonal": "diagonal", "near-diagonal": "near-diagonal", "spectrum": "spectrum",
               "filter": "filter", "sweep": "zeta-sweep"}


def _int_list(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _float_list(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _grid(s):
    try:
        a, b = s.lower().split("x")
        return {"n_radial": int(a), "n_angular": int(b)}
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like 48x48") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bergman-lab",
                                 description="Bergman kernel convergence experiments on CP^1/CP^2.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON or TOML experiment file")
        sp.add_argument("--out", help="output directory (default: results)")
        sp.add_argument("--p", type=_int_list, help="comma-separated degrees, e.g. 16,32,64")
        sp.add_argument("--zeta", type=_float_list, help="comma-separated family floors")
        sp.add_argument("--weight", help="zero | psi | harmonic | family")
        sp.add_argument("--n", type=int, choices=(1, 2))
        sp.add_argument("--grid", type=_grid, help="residual grid NRxNA")
        sp.add_argument("--precision", choices=("auto", "double", "extended"))
        sp.add_argument("--threads", type=int, help="worker threads (overrides BERGMAN_LAB_THREADS)")
        sp.add_argument("--json", action="store_true", help="also write a JSON mirror")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args):
    kind = SUBCOMMANDS[args.command]
    over = {"kind": kind}
    if args.p:
        over["p"] = args.p
    if args.n:
        over["n"] = args.n
    if args.grid:
        over["grid"] = args.grid
    if args.precision:
        over["precision"] = args.precision
    if args.weight:
        over["weight"] = {"name": args.weight}
    if args.zeta:
        over["weight"] = {"name": "family", "zeta": args.zeta}
    elif kind == "zeta-sweep" and not args.config and "weight" not in over:
        over["weight"] = {"name": "family", "zeta": [1.0, 0.5, 0.25]}
    if args.config:
        cfg = load_config(args.config, over)
    else:
        cfg = config_from_dict(over)
    if args.out:
        cfg.output["dir"] = args.out
    if args.json:
        cfg.output["json"] = True
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg, threads=args.threads, write=True)
    except BergmanLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for r in result.rows:
        p = "" if r.p is None else f" p={r.p}"
        z = "" if r.zeta is None else f" zeta={r.zeta:g}"
        val = "" if r.value is None else f"{r.value:.6e}"
        print(f"{r.kind:<14}{p}{z} {r.metric}={val} [{r.status}]")
    for path in result.paths:
        print(f"wrote {path}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
