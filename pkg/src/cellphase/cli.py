"""Command-line entry point: ``cellphase <subcommand> --config FILE``."""
from __future__ import annotations

import argparse
import sys

from . import harness
from .errors import ConfigurationError

_SUBCOMMAND_MODE = {"converge": "converge1d", "compare": "compare2d", "phi-table": "phi_table"}


def build_parser():
    p = argparse.ArgumentParser(prog="cellphase", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "run any mode named in the configuration",
        "converge": "1D epsilon-convergence study (mode converge1d)",
        "compare": "planar PDE versus interface-law comparison (mode compare2d)",
        "phi-table": "tabulate the interface response function (mode phi_table)",
        "check": "seeded property suites (weighted inequalities, velocity laws)",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=name not in ("check", "phi-table"),
                        help="INI configuration file")
        sp.add_argument("--out", help="output directory (overrides run.output)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        sp.add_argument("--seed", type=int, help="seed for randomized suites (overrides run.seed)")
    return p


def _config(args, default_mode):
    if args.config:
        cfg = harness.load_config(args.config)
    else:
        cfg = harness.parse_config(f"[run]\nmode = {default_mode}\n")
    expected = _SUBCOMMAND_MODE.get(args.command)
    if expected and cfg.mode != expected:
        raise ConfigurationError(f"'{args.command}' needs run.mode = {expected}, got {cfg.mode}")
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            cfg = _config(args, "phi_table")
            rows = harness.run_checks(cfg, args.out or "out_check", seed=args.seed)
            for name, value, bound, ok in rows:
                print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.6g} (bound {bound:.6g})")
            return 0 if all(r[3] for r in rows) else 1
        cfg = _config(args, _SUBCOMMAND_MODE.get(args.command, "phi_table"))
        art = harness.run(cfg, out_dir=args.out, jobs=args.jobs, seed=args.seed)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for key, value in art.summary.items():
        print(f"{key} = {value}")
    print(f"status = {art.status} ({art.wall_time:.1f} s) -> {art.out_dir}")
    if art.error:
        print(art.error, file=sys.stderr)
    return 0 if art.status == "ok" else 1


if __name__ == "__main__":
    sys.exit(main())
