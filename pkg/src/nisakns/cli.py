"""Command line interface.

Subcommands: hierarchy | darboux | soliton | verify | plot.  Exit codes:
0 success / all checks pass, 1 check failure or runtime error, 2
configuration error.  NISAKNS_THREADS caps the numeric thread pools (it is
applied before the numeric modules load).
"""
from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_cap() -> None:
    cap = os.environ.get("NISAKNS_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nisakns",
        description="Non-isospectral hierarchy construction, Darboux dressing, "
                    "and soliton verification.")
    parser.add_argument("command",
                        choices=("hierarchy", "darboux", "soliton", "verify",
                                 "plot"),
                        help="scenario step to run")
    parser.add_argument("--config", help="path to the scenario config file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--tolerance-scale", type=float, default=1.0,
                        help="multiply every verification tolerance")
    parser.add_argument("--grid-refine", type=int, default=None, metavar="K",
                        help="run K nested grids in the order studies")
    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    args = _build_parser().parse_args(argv)

    from .config import parse_config
    from .errors import ConfigError
    from .runner import run_scenario

    try:
        if args.command == "plot" and not args.config:
            from .config import ScenarioConfig
            cfg = ScenarioConfig()
        else:
            if not args.config:
                print("error: --config is required", file=sys.stderr)
                return 2
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                return 2
            cfg = parse_config(text)
        return run_scenario(cfg, args.command, out_dir=args.out,
                            tolerance_scale=args.tolerance_scale,
                            grid_refine=args.grid_refine)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for lineno, message in exc.diagnostics:
            where = f"line {lineno}: " if lineno else ""
            print(f"  {where}{message}", file=sys.stderr)
        return 2
    except Exception as exc:  # module errors surface with their step context
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
