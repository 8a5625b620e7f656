"""Command-line experiment runner.

Flags mirror the config-file keys and override them.  Exit codes:
0 success, 1 configuration error, 2 solver failure.
"""

import argparse
import sys

from . import experiments
from .errors import ConfigurationError

__all__ = ["main"]


def _build_parser():
    p = argparse.ArgumentParser(
        prog="lpsflow",
        description="Convergence/robustness experiments for the stabilized "
                    "equal-order Navier-Stokes solver.")
    p.add_argument("--config", help="config file (key = value lines)")
    p.add_argument("--method", help="GD | GRADLPS | DIVLPS | HALFRATE")
    p.add_argument("--degree", type=int, help="polynomial degree (1-3)")
    p.add_argument("--grid", type=int, help="1 (regular) or 2 (irregular)")
    p.add_argument("--levels", help="level range, e.g. 2-5 or 2,3,4")
    p.add_argument("--nu", help="viscosity value or comma list")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--tend", type=float, help="final time")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--nu-sweep", action="store_true",
                   help="sweep the nu list at a single level instead of sweeping levels")
    return p


def _config_from_args(args):
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    overrides = []
    for key, value in (("method", args.method), ("degree", args.degree),
                       ("grid", args.grid), ("levels", args.levels),
                       ("nu", args.nu), ("dt", args.dt),
                       ("t_end", args.tend), ("out", args.out)):
        if value is not None:
            overrides.append(f"{key} = {value}")
    base = experiments.parse_config(text) if text.strip() else None
    if base is None:
        return experiments.parse_config("\n".join(overrides))
    merged = experiments.serialize_config(base).splitlines()
    keys = {line.split("=", 1)[0].strip() for line in overrides}
    merged = [l for l in merged if l.split("=", 1)[0].strip() not in keys]
    return experiments.parse_config("\n".join(merged + overrides))


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        runner = experiments.run_nu_sweep if args.nu_sweep else experiments.run_experiment
        result = runner(config)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return experiments.EXIT_CONFIG_ERROR
    if result.status != experiments.EXIT_OK:
        print(result.error, file=sys.stderr)
        return result.status
    print(f"wrote {config.out} ({len(result.rows)} rows)")
    return experiments.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
