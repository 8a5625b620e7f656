"""Standalone command: CSV in, SVG out.

Exit codes: 0 success, 1 bad arguments or malformed CSV.
"""

import argparse
import sys

from .core import PlotSpec, PlotgenError, render


def _build_parser():
    p = argparse.ArgumentParser(
        prog="plotgen",
        description="Render log-log convergence figures from result CSVs.")
    p.add_argument("csv", nargs="+", help="input CSV file(s)")
    p.add_argument("--columns", required=True,
                   help="comma list of quantity columns to plot")
    p.add_argument("--x", default="h", choices=("h", "nu_inv"),
                   help="x axis: mesh width or inverse viscosity")
    p.add_argument("--slopes", default="",
                   help="comma list of dotted reference slopes, e.g. 2,3")
    p.add_argument("--out", default="convergence.svg", help="output SVG path")
    p.add_argument("--title", default=None)
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    slopes = tuple(float(s) for s in args.slopes.split(",") if s.strip())
    try:
        spec = PlotSpec(csv_paths=tuple(args.csv),
                        columns=tuple(c.strip() for c in args.columns.split(",") if c.strip()),
                        x_axis=args.x, slopes=slopes, out_path=args.out,
                        title=args.title)
        render(spec)
    except (PlotgenError, OSError, ValueError) as exc:
        print(f"plotgen: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
