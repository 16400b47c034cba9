"""Figure CLI:

    render fig1 --in results.csv --out fig1.png [--format png|svg|pdf]
    render fig2 --in results.csv --out fig2.png [--format png|svg|pdf]
"""

import argparse
import sys

from .aggregate import SchemaError
from .figures import render_fig1, render_fig2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="render", description="render figures from SMC result files")
    sub = parser.add_subparsers(dest="figure", required=True)
    for name in ("fig1", "fig2"):
        p = sub.add_parser(name)
        p.add_argument("--in", dest="results", required=True,
                       help="results.csv produced by the smc harness")
        p.add_argument("--out", dest="out", required=True,
                       help="output image path")
        p.add_argument("--format", dest="fmt", default="png",
                       choices=("png", "svg", "pdf"))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    renderer = render_fig1 if args.figure == "fig1" else render_fig2
    try:
        out = renderer(args.results, args.out, fmt=args.fmt)
    except (SchemaError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
