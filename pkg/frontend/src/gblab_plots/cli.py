"""Command line front end for the figure renderer."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotError, PlotJob, plot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render a static figure from aggregate experiment CSVs.",
    )
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="figure type")
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        metavar="CSV",
                        help="aggregate CSV (several for the sweep kind)")
    parser.add_argument("--out", required=True, metavar="IMG",
                        help="output image path (.png, .svg, or .pdf)")
    parser.add_argument("--labels",
                        help="comma-separated legend labels overriding the "
                             "defaults")
    parser.add_argument("--policy",
                        help="policy whose curve a sweep draws from each "
                             "file (default: first in the file)")
    parser.add_argument("--title", help="figure title")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    labels = None
    if args.labels:
        labels = tuple(part.strip() for part in args.labels.split(","))
    job = PlotJob(inputs=tuple(args.inputs), out_path=args.out,
                  kind=args.kind, labels=labels, policy=args.policy,
                  title=args.title)
    try:
        out_path = plot(job)
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
