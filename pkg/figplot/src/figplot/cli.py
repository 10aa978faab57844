"""Command-line front end mirroring FigureSpec.

Either pass a JSON spec (--spec) or assemble one from flags:

    figplot --curve stability_dbar.csv="DBAR" \\
            --curve stability_fixed-tau-fixed-eta.csv="Fixed tau, fixed eta" \\
            --kind stability --ref 2.5 --out fig.png --debug-dump fig.json
"""

from __future__ import annotations

import argparse
import sys

from .render import Curve, FigureSpec, RenderError, render, spec_from_json


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="figplot")
    parser.add_argument("--spec", help="JSON figure spec")
    parser.add_argument(
        "--curve",
        action="append",
        default=[],
        metavar="CSV=LABEL",
        help="input CSV and its legend label (repeatable)",
    )
    parser.add_argument("--kind", choices=("stability", "regret"), default="stability")
    parser.add_argument("--ref", type=float, help="horizontal reference line value")
    parser.add_argument("--out", default="figure.png", help="output image (png/svg)")
    parser.add_argument("--debug-dump", dest="debug_dump", help="JSON dump of plotted values")
    parser.add_argument("--title", default="")
    return parser


def spec_from_args(args) -> FigureSpec:
    if args.spec:
        return spec_from_json(args.spec)
    curves = []
    for item in args.curve:
        if "=" not in item:
            raise RenderError(f"--curve expects CSV=LABEL, got {item!r}")
        csv, label = item.split("=", 1)
        curves.append(Curve(csv=csv, label=label))
    return FigureSpec(
        curves=curves,
        y_kind=args.kind,
        ref_line=args.ref,
        out=args.out,
        debug_dump=args.debug_dump,
        title=args.title,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        render(spec_from_args(args))
    except RenderError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
