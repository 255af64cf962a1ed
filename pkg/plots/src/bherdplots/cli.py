"""Command line entry point: plot <kind> --in DIR [--in DIR ...] --out FILE."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import InputError, PlotError, SchemaError
from .render import KINDS, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render experiment CSV logs into figures.",
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument(
        "--in", dest="inputs", action="append", required=True, metavar="DIR",
        help="experiment output directory; repeat to overlay several",
    )
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="output image path (e.g. figure.png)")
    parser.add_argument(
        "--label", dest="labels", action="append", default=[], metavar="TEXT",
        help="legend label per --in, in order (default: directory name)",
    )
    parser.add_argument("--dpi", type=int, default=120)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(
            kind=args.kind,
            inputs=[Path(p) for p in args.inputs],
            out=Path(args.out),
            labels=args.labels,
            dpi=args.dpi,
        )
        out = render(spec)
    except (SchemaError, InputError) as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return 2
    except PlotError as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return 4
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
