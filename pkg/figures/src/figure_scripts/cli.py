"""render-figures: images from an experiment result directory."""

from __future__ import annotations

import argparse
import sys

from .render import FigureKind, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render-figures",
        description="Render violin/MSE/MAD figures from harness CSV outputs.",
    )
    parser.add_argument(
        "--dir", required=True,
        help="results directory holding estimates.csv, summary.csv, meta.json",
    )
    parser.add_argument("--kind", required=True, choices=[k.value for k in FigureKind])
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument(
        "--y-clip", type=float, default=None,
        help="clip the y axis (symmetric for violin, top for error curves)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec.for_directory(args.dir, args.kind, args.out, y_clip=args.y_clip)
    try:
        path = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
