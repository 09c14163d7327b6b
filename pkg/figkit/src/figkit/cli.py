"""Command-line entry point: figkit render --in DIR --out DIR [--kinds list]."""

from __future__ import annotations

import argparse
import sys

from .render import ALL_KINDS, render_all
from .schemas import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="figkit")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render figures from training CSV logs")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument(
        "--kinds", default=None,
        help=f"comma list from {','.join(ALL_KINDS)} (default: all applicable)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kinds = args.kinds.split(",") if args.kinds else None
    try:
        written = render_all(args.in_dir, args.out_dir, kinds)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for kind in sorted(written):
        print(f"{kind}: {written[kind]}")
    if not written:
        print("nothing to render (no matching inputs)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
