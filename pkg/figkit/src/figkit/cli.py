"""Command-line front end: one subcommand per panel kind, single-panel figures."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, PanelSpec, render


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("output", help="image path (.png, .svg or .pdf)")
    parser.add_argument("csv", help="input CSV artifact")
    parser.add_argument("--title", default="")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figkit", description="render figures from simulator CSV artifacts"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("growth", help="timeseries curves with optional overlays")
    _common(p)
    p.add_argument("--columns", nargs="+", default=["s_vn"])
    p.add_argument("--overlays", nargs="+", default=[])
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--log", action="store_true", help="log-log axes")

    p = sub.add_parser("profiles", help="density vs site at snapshot times")
    _common(p)
    p.add_argument("--times", type=float, nargs="+")

    p = sub.add_parser(
        "compare", help="entanglement vs coarse-grained entropies over time"
    )
    _common(p)
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))

    p = sub.add_parser("overlap", help="eigenstate overlap histogram")
    _common(p)
    p.add_argument("--log-y", action="store_true")
    return parser


def _panel(args) -> PanelSpec:
    if args.command == "growth":
        return PanelSpec(
            kind="growth",
            csv_path=args.csv,
            columns=tuple(args.columns),
            overlays=tuple(args.overlays),
            window=tuple(args.window) if args.window else None,
            log_x=args.log,
            log_y=args.log,
            title=args.title,
        )
    if args.command == "profiles":
        return PanelSpec(
            kind="profiles",
            csv_path=args.csv,
            snapshot_times=tuple(args.times) if args.times else None,
            title=args.title,
        )
    if args.command == "compare":
        return PanelSpec(
            kind="entropy_compare",
            csv_path=args.csv,
            window=tuple(args.window) if args.window else None,
            title=args.title,
        )
    return PanelSpec(
        kind="overlap", csv_path=args.csv, log_y=args.log_y, title=args.title
    )


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = FigureSpec(panels=(_panel(args),), output_path=args.output)
        out = render(spec)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
