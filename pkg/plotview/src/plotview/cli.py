"""Command line: render convergence figures from a run manifest.

    plot <manifest> --panels f_gap,grad_norm,consensus,ds --x iteration --out fig.png
"""

from __future__ import annotations

import argparse
import sys

from .figure import PlotSpec, render
from .reader import METRICS, X_AXES, SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render convergence figures from metric CSV logs"
    )
    parser.add_argument("manifest", help="manifest.jsonl produced by the experiment harness")
    parser.add_argument(
        "--panels",
        default=",".join(METRICS),
        help=f"comma-separated subset of {','.join(METRICS)}",
    )
    parser.add_argument("--x", default="iteration", choices=sorted(X_AXES),
                        help="x-axis quantity")
    parser.add_argument("--out", required=True, help="output image path (.png or .svg)")
    parser.add_argument("--runs", default=None,
                        help="comma-separated run ids (default: all successful runs)")
    parser.add_argument("--linear-y", action="store_true", help="linear instead of log y scale")
    parser.add_argument("--no-bands", action="store_true",
                        help="plot same-label runs individually instead of mean±std")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(
            panels=tuple(p for p in (s.strip() for s in args.panels.split(",")) if p),
            x_axis=args.x,
            run_ids=tuple(s.strip() for s in args.runs.split(",")) if args.runs else None,
            log_y=not args.linear_y,
            band_by_label=not args.no_bands,
        )
        out = render(args.manifest, spec, args.out)
    except (SchemaError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
