import argparse
import sys

from .errors import PlotkitError
from .figure import PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render sweep CSVs into efficiency-vs-gamma panel figures.")
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="output image; suffix picks the format, "
                             ".svg when absent")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = render(PlotSpec(inputs=tuple(args.inputs), output=args.out))
    except PlotkitError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
