"""Command line entry:

    fracwick-plot <figure-kind> <csv> -o <image>

Figure kind is one of convergence | bound | fp | gronwall; the image
format follows the output extension (.svg or .png).  A .data.json sidecar
echoing the input rows is written next to the image.  Exits nonzero on a
schema mismatch, naming the offending column.
"""

from __future__ import annotations

import argparse
import sys

from .render import render
from .schemas import SCHEMAS, SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fracwick-plot", description=__doc__)
    parser.add_argument("kind", choices=sorted(SCHEMAS))
    parser.add_argument("csv")
    parser.add_argument("-o", "--out", required=True)
    args = parser.parse_args(argv)
    try:
        render(args.kind, args.csv, args.out)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
