#!/usr/bin/env python3
"""Run the shipped default experiment and, when the plotting package is
installed, render the four figures next to the CSVs.

    python3 scripts/run_default.py [--out results] [--seed S]
"""

import argparse
import sys
from pathlib import Path

from fracwick.config import load_config
from fracwick.runner import run_experiment

REPO = Path(__file__).resolve().parents[1]


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(REPO / "results"))
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()
    cfg = load_config(REPO / "configs" / "default.json")
    status = run_experiment(cfg, args.out, seed_override=args.seed)
    try:
        from fracwick_plots import render
    except ImportError:
        print("fracwick-plots not installed; skipping figures")
        return status
    out = Path(args.out)
    for kind, name in [
        ("convergence", "convergence.csv"),
        ("gronwall", "gronwall.csv"),
        ("bound", "bound.csv"),
        ("fp", "fp.csv"),
    ]:
        csv = out / name
        if csv.exists():
            render(kind, csv, out / f"{kind}.svg")
            print(f"wrote {out / f'{kind}.svg'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
