"""Command line entry points.

    fracwick run <config.json> [--out DIR] [--workers N] [--seed S]
    fracwick selftest
    fracwick basis <config.json> [--out FILE]

Exit codes: 0 all gates passed, 1 a gate failed, 2 invalid configuration.
The environment variable FRACWICK_SEED overrides the config seed; the
--seed flag overrides both.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import build_experiment, config_hash, load_config
from .errors import ConfigError
from .phi_hilbert import dump_basis_csv
from .runner import run_experiment
from .selftest import run_selftest


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("FRACWICK_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError("FRACWICK_SEED", f"not an integer: {env!r}") from exc
    return None


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    return run_experiment(
        cfg,
        args.out,
        seed_override=_resolve_seed(args),
        workers_override=args.workers,
    )


def _cmd_basis(args) -> int:
    cfg = load_config(args.config)
    built = build_experiment(cfg)
    out = args.out or "basis.csv"
    dump_basis_csv(built.basis, out)
    gram_err = built.basis.orthonormality_defect
    cm_last = built.basis.cm_table[:, -1]
    print(f"config_hash={config_hash(cfg)}")
    print(f"basis_size={built.basis.size}")
    print(f"orthonormality_defect={gram_err:.3e}")
    print(f"horizon_coefficients={np.array2string(cm_last, precision=6)}")
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fracwick", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the analyses enabled in a config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="results")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(fn=_cmd_run)

    p_self = sub.add_parser("selftest", help="run the built-in smoke suite")
    p_self.set_defaults(fn=lambda args: run_selftest())

    p_basis = sub.add_parser("basis", help="dump the basis and Gram diagnostics")
    p_basis.add_argument("config")
    p_basis.add_argument("--out", default=None)
    p_basis.set_defaults(fn=_cmd_basis)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
