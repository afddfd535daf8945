"""Experiment orchestration: manifest, CSV outputs, pass/fail gates.

Output files carry the config hash in a leading comment line and floats at
17 significant digits, so a rerun with the same config and seed reproduces
them byte for byte (worker count never enters: sampling is blocked on a
fixed size with per-block streams).
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    appendix_bound_check,
    fokker_planck_residual,
    l1_convergence,
)
from .config import ExperimentConfig, build_experiment, config_hash
from .testfns import get_test_function


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list], hash_hex: str) -> None:
    lines = [f"# config_hash={hash_hex}", ",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


@dataclass
class GateResult:
    name: str
    passed: bool


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    seed_override: int | None = None,
    workers_override: int | None = None,
    log=print,
) -> int:
    """Execute the enabled analyses; returns 0 iff every gate passed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.sampling.seed if seed_override is None else int(seed_override)
    workers = cfg.sampling.workers if workers_override is None else int(workers_override)
    hash_hex = config_hash(cfg)

    planned = []
    if cfg.analysis.convergence:
        planned.append("convergence.csv")
        if cfg.analysis.gronwall:
            planned.append("gronwall.csv")
    if cfg.analysis.bound_check.enabled:
        planned.append("bound.csv")
    if cfg.analysis.fokker_planck.enabled:
        planned.append("fp.csv")

    manifest = {
        "config_hash": hash_hex,
        "artifact_version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": seed,
        "workers": workers,
        "outputs": planned,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    built = build_experiment(cfg)
    gates: list[GateResult] = []

    if cfg.analysis.convergence:
        report = l1_convergence(
            built.problem,
            built.basis,
            cfg.discretization.k_ladder,
            built.solver_grid,
            cfg.sampling.draws,
            seed,
            built.gram,
            gronwall=cfg.analysis.gronwall,
        )
        rows = [
            [r.k, r.l1_error, r.std_err, r.n, r.sigma_defect_phi] for r in report.rungs
        ]
        write_csv(
            out / "convergence.csv",
            ["K", "l1_error", "std_err", "n", "sigma_defect_phi"],
            rows,
            hash_hex,
        )
        gates.append(GateResult("convergence.monotone", report.monotone_pass()))
        exact_final = (
            cfg.discretization.basis_seeds in ("solver_cells", "fine_cells")
            and cfg.discretization.k_ladder[-1] >= cfg.discretization.solver_steps
        )
        if exact_final:
            gates.append(
                GateResult(
                    f"convergence.final_rung K={report.rungs[-1].k}",
                    report.final_rung_exact(),
                )
            )
        if cfg.analysis.gronwall:
            env = report.envelope
            grows = []
            for j, t in enumerate(built.solver_grid.nodes):
                est = max(float(r.m_hat[j]) for r in report.rungs)
                worst = max(report.rungs, key=lambda r: float(r.m_hat[j]))
                ok = est <= env[j] + 3.0 * float(worst.m_hat_se[j])
                grows.append([t, est, float(env[j]), ok])
            write_csv(
                out / "gronwall.csv", ["t", "estimate", "envelope", "pass"], grows, hash_hex
            )
            gates.append(GateResult("gronwall.envelope", all(r[3] for r in grows)))
            for r in report.rungs:
                gates.append(GateResult(f"gronwall.propagated K={r.k}", r.gronwall_pass))

    if cfg.analysis.bound_check.enabled:
        bc = cfg.analysis.bound_check
        rows = []
        for p, p1, p2 in bc.exponents:
            for k in bc.k_values:
                rec = appendix_bound_check(
                    built.problem,
                    built.basis,
                    built.solver_grid,
                    built.gram,
                    bc.s,
                    bc.t,
                    p,
                    p1,
                    p2,
                    cfg.sampling.draws,
                    seed,
                    k=k,
                )
                rows.append(
                    [
                        rec.p,
                        rec.p1,
                        rec.p2,
                        rec.k,
                        rec.s,
                        rec.t,
                        rec.lhs,
                        rec.lhs_ci,
                        rec.constant,
                        rec.rhs,
                        rec.ratio,
                        rec.passed,
                    ]
                )
                gates.append(
                    GateResult(f"bound p={rec.p:g} K={rec.k}", rec.passed)
                )
        write_csv(
            out / "bound.csv",
            ["p", "p1", "p2", "K", "s", "t", "lhs", "lhs_ci", "C", "rhs", "ratio", "pass"],
            rows,
            hash_hex,
        )

    if cfg.analysis.fokker_planck.enabled:
        fp = cfg.analysis.fokker_planck
        fns = [get_test_function(fid, cfg.problem.horizon) for fid in fp.test_functions]
        result = fokker_planck_residual(
            built.problem,
            built.basis,
            built.solver_grid,
            built.gram,
            fns,
            fp.draws,
            fp.bins,
            seed,
            k=fp.k,
        )
        rows = [
            [r.testfn, r.residual, r.std_err, r.bins, r.passed] for r in result.records
        ]
        write_csv(
            out / "fp.csv", ["testfn", "residual", "std_err", "bins", "pass"], rows, hash_hex
        )
        for r in result.records:
            gates.append(GateResult(f"fp.residual {r.testfn}", r.passed))
        for s in result.stein:
            gates.append(GateResult(f"fp.stein {s.name}", s.passed))

    failures = [g.name for g in gates if not g.passed]
    for g in gates:
        log(f"{'PASS' if g.passed else 'FAIL'} {g.name}")
    if failures:
        log(f"gate failure: {', '.join(failures)}")
        return 1
    return 0
