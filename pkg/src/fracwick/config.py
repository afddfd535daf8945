"""Experiment configuration: versioned JSON schema, validation, hashing.

Configs reference drifts by registry id only, so the constants the gates
rely on are trusted.  The config hash covers every semantic field except
the seed and the worker count: reruns with the same hash and seed must
reproduce CSV bytes, and the sampler's fixed-block design makes output
independent of workers by construction.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .drifts import make_drift, registry_ids
from .errors import ConfigError
from .phi_hilbert import (
    Hurst,
    PhiBasis,
    PhiGram,
    StepFunction,
    TimeGrid,
    block_indicator_seeds,
    gram_schmidt,
    legendre_seeds,
)
from .testfns import registry as testfn_registry
from .wz_solver import ProblemSpec, SolverGrid

SCHEMA_VERSION = 1
SEED_FAMILIES = ("solver_cells", "legendre", "fine_cells")


@dataclass(frozen=True)
class ProblemConfig:
    d: int
    drift_id: str
    drift_params: dict
    sigma: list[float]
    c: list[float]
    hurst: float
    horizon: float


@dataclass(frozen=True)
class DiscretizationConfig:
    fine_cells: int
    solver_steps: int
    k_ladder: list[int]
    basis_seeds: str = "solver_cells"


@dataclass(frozen=True)
class SamplingConfig:
    draws: int
    seed: int
    workers: int = 1


@dataclass(frozen=True)
class BoundCheckConfig:
    enabled: bool = False
    exponents: list[list[float]] = field(default_factory=list)
    k_values: list[int] = field(default_factory=list)
    s: float = 0.0
    t: float = 1.0


@dataclass(frozen=True)
class FokkerPlanckConfig:
    enabled: bool = False
    test_functions: list[str] = field(default_factory=list)
    k: int = 4
    bins: int = 400
    draws: int = 100_000


@dataclass(frozen=True)
class AnalysisConfig:
    convergence: bool = True
    gronwall: bool = True
    bound_check: BoundCheckConfig = field(default_factory=BoundCheckConfig)
    fokker_planck: FokkerPlanckConfig = field(default_factory=FokkerPlanckConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    version: int
    problem: ProblemConfig
    discretization: DiscretizationConfig
    sampling: SamplingConfig
    analysis: AnalysisConfig

    def semantic_dict(self) -> dict:
        """Everything that determines results, except seed and workers."""
        return {
            "version": self.version,
            "problem": {
                "d": self.problem.d,
                "drift": {"id": self.problem.drift_id, "params": self.problem.drift_params},
                "sigma": self.problem.sigma,
                "c": self.problem.c,
                "hurst": self.problem.hurst,
                "horizon": self.problem.horizon,
            },
            "discretization": {
                "fine_cells": self.discretization.fine_cells,
                "solver_steps": self.discretization.solver_steps,
                "k_ladder": self.discretization.k_ladder,
                "basis_seeds": self.discretization.basis_seeds,
            },
            "sampling": {"draws": self.sampling.draws},
            "analysis": {
                "convergence": self.analysis.convergence,
                "gronwall": self.analysis.gronwall,
                "bound_check": {
                    "enabled": self.analysis.bound_check.enabled,
                    "exponents": self.analysis.bound_check.exponents,
                    "k_values": self.analysis.bound_check.k_values,
                    "s": self.analysis.bound_check.s,
                    "t": self.analysis.bound_check.t,
                },
                "fokker_planck": {
                    "enabled": self.analysis.fokker_planck.enabled,
                    "test_functions": self.analysis.fokker_planck.test_functions,
                    "k": self.analysis.fokker_planck.k,
                    "bins": self.analysis.fokker_planck.bins,
                    "draws": self.analysis.fokker_planck.draws,
                },
            },
        }


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.semantic_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return d[key]


def _as_int(v, path: str, minimum: int | None = None) -> int:
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v}")
    return v


def _as_number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    return float(v)


def parse_config(raw: dict) -> ExperimentConfig:
    if _as_int(_need(raw, "version", "config"), "config.version") != SCHEMA_VERSION:
        raise ConfigError("config.version", f"unsupported schema version {raw['version']}")

    p = _need(raw, "problem", "config")
    d = _as_int(_need(p, "d", "problem"), "problem.d", minimum=1)
    drift = _need(p, "drift", "problem")
    drift_id = _need(drift, "id", "problem.drift")
    if drift_id not in registry_ids():
        raise ConfigError(
            "problem.drift.id",
            f"unknown drift {drift_id!r}; registry: {registry_ids()}",
        )
    drift_params = drift.get("params", {})
    make_drift(drift_id, drift_params)  # surfaces bad params at load time
    sigma = [_as_number(v, "problem.sigma[]") for v in _need(p, "sigma", "problem")]
    c = [_as_number(v, "problem.c[]") for v in _need(p, "c", "problem")]
    if len(sigma) != d:
        raise ConfigError("problem.sigma", f"need {d} values, got {len(sigma)}")
    if len(c) != d:
        raise ConfigError("problem.c", f"need {d} values, got {len(c)}")
    hurst = _as_number(_need(p, "hurst", "problem"), "problem.hurst")
    if not (0.5 < hurst < 1.0):
        raise ConfigError("problem.hurst", f"must lie strictly in (1/2, 1), got {hurst}")
    horizon = _as_number(_need(p, "horizon", "problem"), "problem.horizon")
    if horizon <= 0:
        raise ConfigError("problem.horizon", "must be positive")

    disc = _need(raw, "discretization", "config")
    fine = _as_int(_need(disc, "fine_cells", "discretization"), "discretization.fine_cells", 1)
    steps = _as_int(
        _need(disc, "solver_steps", "discretization"), "discretization.solver_steps", 1
    )
    if fine % steps != 0:
        raise ConfigError(
            "discretization.fine_cells",
            f"{fine} fine cells must tile the {steps} solver steps",
        )
    ladder = [_as_int(v, "discretization.k_ladder[]", 1) for v in _need(disc, "k_ladder", "discretization")]
    if not ladder or sorted(set(ladder)) != ladder:
        raise ConfigError("discretization.k_ladder", "must be strictly increasing and nonempty")
    seeds = disc.get("basis_seeds", "solver_cells")
    if seeds not in SEED_FAMILIES:
        raise ConfigError("discretization.basis_seeds", f"one of {SEED_FAMILIES}")
    max_basis = {"solver_cells": steps, "legendre": fine, "fine_cells": fine}[seeds]
    if ladder[-1] > max_basis:
        raise ConfigError(
            "discretization.k_ladder",
            f"max rung {ladder[-1]} exceeds the {seeds} family size {max_basis}",
        )
    if ladder[-1] > fine:
        raise ConfigError("discretization.k_ladder", "K must not exceed fine_cells")

    s = _need(raw, "sampling", "config")
    draws = _as_int(_need(s, "draws", "sampling"), "sampling.draws", 100)
    seed = _as_int(_need(s, "seed", "sampling"), "sampling.seed", 0)
    workers = _as_int(s.get("workers", 1), "sampling.workers", 1)

    a = raw.get("analysis", {})
    convergence = bool(a.get("convergence", True))
    gronwall = bool(a.get("gronwall", True))
    if gronwall and not convergence:
        raise ConfigError(
            "analysis.gronwall", "the envelope check rides on the convergence run"
        )

    bc_raw = a.get("bound_check", {})
    bc = BoundCheckConfig(
        enabled=bool(bc_raw.get("enabled", False)),
        exponents=[list(map(float, e)) for e in bc_raw.get("exponents", [])],
        k_values=[_as_int(v, "analysis.bound_check.k_values[]", 1) for v in bc_raw.get("k_values", [])],
        s=_as_number(bc_raw.get("s", 0.0), "analysis.bound_check.s"),
        t=_as_number(bc_raw.get("t", horizon), "analysis.bound_check.t"),
    )
    if bc.enabled:
        if not bc.exponents:
            raise ConfigError("analysis.bound_check.exponents", "need at least one (p, p1, p2)")
        for e in bc.exponents:
            if len(e) != 3:
                raise ConfigError("analysis.bound_check.exponents", f"expected [p, p1, p2], got {e}")
            pp, p1, p2 = e
            if abs(1.0 / p1 + 1.0 / p2 - 1.0 / pp) > 1e-12:
                raise ConfigError(
                    "analysis.bound_check.exponents",
                    f"p1={p1}, p2={p2} are inconsistent: need 1/p1 + 1/p2 = 1/p for p={pp}",
                )
        if not bc.k_values:
            raise ConfigError("analysis.bound_check.k_values", "need at least one K")
        if max(bc.k_values) > max_basis:
            raise ConfigError("analysis.bound_check.k_values", "K exceeds the basis size")
        if not (0.0 <= bc.s < bc.t <= horizon):
            raise ConfigError("analysis.bound_check.s", "need 0 <= s < t <= horizon")

    fp_raw = a.get("fokker_planck", {})
    fp = FokkerPlanckConfig(
        enabled=bool(fp_raw.get("enabled", False)),
        test_functions=list(fp_raw.get("test_functions", [])),
        k=_as_int(fp_raw.get("k", 4), "analysis.fokker_planck.k", 1),
        bins=_as_int(fp_raw.get("bins", 400), "analysis.fokker_planck.bins", 10),
        draws=_as_int(fp_raw.get("draws", 100_000), "analysis.fokker_planck.draws", 500),
    )
    if fp.enabled:
        if d != 1:
            raise ConfigError("analysis.fokker_planck", "the weak-form check needs d = 1")
        if not fp.test_functions:
            raise ConfigError("analysis.fokker_planck.test_functions", "need at least one id")
        known = set(testfn_registry(horizon))
        for fid in fp.test_functions:
            if fid not in known:
                raise ConfigError(
                    "analysis.fokker_planck.test_functions",
                    f"unknown id {fid!r}; known: {sorted(known)}",
                )
        if fp.k > max_basis:
            raise ConfigError("analysis.fokker_planck.k", "K exceeds the basis size")
        if fp.draws // fp.bins < 50:
            raise ConfigError(
                "analysis.fokker_planck.bins",
                f"{fp.draws} draws over {fp.bins} bins leaves fewer than 50 per bin",
            )

    return ExperimentConfig(
        version=SCHEMA_VERSION,
        problem=ProblemConfig(d, drift_id, drift_params, sigma, c, hurst, horizon),
        discretization=DiscretizationConfig(fine, steps, ladder, seeds),
        sampling=SamplingConfig(draws, seed, workers),
        analysis=AnalysisConfig(convergence, gronwall, bc, fp),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    return parse_config(raw)


@dataclass(frozen=True)
class BuiltExperiment:
    """Everything the analyses consume, constructed once from a config."""

    config: ExperimentConfig
    problem: ProblemSpec
    gram: PhiGram
    basis: PhiBasis
    solver_grid: SolverGrid


def build_experiment(cfg: ExperimentConfig) -> BuiltExperiment:
    pc, dc = cfg.problem, cfg.discretization
    fine = TimeGrid.uniform(pc.horizon, dc.fine_cells)
    hurst = Hurst(pc.hurst)
    gram = PhiGram(fine, hurst)
    sigma = tuple(StepFunction.constant(fine, v) for v in pc.sigma)
    problem = ProblemSpec(
        drift=make_drift(pc.drift_id, pc.drift_params),
        sigma=sigma,
        init=np.array(pc.c, dtype=float),
        hurst=hurst,
        horizon=pc.horizon,
    )
    k_needed = dc.k_ladder[-1]
    if cfg.analysis.bound_check.enabled and cfg.analysis.bound_check.k_values:
        k_needed = max(k_needed, max(cfg.analysis.bound_check.k_values))
    if cfg.analysis.fokker_planck.enabled:
        k_needed = max(k_needed, cfg.analysis.fokker_planck.k)
    if dc.basis_seeds == "legendre":
        seeds = legendre_seeds(fine, k_needed)
    elif dc.basis_seeds == "fine_cells":
        seeds = block_indicator_seeds(fine, dc.fine_cells)
    else:
        seeds = block_indicator_seeds(fine, dc.solver_steps)
    basis = gram_schmidt(seeds, k_needed, gram)
    return BuiltExperiment(cfg, problem, gram, basis, SolverGrid(dc.solver_steps, pc.horizon))
