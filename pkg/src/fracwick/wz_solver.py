"""Pathwise solvers for the approximating equation and its exact reference.

Both solutions satisfy an integral identity of the same shape,

    X_i(t) = c_i E_i(0,t) + int_0^t b_i(s, X(s)) <> E_i(s,t) ds,

where E_i(r,t) is a stochastic exponential of an interval kernel (the
projected kernel for the approximation, the raw kernel for the reference)
and <> resolves against a stochastic exponential into an ordinary product
after translating the other factor by the exponential's kernel.  Evaluated
at a sampled Gaussian coordinate vector and discretized with left-endpoint
Riemann sums, this becomes a recursion on pairs

    A_i(t_n; D) = c_i E_i(0, t_n; z (-) D)
                + dt * sum_{m<n} b_i(t_m, A(t_m; D (+) [t_m,t_n]@i))
                       * E_i(t_m, t_n; z (-) D),

where the descriptor D records the accumulated translation intervals per
component, (+) appends-and-merges, and z (-) D offsets the coordinates.
Interval additivity of the coefficients makes appended intervals merge
with their predecessor for one component, so with a single component (or a
component-wise drift) every reachable descriptor is one interval [t_l, t_n]
and the recursion is a dense two-index table of O(N^2) states.  Coupled
drifts in d >= 2 reach genuinely branching descriptor chains, which the
memoized engine handles behind an explicit complexity guard.

Everything random enters through two per-component arrays: P[a,b], the
inner products of the cumulative kernels at node pairs, and R[:,n], the
per-sample cumulative exponent values.  The truncated and exact solvers
differ only in how P and R are built, so they share one engine, which is
what makes the common-random-number comparison meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .drifts import Drift
from .errors import (
    ComplexityGuardError,
    DriftAuditError,
    GridMismatchError,
    UnsupportedOperationError,
)
from .phi_hilbert import Hurst, PhiBasis, PhiGram, StepFunction, TimeGrid
from .wick_core import SigmaCoeffs, node_embedding

N_MAX_COUPLED = 16
_AUDIT_SLACK = 1e-9


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and constants of one stochastic system.

    The drift carries its declared sup bound and l1 Lipschitz constant;
    the bound is audited against every evaluation during a solve and the
    Lipschitz constant is spot-checked on random pairs at construction.
    """

    drift: Drift
    sigma: tuple[StepFunction, ...]
    init: np.ndarray
    hurst: Hurst
    horizon: float

    def __post_init__(self):
        sigmas = tuple(self.sigma)
        object.__setattr__(self, "sigma", sigmas)
        init = np.atleast_1d(np.asarray(self.init, dtype=float))
        object.__setattr__(self, "init", init)
        if len(sigmas) != init.size:
            raise ValueError("one diffusion coefficient per component required")
        grid = sigmas[0].grid
        for sg in sigmas[1:]:
            if not sg.grid.same_as(grid):
                raise GridMismatchError("diffusion coefficients must share one grid")
        if abs(grid.horizon - self.horizon) > 1e-12 * max(1.0, self.horizon):
            raise ValueError("sigma grid horizon must equal the problem horizon")
        if not np.all(np.isfinite(init)):
            raise ValueError("initial condition must be finite")
        self._spot_check_lipschitz()

    @property
    def d(self) -> int:
        return self.init.size

    @property
    def decoupled(self) -> bool:
        return self.drift.decoupled or self.d == 1

    @property
    def sigma_bound(self) -> float:
        return float(max(np.max(np.abs(sg.values)) for sg in self.sigma))

    def drift_vector(self, t: float, x: np.ndarray) -> np.ndarray:
        """b(t, x) on the trailing component axis of x."""
        return self.drift.fn(t, x)

    def drift_component(self, i: int, t: float, xi: np.ndarray) -> np.ndarray:
        if not self.decoupled:
            raise UnsupportedOperationError("component drift needs a decoupled spec")
        return self.drift.fn(t, xi)

    def _spot_check_lipschitz(self) -> None:
        rng = np.random.default_rng(0x5EED)
        t_samples = rng.uniform(0.0, self.horizon, 8)
        for t in t_samples:
            x = rng.normal(0.0, 2.0, (4, self.d))
            y = rng.normal(0.0, 2.0, (4, self.d))
            lhs = np.max(np.abs(self.drift_vector(t, x) - self.drift_vector(t, y)), axis=-1)
            rhs = self.drift.lipschitz * np.sum(np.abs(x - y), axis=-1)
            if np.any(lhs > rhs * (1.0 + _AUDIT_SLACK) + 1e-12):
                raise DriftAuditError(
                    f"drift {self.drift.name!r} violates its declared Lipschitz "
                    f"constant {self.drift.lipschitz}"
                )


@dataclass(frozen=True)
class SolverGrid:
    """Uniform time nodes for the left-endpoint Riemann discretization."""

    steps: int
    horizon: float
    rule: str = "left"

    def __post_init__(self):
        if self.steps < 1 or self.horizon <= 0:
            raise ValueError("need steps >= 1 and a positive horizon")
        if self.rule != "left":
            raise ValueError("only the left-endpoint rule is implemented")

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.horizon, self.steps)

    @property
    def nodes(self) -> np.ndarray:
        return self.time_grid.points

    @property
    def dt(self) -> float:
        return self.horizon / self.steps


class ShiftDescriptor:
    """Canonical per-component chains of merged translation intervals.

    Intervals are (a, b) node-index pairs, kept disjoint, sorted and with
    adjacent intervals merged; zero-length intervals are dropped before
    canonicalization, so the canonical form is idempotent.
    """

    __slots__ = ("chains",)

    def __init__(self, chains: tuple[tuple[tuple[int, int], ...], ...]):
        self.chains = chains

    @classmethod
    def empty(cls, components: int) -> "ShiftDescriptor":
        return cls(tuple(() for _ in range(components)))

    @staticmethod
    def canonicalize(
        intervals: Sequence[tuple[int, int]]
    ) -> tuple[tuple[int, int], ...]:
        live = sorted((a, b) for a, b in intervals if a < b)
        merged: list[tuple[int, int]] = []
        for a, b in live:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
            else:
                merged.append((a, b))
        return tuple(merged)

    def append(self, component: int, a: int, b: int) -> "ShiftDescriptor":
        chains = list(self.chains)
        chains[component] = self.canonicalize(chains[component] + ((a, b),))
        return ShiftDescriptor(tuple(chains))

    def depth(self) -> int:
        return max((len(c) for c in self.chains), default=0)

    def key(self):
        return self.chains

    def __eq__(self, other):
        return isinstance(other, ShiftDescriptor) and self.chains == other.chains

    def __hash__(self):
        return hash(self.chains)

    def __repr__(self):
        return f"ShiftDescriptor{self.chains!r}"


@dataclass(frozen=True)
class PathSolution:
    """Solution values at the solver nodes, leading axis = sample batch."""

    grid: SolverGrid
    values: np.ndarray  # (nsamp, N+1, d) or (N+1, d) for single draws
    memo_size: int = 0
    max_chain_depth: int = 0


@dataclass(frozen=True)
class ComponentModel:
    """Node-pair inner products and per-sample cumulative exponents of one
    component's interval-kernel family."""

    pair: np.ndarray  # (N+1, N+1): P[a,b] = <kernel_[0,a], kernel_[0,b]>
    rand: np.ndarray  # (nsamp, N+1): realized exponent of kernel_[0,n]
    coeff: Optional[np.ndarray] = None  # (K, N+1) coordinates, truncated only

    def norm_sq(self, r: int, t: int) -> float:
        p = self.pair
        return float(p[t, t] - 2.0 * p[r, t] + p[r, r])

    def cross(self, r: int, t: int, a: int, b: int) -> float:
        """<kernel_[r,t], kernel_[a,b]>, bilinear in the cumulative table."""
        p = self.pair
        return float(p[t, b] - p[t, a] - p[r, b] + p[r, a])

    def exponential(self, r: int, t: int) -> np.ndarray:
        """Unshifted stochastic exponential of the interval [r, t]."""
        with np.errstate(over="ignore"):
            return np.exp(self.rand[:, t] - self.rand[:, r] - 0.5 * self.norm_sq(r, t))


def truncated_component_model(
    coeffs: SigmaCoeffs, i: int, z_i: np.ndarray, k: int | None = None
) -> ComponentModel:
    """Model from the first k coordinate rows and the matching z columns."""
    cum = coeffs.cumulative[i]
    kk = cum.shape[0] if k is None else k
    c = cum[:kk]
    z = np.atleast_2d(np.asarray(z_i, dtype=float))[:, :kk]
    return ComponentModel(pair=c.T @ c, rand=z @ c, coeff=c)


def reference_component_model(
    problem: ProblemSpec,
    i: int,
    gram: PhiGram,
    grid: SolverGrid,
    g_i: np.ndarray,
) -> ComponentModel:
    """Model with exact kernels chi_[0, t_n] sigma_i and realized integrals.

    g_i holds the sampled integrals of the per-cell kernels, one column per
    solver cell, so cumulative exponents are plain prefix sums.
    """
    emb = node_embedding(grid.time_grid, gram.grid)
    sg = problem.sigma[i].values
    npts = grid.steps + 1
    prefix = np.zeros((gram.grid.cells, npts))
    for n in range(npts):
        prefix[: emb[n], n] = sg[: emb[n]]
    pair = prefix.T @ gram.apply(prefix)
    pair = 0.5 * (pair + pair.T)
    g = np.atleast_2d(np.asarray(g_i, dtype=float))
    if g.shape[1] != grid.steps:
        raise ValueError("one realized integral per solver cell required")
    rand = np.concatenate([np.zeros((g.shape[0], 1)), np.cumsum(g, axis=1)], axis=1)
    return ComponentModel(pair=pair, rand=rand)


class _BoundAudit:
    """Tracks the largest |b| seen and raises on a bound violation."""

    def __init__(self, drift: Drift):
        self.drift = drift
        self.max_abs = 0.0

    def check(self, vals: np.ndarray) -> np.ndarray:
        m = float(np.max(np.abs(vals), initial=0.0))
        if m > self.max_abs:
            self.max_abs = m
        if m > self.drift.bound * (1.0 + _AUDIT_SLACK) + 1e-12:
            raise DriftAuditError(
                f"drift {self.drift.name!r} exceeded its declared bound "
                f"{self.drift.bound} (saw {m})"
            )
        return vals


def _solve_component(
    c: float,
    bfun,
    model: ComponentModel,
    nodes: np.ndarray,
    dt: float,
    audit: _BoundAudit,
    want_table: bool = False,
    dbfun=None,
):
    """Two-index recursion for one component of a component-wise system.

    F(m, n) is the solution value at node m under the accumulated
    translation interval [m, n]; the diagonal F(n, n) is the path.  With
    dbfun set, the derivative of the recursion with respect to every basis
    coordinate is propagated alongside (through both the exponential
    factors and the drift arguments).
    """
    p, r = model.pair, model.rand
    npts = nodes.size
    nsamp = r.shape[0]
    diag = np.empty((nsamp, npts))
    table = {} if want_table else None
    sens_diag = None
    if dbfun is not None:
        if model.coeff is None:
            raise UnsupportedOperationError("sensitivities need coordinate models")
        kdim = model.coeff.shape[0]
        sens_diag = np.empty((nsamp, npts, kdim))
    for n in range(npts):
        col: list[np.ndarray] = []
        bcol: list[np.ndarray] = []
        dcol: list[np.ndarray] = []
        for m in range(n + 1):
            shift_base = p[m, n] - p[m, m]
            with np.errstate(over="ignore"):
                exp0 = np.exp(
                    r[:, m]
                    - r[:, 0]
                    - (shift_base - p[0, n] + p[0, m])
                    - 0.5 * (p[m, m] - 2.0 * p[0, m] + p[0, 0])
                )
            acc = c * exp0
            if dbfun is not None:
                coef0 = model.coeff[:, m] - model.coeff[:, 0]
                dacc = (c * exp0)[:, None] * coef0[None, :]
            for l in range(m):
                if l == 0:
                    el = exp0
                else:
                    with np.errstate(over="ignore"):
                        el = np.exp(
                            r[:, m]
                            - r[:, l]
                            - (shift_base - p[l, n] + p[l, m])
                            - 0.5 * (p[m, m] - 2.0 * p[l, m] + p[l, l])
                        )
                acc = acc + dt * bcol[l] * el
                if dbfun is not None:
                    coef = model.coeff[:, m] - model.coeff[:, l]
                    dterm = dbfun(nodes[l], col[l])[:, None] * dcol[l]
                    dterm = dterm + bcol[l][:, None] * coef[None, :]
                    dacc = dacc + dt * el[:, None] * dterm
            col.append(acc)
            if m < n:
                bcol.append(audit.check(bfun(nodes[m], acc)))
            if dbfun is not None:
                dcol.append(dacc)
            if want_table:
                table[(m, n)] = acc
        diag[:, n] = col[n]
        if dbfun is not None:
            sens_diag[:, n, :] = dcol[n]
    return diag, table, sens_diag


def _estimated_nodes(d: int, steps: int) -> int:
    return d * (steps + 1) * (1 << max(steps - 1, 0))


def _solve_coupled(
    problem: ProblemSpec,
    models: Sequence[ComponentModel],
    grid: SolverGrid,
    n_max: int,
):
    """Memoized descriptor recursion for coupled drifts (any d).

    Memo keys are (node index, canonical descriptor); with a single
    component every reachable descriptor is provably the interval
    [current node, top node], which is asserted during traversal.
    """
    if problem.d >= 2 and grid.steps > n_max:
        raise ComplexityGuardError(
            f"coupled-descriptor solve with d={problem.d} and N={grid.steps} "
            f"exceeds N_max={n_max}; estimated memo nodes "
            f"{_estimated_nodes(problem.d, grid.steps)}"
        )
    d = problem.d
    nodes = grid.nodes
    dt = grid.dt
    nsamp = models[0].rand.shape[0]
    audit = _BoundAudit(problem.drift)
    memo: dict = {}
    stats = {"depth": 0}

    def evaluate(m: int, desc: ShiftDescriptor) -> np.ndarray:
        key = (m, desc.key())
        hit = memo.get(key)
        if hit is not None:
            return hit
        if d == 1:
            chain = desc.chains[0]
            assert len(chain) <= 1 and all(a == m for a, _ in chain), (
                "descriptor closure violated for a one-component system"
            )
        stats["depth"] = max(stats["depth"], desc.depth())
        out = np.empty((d, nsamp))
        for i in range(d):
            mod = models[i]
            corr0 = sum(mod.cross(0, m, a, b) for a, b in desc.chains[i])
            with np.errstate(over="ignore"):
                acc = problem.init[i] * np.exp(
                    mod.rand[:, m] - mod.rand[:, 0] - corr0 - 0.5 * mod.norm_sq(0, m)
                )
            for l in range(m):
                inner = evaluate(l, desc.append(i, l, m))
                bvals = audit.check(problem.drift_vector(nodes[l], inner.T))
                corr = sum(mod.cross(l, m, a, b) for a, b in desc.chains[i])
                with np.errstate(over="ignore"):
                    el = np.exp(
                        mod.rand[:, m]
                        - mod.rand[:, l]
                        - corr
                        - 0.5 * mod.norm_sq(l, m)
                    )
                acc = acc + dt * bvals[:, i] * el
            out[i] = acc
        memo[key] = out
        return out

    values = np.empty((nsamp, nodes.size, d))
    for n in range(nodes.size):
        values[:, n, :] = evaluate(n, ShiftDescriptor.empty(d)).T
    return values, len(memo), stats["depth"]


def _normalize_batch(arr: np.ndarray, trailing: int) -> tuple[np.ndarray, bool]:
    a = np.asarray(arr, dtype=float)
    if a.ndim == trailing:
        return a[None, ...], True
    if a.ndim == trailing + 1:
        return a, False
    raise ValueError("expected a single draw or a batch of draws")


def _truncated_models(
    problem: ProblemSpec, coeffs: SigmaCoeffs, z: np.ndarray, k: int | None
) -> list[ComponentModel]:
    return [
        truncated_component_model(coeffs, i, z[:, :, i], k) for i in range(problem.d)
    ]


def _reference_models(
    problem: ProblemSpec, gram: PhiGram, grid: SolverGrid, g: np.ndarray
) -> list[ComponentModel]:
    return [
        reference_component_model(problem, i, gram, grid, g[:, :, i])
        for i in range(problem.d)
    ]


def _solve_models(
    problem: ProblemSpec,
    models: Sequence[ComponentModel],
    grid: SolverGrid,
    squeeze: bool,
    n_max: int,
    want_tables: bool,
    engine: str = "auto",
):
    nsamp = models[0].rand.shape[0]
    if problem.decoupled and engine == "auto":
        values = np.empty((nsamp, grid.steps + 1, problem.d))
        audit = _BoundAudit(problem.drift)
        tables = []
        for i in range(problem.d):
            diag, table, _ = _solve_component(
                float(problem.init[i]),
                lambda t, xi, _i=i: problem.drift_component(_i, t, xi),
                models[i],
                grid.nodes,
                grid.dt,
                audit,
                want_table=want_tables,
            )
            values[:, :, i] = diag
            tables.append(table)
        memo = problem.d * (grid.steps + 1) * (grid.steps + 2) // 2
        path = PathSolution(grid, values[0] if squeeze else values, memo, 1)
        return (path, tables) if want_tables else path
    if want_tables:
        raise UnsupportedOperationError("tables are only kept for decoupled solves")
    values, memo, depth = _solve_coupled(problem, models, grid, n_max)
    return PathSolution(grid, values[0] if squeeze else values, memo, depth)


def solve_truncated(
    problem: ProblemSpec,
    basis: PhiBasis,
    coeffs: SigmaCoeffs,
    grid: SolverGrid,
    z: np.ndarray,
    k: int | None = None,
    n_max: int = N_MAX_COUPLED,
    engine: str = "auto",
) -> PathSolution:
    """Evaluate the approximated solution at sampled basis coordinates.

    z has shape (K, d) for a single draw or (n, K, d) batched, aligned with
    the basis block of the sampling frame; k restricts to the first k basis
    directions (the ladder rungs reuse one coefficient table).  engine
    "general" forces the descriptor-memo engine even on component-wise
    systems, which only makes sense at small N for cross-checks.
    """
    kk = basis.size if k is None else k
    if kk > basis.size or kk > coeffs.cumulative.shape[1]:
        raise ValueError("k exceeds the basis size")
    zb, squeeze = _normalize_batch(z, 2)
    if zb.shape[2] != problem.d or zb.shape[1] < kk:
        raise ValueError("z must be (n, K, d) with K >= k")
    models = _truncated_models(problem, coeffs, zb, kk)
    return _solve_models(problem, models, grid, squeeze, n_max, False, engine)


def solve_reference(
    problem: ProblemSpec,
    grid: SolverGrid,
    g: np.ndarray,
    gram: PhiGram,
    n_max: int = N_MAX_COUPLED,
    engine: str = "auto",
) -> PathSolution:
    """Evaluate the exact solution from realized per-cell Wiener integrals.

    g has shape (N, d) or (n, N, d): column m of component i holds the
    integral of chi_[t_m, t_m+1] sigma_i, sampled jointly with the basis
    coordinates when a common-random-number comparison is wanted.
    """
    gb, squeeze = _normalize_batch(g, 2)
    if gb.shape[2] != problem.d or gb.shape[1] != grid.steps:
        raise ValueError("g must be (n, N, d) matching the solver grid")
    models = _reference_models(problem, gram, grid, gb)
    return _solve_models(problem, models, grid, squeeze, n_max, False, engine)


def solve_truncated_with_tables(
    problem: ProblemSpec,
    basis: PhiBasis,
    coeffs: SigmaCoeffs,
    grid: SolverGrid,
    z: np.ndarray,
    k: int | None = None,
):
    """Like solve_truncated, also returning the shifted-state tables and the
    component models (decoupled systems only); consumed by the analysis
    layer for Gronwall-type estimates."""
    kk = basis.size if k is None else k
    zb, squeeze = _normalize_batch(z, 2)
    models = _truncated_models(problem, coeffs, zb, kk)
    path, tables = _solve_models(problem, models, grid, squeeze, N_MAX_COUPLED, True)
    return path, tables, models


def solve_reference_with_tables(
    problem: ProblemSpec,
    grid: SolverGrid,
    g: np.ndarray,
    gram: PhiGram,
):
    gb, squeeze = _normalize_batch(g, 2)
    models = _reference_models(problem, gram, grid, gb)
    path, tables = _solve_models(problem, models, grid, squeeze, N_MAX_COUPLED, True)
    return path, tables, models


def forward_sensitivities(
    problem: ProblemSpec,
    basis: PhiBasis,
    coeffs: SigmaCoeffs,
    grid: SolverGrid,
    z: np.ndarray,
    k: int | None = None,
) -> tuple[PathSolution, np.ndarray]:
    """Path values together with d X_i(t_n) / d z_k, forward-propagated
    through the exponential factors and the drift arguments.

    Needs a differentiable drift and a component-wise system; the returned
    sensitivities have shape (n, N+1, d, K) ((N+1, d, K) for single draws),
    holding the derivative of component i with respect to its own k-th
    coordinate (cross-component derivatives vanish for decoupled drifts).
    """
    if not problem.decoupled:
        raise UnsupportedOperationError("sensitivities need d=1 or a decoupled drift")
    if problem.drift.dfn is None:
        raise UnsupportedOperationError(
            f"drift {problem.drift.name!r} declares no derivative"
        )
    kk = basis.size if k is None else k
    zb, squeeze = _normalize_batch(z, 2)
    models = _truncated_models(problem, coeffs, zb, kk)
    nsamp = zb.shape[0]
    values = np.empty((nsamp, grid.steps + 1, problem.d))
    sens = np.empty((nsamp, grid.steps + 1, problem.d, kk))
    audit = _BoundAudit(problem.drift)
    for i in range(problem.d):
        diag, _, ds = _solve_component(
            float(problem.init[i]),
            lambda t, xi, _i=i: problem.drift_component(_i, t, xi),
            models[i],
            grid.nodes,
            grid.dt,
            audit,
            dbfun=lambda t, xi, _i=i: problem.drift.dfn(t, xi),
        )
        values[:, :, i] = diag
        sens[:, :, i, :] = ds
    path = PathSolution(grid, values[0] if squeeze else values)
    return path, (sens[0] if squeeze else sens)
