"""Exact computation in the Hilbert space induced by the long-memory kernel.

For a Hurst index H in (1/2, 1) the kernel

    phi(s, t) = H(2H - 1) |s - t|^(2H - 2)

defines the inner product  <f, g> = int int f(s) g(t) phi(s, t) ds dt  on
functions over [0, T].  Every element this package manipulates (diffusion
coefficients, basis vectors, interval indicators) is a piecewise-constant
function on a shared partition, for which the double integral collapses to
an exact double sum over cells:

    <chi_[a,b], chi_[c,d]> = psi(b-c) + psi(a-d) - psi(a-c) - psi(b-d),
    psi(x) = |x|^(2H) / 2.

No quadrature of the singular kernel ever happens here; the exponent
2H - 2 in (-1, 0) makes that both slow and inaccurate, while the closed
form above is exact to rounding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateFamilyError, DiagonalSingularityError, GridMismatchError

ORTHONORMALITY_TOL = 1e-10
RANK_DEFICIENCY_REL = 1e-12


@dataclass(frozen=True)
class Hurst:
    """Hurst index, restricted to the open interval (1/2, 1)."""

    h: float

    def __post_init__(self):
        if not (0.5 < self.h < 1.0):
            raise ValueError(f"Hurst index must lie in (1/2, 1), got {self.h}")

    @property
    def two_h(self) -> float:
        return 2.0 * self.h


@dataclass(frozen=True)
class TimeGrid:
    """Partition 0 = tau_0 < tau_1 < ... < tau_M = T of the time interval."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if pts[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")

    @classmethod
    def uniform(cls, horizon: float, cells: int) -> "TimeGrid":
        if horizon <= 0 or cells < 1:
            raise ValueError("horizon must be positive and cells >= 1")
        return cls(np.linspace(0.0, horizon, cells + 1))

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    @property
    def cells(self) -> int:
        return self.points.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.points)

    def node_index(self, t: float, tol: float = 1e-9) -> int:
        """Index of the grid node equal to t, or GridMismatchError."""
        i = int(np.argmin(np.abs(self.points - t)))
        if abs(self.points[i] - t) > tol * max(1.0, self.horizon):
            raise GridMismatchError(f"{t} is not a node of this grid")
        return i

    def same_as(self, other: "TimeGrid") -> bool:
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )


@dataclass(frozen=True)
class StepFunction:
    """Real-valued function constant on each grid cell [tau_{m-1}, tau_m)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.grid.cells,):
            raise ValueError("one value per grid cell required")
        if not np.all(np.isfinite(vals)):
            raise ValueError("step function values must be finite")

    @classmethod
    def indicator(cls, grid: TimeGrid, a: float, b: float) -> "StepFunction":
        """chi_[a, b] for grid nodes a <= b."""
        ia, ib = grid.node_index(a), grid.node_index(b)
        if ia > ib:
            raise ValueError("indicator needs a <= b")
        vals = np.zeros(grid.cells)
        vals[ia:ib] = 1.0
        return cls(grid, vals)

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "StepFunction":
        return cls(grid, np.full(grid.cells, float(value)))

    def __add__(self, other: "StepFunction") -> "StepFunction":
        self._check(other)
        return StepFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        self._check(other)
        return StepFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "StepFunction":
        return StepFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def pointwise(self, other: "StepFunction") -> "StepFunction":
        """Cell-wise product, e.g. chi_[r,t] * sigma."""
        self._check(other)
        return StepFunction(self.grid, self.values * other.values)

    def _check(self, other: "StepFunction") -> None:
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("step functions live on different grids")


def phi_kernel(s: float, t: float, hurst: Hurst) -> float:
    """Pointwise kernel H(2H-1)|s-t|^(2H-2); singular on the diagonal."""
    if s == t:
        raise DiagonalSingularityError(
            "phi(s, s) is singular; integrate with rect_inner instead"
        )
    h = hurst.h
    return h * (2.0 * h - 1.0) * abs(s - t) ** (2.0 * h - 2.0)


def _psi(x, two_h: float):
    return 0.5 * np.abs(x) ** two_h


def rect_inner(a: float, b: float, c: float, d: float, hurst: Hurst) -> float:
    """Exact double integral of the kernel over [a, b] x [c, d].

    Follows from the antiderivative d^2/ds dt [-|s-t|^(2H)/2] = phi(s, t);
    at a = c = 0 it reduces to the increment covariance
    (t^(2H) + s^(2H) - |t-s|^(2H)) / 2.
    """
    if b < a or d < c:
        raise ValueError("rectangle needs a <= b and c <= d")
    th = hurst.two_h
    return float(_psi(b - c, th) + _psi(a - d, th) - _psi(a - c, th) - _psi(b - d, th))


class PhiGram:
    """Gram matrix of the grid-cell indicators under the kernel inner product.

    entry(m, n) = <chi_cell_m, chi_cell_n>; every inner product of step
    functions on the grid is the bilinear form through this matrix.
    """

    def __init__(self, grid: TimeGrid, hurst: Hurst):
        self.grid = grid
        self.hurst = hurst
        p = grid.points
        th = hurst.two_h
        self.entries = (
            _psi(p[1:, None] - p[None, :-1], th)
            + _psi(p[:-1, None] - p[None, 1:], th)
            - _psi(p[:-1, None] - p[None, :-1], th)
            - _psi(p[1:, None] - p[None, 1:], th)
        )

    def apply(self, values: np.ndarray) -> np.ndarray:
        """entries @ values for raw cell-value vectors (or matrices)."""
        return self.entries @ values

    def inner(self, f: StepFunction, g: StepFunction) -> float:
        self._check(f)
        self._check(g)
        return float(f.values @ self.entries @ g.values)

    def norm_sq(self, f: StepFunction) -> float:
        self._check(f)
        return float(f.values @ self.entries @ f.values)

    def _check(self, f: StepFunction) -> None:
        if not f.grid.same_as(self.grid):
            raise GridMismatchError("step function is not on the Gram grid")


def inner_phi(f: StepFunction, g: StepFunction, gram: PhiGram) -> float:
    """<f, g> under the kernel inner product; f, g must share gram's grid."""
    return gram.inner(f, g)


def phi_transform(f: StepFunction, t: float, hurst: Hurst) -> float:
    """The smoothing map f -> int_0^T f(s) phi(t, s) ds, evaluated at t.

    Cell [a, b] contributes H [sgn(t-a)|t-a|^(2H-1) - sgn(t-b)|t-b|^(2H-1)];
    the exponent 2H-1 in (0, 1) keeps the value finite at cell endpoints.
    """
    h = hurst.h
    p = f.grid.points
    e = 2.0 * h - 1.0
    left = np.sign(t - p[:-1]) * np.abs(t - p[:-1]) ** e
    right = np.sign(t - p[1:]) * np.abs(t - p[1:]) ** e
    return float(h * np.sum(f.values * (left - right)))


@dataclass(frozen=True)
class PhiBasis:
    """Orthonormal family e_1..e_K of step functions, with the coefficients
    cm(k, n) = <e_k, chi_[0, tau_n]> of the series representation of the
    driving Gaussian process precomputed at every grid node."""

    grid: TimeGrid
    hurst: Hurst
    matrix: np.ndarray  # (K, M) cell values of e_1..e_K
    cm_table: np.ndarray  # (K, M + 1), cm(k, 0) = 0
    orthonormality_defect: float = field(default=0.0)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def vector(self, k: int) -> StepFunction:
        """e_k, 1-based to match the series indexing."""
        return StepFunction(self.grid, self.matrix[k - 1])

    def vectors(self) -> list[StepFunction]:
        return [StepFunction(self.grid, row) for row in self.matrix]


def gram_schmidt(
    seed_family: Sequence[StepFunction], k: int, gram: PhiGram
) -> PhiBasis:
    """Modified Gram-Schmidt under the kernel inner product, plus one full
    reorthogonalization sweep.

    Raises DegenerateFamilyError naming the offending seed index when a
    pivot norm falls below RANK_DEFICIENCY_REL times the seed's own norm.
    """
    if k > len(seed_family):
        raise ValueError("k exceeds the seed family size")
    if k > gram.grid.cells:
        raise ValueError("k exceeds the number of grid cells")
    basis_rows = []
    gram_rows = []  # G @ e_j, reused for every projection
    for j in range(k):
        seed = seed_family[j]
        gram._check(seed)
        v = seed.values.astype(float).copy()
        norm0 = float(np.sqrt(max(v @ gram.apply(v), 0.0)))
        for _ in range(2):
            for u, gu in zip(basis_rows, gram_rows):
                v -= (v @ gu) * u
        nsq = float(v @ gram.apply(v))
        if norm0 == 0.0 or np.sqrt(max(nsq, 0.0)) < RANK_DEFICIENCY_REL * norm0:
            raise DegenerateFamilyError(j)
        v /= np.sqrt(nsq)
        basis_rows.append(v)
        gram_rows.append(gram.apply(v))
    matrix = np.array(basis_rows)
    gmat = np.array(gram_rows)
    # cm(k, n) = <e_k, chi_[0, tau_n]> = sum of (G e_k) over the first n cells
    cm = np.concatenate([np.zeros((k, 1)), np.cumsum(gmat, axis=1)], axis=1)
    inner = matrix @ gmat.T
    defect = float(np.max(np.abs(inner - np.eye(k)))) if k else 0.0
    return PhiBasis(gram.grid, gram.hurst, matrix, cm, defect)


def legendre_seeds(grid: TimeGrid, k: int) -> list[StepFunction]:
    """Piecewise-constant samplings (at cell midpoints) of the shifted
    Legendre polynomials; smooth seeds give fast decay of the series
    coefficients."""
    mids = 0.5 * (grid.points[:-1] + grid.points[1:])
    x = 2.0 * mids / grid.horizon - 1.0
    seeds = []
    for j in range(k):
        coeff = np.zeros(j + 1)
        coeff[j] = 1.0
        seeds.append(StepFunction(grid, np.polynomial.legendre.legval(x, coeff)))
    return seeds


def block_indicator_seeds(grid: TimeGrid, pieces: int) -> list[StepFunction]:
    """Indicators of a coarser uniform partition of [0, T] into `pieces`
    blocks; requires the fine grid to refine that partition.  Seeding the
    basis with the solver's own cells makes the span eventually contain
    every interval kernel the solver projects, which is what the exact
    final rung of the convergence ladder relies on."""
    m = grid.cells
    if m % pieces != 0:
        raise GridMismatchError(f"{m} fine cells do not tile {pieces} blocks")
    w = m // pieces
    seeds = []
    for j in range(pieces):
        vals = np.zeros(m)
        vals[j * w : (j + 1) * w] = 1.0
        seeds.append(StepFunction(grid, vals))
    return seeds


def scaled_indicator_seeds(
    grid: TimeGrid, pieces: int, weight: StepFunction
) -> list[StepFunction]:
    """Block indicators multiplied cell-wise by a weight function (the
    diffusion coefficient, typically)."""
    return [s.pointwise(weight) for s in block_indicator_seeds(grid, pieces)]


def dump_basis_csv(basis: PhiBasis, path) -> None:
    """Persist the basis as rows (k, cell index, value), 1-based k."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "cell", "value"])
        for k in range(basis.size):
            for m, val in enumerate(basis.matrix[k]):
                writer.writerow([k + 1, m, f"{val:.17g}"])


def load_basis_csv(path, gram: PhiGram) -> PhiBasis:
    """Rebuild a basis dumped by dump_basis_csv; the coefficient table and
    the orthonormality defect are recomputed from the Gram matrix."""
    rows: dict[int, dict[int, float]] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.setdefault(int(rec["k"]), {})[int(rec["cell"])] = float(rec["value"])
    k = len(rows)
    matrix = np.zeros((k, gram.grid.cells))
    for kk, cells in rows.items():
        for m, val in cells.items():
            matrix[kk - 1, m] = val
    gmat = gram.apply(matrix.T).T
    cm = np.concatenate([np.zeros((k, 1)), np.cumsum(gmat, axis=1)], axis=1)
    defect = float(np.max(np.abs(matrix @ gmat.T - np.eye(k)))) if k else 0.0
    return PhiBasis(gram.grid, gram.hurst, matrix, cm, defect)
