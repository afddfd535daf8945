"""Joint Gaussian model of every random quantity the solvers consume.

A frame lists, per driving-noise component, the kernels whose Wiener
integrals we need: the orthonormal basis vectors (whose integrals are the
i.i.d. standard coordinates of the series expansion) followed by the
interval kernels chi_cell * sigma_i (whose integrals the exact solver
consumes).  The isometry turns covariances into kernel inner products, so
the whole vector is sampled jointly from one covariance matrix.  Sampling
approximate and exact solvers from the same draw is what makes the error
estimates common-random-number coupled.

The joint covariance is singular by construction whenever the basis span
contains the interval kernels (that is the exact-projection regime), so the
factorization has to tolerate zero pivots: the Cholesky below zeroes any
column whose pivot falls under a clamp threshold and verifies the
reconstruction instead of failing, escalating through the jitter ladder
only when the reconstruction check misses.  At jitter 0 this reproduces the
exact linear dependence between coordinates, which the pathwise
equivalence tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, IllConditionedFrameError
from .phi_hilbert import PhiBasis, PhiGram, StepFunction

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
RECONSTRUCTION_TOL = 1e-8
_CLAMP_REL = 1e-12
_SAMPLE_BLOCK = 4096


@dataclass(frozen=True)
class GaussianFrame:
    """Kernels per component; components are independent blocks."""

    gram: PhiGram
    kernels: tuple[tuple[StepFunction, ...], ...]

    def __post_init__(self):
        for block in self.kernels:
            for f in block:
                if not f.grid.same_as(self.gram.grid):
                    raise GridMismatchError("frame kernels must share the Gram grid")

    @property
    def components(self) -> int:
        return len(self.kernels)

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.kernels)

    @property
    def total(self) -> int:
        return sum(self.block_sizes)


@dataclass(frozen=True)
class CovarianceModel:
    frame: GaussianFrame
    matrix: np.ndarray
    factor: np.ndarray  # lower triangular, factor @ factor.T = matrix + jitter*I
    jitter_used: float


@dataclass(frozen=True)
class SampleBatch:
    """Jointly Gaussian draws aligned with the frame's kernel order."""

    frame: GaussianFrame
    seed: int
    count: int
    draws: np.ndarray  # (count, frame.total)

    def block(self, component: int) -> np.ndarray:
        start = sum(self.frame.block_sizes[:component])
        return self.draws[:, start : start + self.frame.block_sizes[component]]


def _clamped_cholesky(mat: np.ndarray, clamp: float) -> np.ndarray | None:
    """Right-looking Cholesky that zeroes columns with pivots <= clamp.

    For a positive semidefinite input a vanishing pivot forces the rest of
    its column to vanish too, so zeroing is exact up to rounding; genuinely
    indefinite inputs leave a residual the caller detects by reconstruction.
    """
    a = mat.copy()
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        piv = a[j, j]
        if piv <= clamp:
            continue
        col = a[j:, j] / np.sqrt(piv)
        low[j:, j] = col
        a[j:, j:] -= np.outer(col, col)
    return low


def build_covariance(frame: GaussianFrame) -> CovarianceModel:
    """Block-diagonal covariance from kernel inner products, factored with
    the jitter ladder; the first rung whose clamped factor reconstructs the
    matrix within RECONSTRUCTION_TOL wins."""
    total = frame.total
    matrix = np.zeros((total, total))
    offset = 0
    for block in frame.kernels:
        nb = len(block)
        if nb:
            vals = np.array([f.values for f in block])  # (nb, M)
            blk = vals @ frame.gram.apply(vals.T)
            blk = 0.5 * (blk + blk.T)
            matrix[offset : offset + nb, offset : offset + nb] = blk
        offset += nb
    scale = max(1.0, float(np.max(np.abs(matrix))) if total else 1.0)
    for jitter in JITTER_LADDER:
        target = matrix + jitter * np.eye(total)
        factor = _clamped_cholesky(target, clamp=_CLAMP_REL * scale)
        if np.max(np.abs(factor @ factor.T - target), initial=0.0) <= RECONSTRUCTION_TOL * scale:
            return CovarianceModel(frame, matrix, factor, jitter)
    raise IllConditionedFrameError(
        f"covariance factorization failed at max jitter {JITTER_LADDER[-1]:g}"
    )


def sample(model: CovarianceModel, n: int, seed: int) -> SampleBatch:
    """Deterministic joint draws: factor @ (standard normal vector).

    Draws come in fixed-size blocks, block b from its own counter-based
    stream keyed by seed XOR b, so the batch content depends only on
    (model, n, seed) and not on how work is split across workers.
    """
    if n < 1:
        raise ValueError("need n >= 1 draws")
    total = model.frame.total
    draws = np.empty((n, total))
    lt = model.factor.T
    for block_index, start in enumerate(range(0, n, _SAMPLE_BLOCK)):
        stop = min(start + _SAMPLE_BLOCK, n)
        key = (int(seed) ^ block_index) & 0xFFFFFFFFFFFFFFFF
        gen = np.random.Generator(np.random.Philox(key=key))
        draws[start:stop] = gen.standard_normal((stop - start, total)) @ lt
    return SampleBatch(model.frame, seed, n, draws)


def cm_partial_sum_covariance(
    basis: PhiBasis, s: float, t: float, k: int | None = None
) -> float:
    """Covariance of the K-term series approximation of the driving process,
    Cov(B^K(t), B^K(s)) = sum_{j<=K} cm(j, t) cm(j, s).

    Nondecreasing in K toward the exact increment covariance; the defect on
    the diagonal is the Bessel remainder of chi_[0, t]."""
    kk = basis.size if k is None else k
    if kk > basis.size:
        raise ValueError("k exceeds the basis size")
    it = basis.grid.node_index(t)
    is_ = basis.grid.node_index(s)
    return float(basis.cm_table[:kk, it] @ basis.cm_table[:kk, is_])
