"""Wick-calculus primitives shared by both solvers.

The central objects are the interval coefficients

    Sigma_{i,k}(r, t) = <chi_[r,t] sigma_i, e_k>,

i.e. the coordinates of the orthogonal projection of chi_[r,t] sigma_i on
the basis span.  They are computed once as cumulative values at the solver
nodes and differenced, which enforces interval additivity exactly.  From
them come the projection norms (Parseval on the span), the stochastic
exponentials exp{<gaussians, coeffs> - norm^2/2}, and the additive offsets
a Cameron-Martin translation applies to realized Wiener integrals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .phi_hilbert import PhiBasis, PhiGram, StepFunction, TimeGrid, inner_phi


def node_embedding(nodes: TimeGrid, fine: TimeGrid) -> np.ndarray:
    """Fine-grid index of every coarse node; coarse nodes must be fine nodes."""
    return np.array([fine.node_index(t) for t in nodes.points], dtype=int)


@dataclass(frozen=True)
class SigmaCoeffs:
    """Cumulative interval coefficients of the diffusion kernels.

    cumulative[i, k, n] = Sigma_{i,k}(0, node_n); interval values are the
    differences, so Sigma(r, t) = Sigma(0, t) - Sigma(0, r) holds exactly.
    """

    basis: PhiBasis
    sigmas: tuple[StepFunction, ...]
    nodes: TimeGrid
    cumulative: np.ndarray  # (d, K, N + 1)

    @property
    def components(self) -> int:
        return len(self.sigmas)

    def interval(self, i: int, r_idx: int, t_idx: int) -> np.ndarray:
        """Vector (Sigma_{i,1}(r,t), ..., Sigma_{i,K}(r,t)) by node index."""
        return self.cumulative[i, :, t_idx] - self.cumulative[i, :, r_idx]

    def value(self, i: int, k: int, r: float, t: float) -> float:
        """Sigma_{i,k}(r, t) for 1-based k and node times r <= t."""
        r_idx, t_idx = self.nodes.node_index(r), self.nodes.node_index(t)
        return float(self.cumulative[i, k - 1, t_idx] - self.cumulative[i, k - 1, r_idx])


def sigma_coeffs(
    basis: PhiBasis,
    sigma: StepFunction | Sequence[StepFunction],
    grid: TimeGrid,
    gram: PhiGram,
) -> SigmaCoeffs:
    """Coefficient tables for one or several diffusion components.

    Cumulative values <chi_[0, tau_n] sigma_i, e_k> come from partial sums
    of sigma_i-weighted rows of the Gram image of the basis; differencing
    them yields every interval coefficient with exact additivity.
    """
    sigmas = (sigma,) if isinstance(sigma, StepFunction) else tuple(sigma)
    emb = node_embedding(grid, basis.grid)
    gram_rows = gram.apply(basis.matrix.T).T  # (K, M): row k is G @ e_k
    cum = np.zeros((len(sigmas), basis.size, grid.points.size))
    for i, sg in enumerate(sigmas):
        if not sg.grid.same_as(basis.grid):
            raise ValueError("sigma must live on the basis grid")
        weighted = np.concatenate(
            [np.zeros((basis.size, 1)), np.cumsum(gram_rows * sg.values, axis=1)],
            axis=1,
        )
        cum[i] = weighted[:, emb]
    return SigmaCoeffs(basis, sigmas, grid, cum)


def projection_norm_sq(coeffs: SigmaCoeffs, i: int, r: float, t: float) -> float:
    """Squared norm of the projected interval kernel, sum_k Sigma_k(r,t)^2.

    Nonnegative, nondecreasing in the basis size, and dominated by the
    norm of chi_[r,t] sigma_i (Bessel)."""
    r_idx, t_idx = coeffs.nodes.node_index(r), coeffs.nodes.node_index(t)
    v = coeffs.interval(i, r_idx, t_idx)
    return float(v @ v)


@dataclass(frozen=True)
class WickExponentialEval:
    """Value of a stochastic exponential, kept alongside its log.

    Computed in the log domain and never clamped: an overflowing value
    surfaces as inf so downstream bound checks see true tails."""

    log_value: np.ndarray | float
    value: np.ndarray | float


def wick_exponential(
    z_or_g: np.ndarray, shifts: np.ndarray, norm_sq: float
) -> WickExponentialEval:
    """exp{ sum_k gaussians_k * coeffs_k - norm_sq / 2 }.

    With basis coordinates and interval coefficients this is the truncated
    exponential of an interval; with realized exact integrals and indicator
    coefficients it is the exact one.  Strictly positive always.
    """
    log_value = np.asarray(z_or_g, dtype=float) @ np.asarray(shifts, dtype=float)
    log_value = log_value - 0.5 * float(norm_sq)
    with np.errstate(over="ignore"):
        value = np.exp(log_value)
    if np.ndim(log_value) == 0:
        return WickExponentialEval(float(log_value), float(value))
    return WickExponentialEval(log_value, value)


def translation_shift(g: StepFunction, f: StepFunction, gram: PhiGram) -> float:
    """Additive offset a translation along -Phi[f] applies to the realized
    Wiener integral of g: the integral maps to itself minus <g, f>."""
    return -inner_phi(g, f, gram)
