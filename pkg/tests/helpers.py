"""Independent oracles for the test suite.

Everything here recomputes expected values by a route different from the
implementation under test: arbitrary-precision arithmetic, adaptive
quadrature with explicit singularity handling, tensor Gauss-Hermite
quadrature, closed-form lognormal identities, and direct exponential-time
recursions that translate coordinate vectors literally.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy.integrate import quad

from fracwick.phi_hilbert import StepFunction, inner_phi


def mp_kernel(s: float, t: float, h: float, dps: int = 50) -> float:
    """H(2H-1)|s-t|^(2H-2) at 50-digit precision."""
    with mpmath.workdps(dps):
        hh = mpmath.mpf(h)
        return float(hh * (2 * hh - 1) * abs(mpmath.mpf(s) - mpmath.mpf(t)) ** (2 * hh - 2))


def quad_rect_inner(a: float, b: float, c: float, d: float, h: float) -> float:
    """Adaptive double integral of the singular kernel over [a,b] x [c,d],
    inner integral via algebraic-singularity weights split at the diagonal."""
    const = h * (2 * h - 1)
    beta = 2 * h - 2

    def inner(u):
        if c < u < d:
            left = quad(lambda v: 1.0, c, u, weight="alg", wvar=(0.0, beta))[0]
            right = quad(lambda v: 1.0, u, d, weight="alg", wvar=(beta, 0.0))[0]
            return const * (left + right)
        if u <= c:
            if u == c:
                return const * quad(lambda v: 1.0, c, d, weight="alg", wvar=(beta, 0.0))[0]
            return const * quad(lambda v: (v - u) ** beta, c, d)[0]
        if u == d:
            return const * quad(lambda v: 1.0, c, d, weight="alg", wvar=(0.0, beta))[0]
        return const * quad(lambda v: (u - v) ** beta, c, d)[0]

    pts = [p for p in (c, d) if a < p < b]
    return quad(inner, a, b, points=pts or None, limit=400, epsabs=1e-10, epsrel=1e-10)[0]


def quad_transform(cells: list[tuple[float, float, float]], t: float, h: float) -> float:
    """int f(s) kernel(t, s) ds for a piecewise-constant f given as
    (left, right, value) cells, with endpoint-singularity weights."""
    const = h * (2 * h - 1)
    beta = 2 * h - 2
    total = 0.0
    for a, b, val in cells:
        if val == 0.0:
            continue
        if a < t < b:
            part = quad(lambda s: 1.0, a, t, weight="alg", wvar=(0.0, beta))[0]
            part += quad(lambda s: 1.0, t, b, weight="alg", wvar=(beta, 0.0))[0]
        elif t == b:
            part = quad(lambda s: 1.0, a, b, weight="alg", wvar=(0.0, beta))[0]
        elif t == a:
            part = quad(lambda s: 1.0, a, b, weight="alg", wvar=(beta, 0.0))[0]
        elif t > b:
            part = quad(lambda s: (t - s) ** beta, a, b)[0]
        else:
            part = quad(lambda s: (s - t) ** beta, a, b)[0]
        total += val * const * part
    return total


def _norm_cdf(x):
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(x, dtype=float) / math.sqrt(2.0)))


def gh_abs_gap_moment(va: float, vb: float, cov: float, p: float = 1.0, nodes: int = 150) -> float:
    """E|exp(A - va/2) - exp(B - vb/2)|^p for centered jointly Gaussian
    (A, B), by 2-D Gauss-Hermite quadrature.

    The p = 2 integrand is smooth and the plain tensor rule is exact-grade.
    At p = 1 the absolute value puts a kink along a line, which ruins the
    tensor rule's convergence; there the outer dimension uses Gauss-Hermite
    and the inner Gaussian dimension is integrated in closed form (the
    conditional gap of a lognormal pair is a partial-expectation identity),
    leaving a smooth outer integrand.
    """
    x, w = np.polynomial.hermite.hermgauss(nodes)
    z = math.sqrt(2.0) * x
    wt = w / math.sqrt(math.pi)
    sa, sb = math.sqrt(max(va, 0.0)), math.sqrt(max(vb, 0.0))
    rho = cov / (sa * sb) if sa > 0 and sb > 0 else 0.0
    rho = min(1.0, max(-1.0, rho))
    if p == 1.0:
        if sb == 0.0:
            return float(wt @ np.abs(np.exp(sa * z - va / 2) - 1.0))
        mu = sb * rho * z - vb / 2.0
        s = sb * math.sqrt(max(1.0 - rho * rho, 0.0))
        logc = sa * z - va / 2.0
        if s == 0.0:
            return float(wt @ np.abs(np.exp(logc) - np.exp(mu)))
        d = (mu - logc) / s
        inner = np.exp(mu + 0.5 * s * s) * (2.0 * _norm_cdf(d + s) - 1.0)
        inner -= np.exp(logc) * (2.0 * _norm_cdf(d) - 1.0)
        return float(wt @ inner)
    a_vals = sa * z[:, None]
    b_vals = sb * (rho * z[:, None] + math.sqrt(max(1 - rho * rho, 0.0)) * z[None, :])
    gaps = np.abs(np.exp(a_vals - va / 2) - np.exp(b_vals - vb / 2)) ** p
    return float(wt @ gaps @ wt)


def exact_abs_gap_p1(va: float, vb: float, cov: float) -> float:
    """Closed form of the p = 1 gap moment: 4 Phi(s/2) - 2 with
    s^2 = va + vb - 2 cov (used to validate the quadrature oracle)."""
    s = math.sqrt(max(va + vb - 2 * cov, 0.0))
    return 4.0 * 0.5 * (1.0 + math.erf(s / (2 * math.sqrt(2.0)))) - 2.0


def exact_abs_gap_p2(va: float, vb: float, cov: float) -> float:
    return math.exp(va) + math.exp(vb) - 2.0 * math.exp(cov)


def _interval_kernel(problem, gram, nodes, i, r_idx, t_idx) -> StepFunction:
    vec = np.zeros(gram.grid.cells)
    lo = gram.grid.node_index(nodes[r_idx])
    hi = gram.grid.node_index(nodes[t_idx])
    vec[lo:hi] = problem.sigma[i].values[lo:hi]
    return StepFunction(gram.grid, vec)


def naive_truncated(problem, basis, gram, sgrid, z) -> np.ndarray:
    """Exponential-time recursion of the truncated integral identity for a
    single draw, translating the coordinate matrix literally at every
    nesting level.  Interval coefficients come from per-pair inner
    products, independent of any cumulative-table bookkeeping."""
    d = problem.d
    nodes = sgrid.nodes
    dt = sgrid.dt
    kdim = basis.size

    def coef(i, r_idx, t_idx):
        kern = _interval_kernel(problem, gram, nodes, i, r_idx, t_idx)
        return np.array(
            [inner_phi(kern, basis.vector(k + 1), gram) for k in range(kdim)]
        )

    def u(n_idx, zmat):
        out = np.zeros(d)
        for i in range(d):
            c0 = coef(i, 0, n_idx)
            acc = problem.init[i] * math.exp(float(zmat[:, i] @ c0) - 0.5 * float(c0 @ c0))
            for m_idx in range(n_idx):
                cmn = coef(i, m_idx, n_idx)
                shifted = zmat.copy()
                shifted[:, i] -= cmn
                inner_vals = u(m_idx, shifted)
                bval = problem.drift_vector(nodes[m_idx], inner_vals[None, :])[0, i]
                acc += dt * bval * math.exp(
                    float(zmat[:, i] @ cmn) - 0.5 * float(cmn @ cmn)
                )
            out[i] = acc
        return out

    return np.array([u(n, np.asarray(z, dtype=float)) for n in range(nodes.size)])


def naive_reference(problem, gram, sgrid, g) -> np.ndarray:
    """Same recursion with the exact interval kernels: the realized
    integrals are prefix sums of per-cell draws, and translations offset
    each cell draw by its inner product with the translating kernel."""
    d = problem.d
    nodes = sgrid.nodes
    dt = sgrid.dt
    ncells = sgrid.steps

    def kern(i, r_idx, t_idx):
        return _interval_kernel(problem, gram, nodes, i, r_idx, t_idx)

    def cell_kern(i, c):
        return _interval_kernel(problem, gram, nodes, i, c, c + 1)

    def u(n_idx, gmat):
        out = np.zeros(d)
        for i in range(d):
            k0 = kern(i, 0, n_idx)
            v0 = inner_phi(k0, k0, gram)
            acc = problem.init[i] * math.exp(float(np.sum(gmat[:n_idx, i])) - 0.5 * v0)
            for m_idx in range(n_idx):
                kmn = kern(i, m_idx, n_idx)
                vmn = inner_phi(kmn, kmn, gram)
                shifted = gmat.copy()
                for c in range(ncells):
                    shifted[c, i] -= inner_phi(cell_kern(i, c), kmn, gram)
                inner_vals = u(m_idx, shifted)
                bval = problem.drift_vector(nodes[m_idx], inner_vals[None, :])[0, i]
                acc += dt * bval * math.exp(
                    float(np.sum(gmat[m_idx:n_idx, i])) - 0.5 * vmn
                )
            out[i] = acc
        return out

    return np.array([u(n, np.asarray(g, dtype=float)) for n in range(nodes.size)])
