import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracwick.phi_hilbert import (
    Hurst,
    PhiGram,
    StepFunction,
    TimeGrid,
    block_indicator_seeds,
    gram_schmidt,
    inner_phi,
)
from fracwick.wick_core import (
    projection_norm_sq,
    sigma_coeffs,
    translation_shift,
    wick_exponential,
)

H34 = Hurst(0.75)


@pytest.fixture(scope="module")
def setup():
    grid = TimeGrid.uniform(1.0, 64)
    gram = PhiGram(grid, H34)
    basis = gram_schmidt(block_indicator_seeds(grid, 8), 8, gram)
    sigma = StepFunction.constant(grid, 0.5)
    nodes = TimeGrid.uniform(1.0, 8)
    coeffs = sigma_coeffs(basis, sigma, nodes, gram)
    return grid, gram, basis, sigma, nodes, coeffs


class TestSigmaCoeffs:
    def test_zero_sigma(self, setup):
        grid, gram, basis, _, nodes, _ = setup
        zero = StepFunction.constant(grid, 0.0)
        cz = sigma_coeffs(basis, zero, nodes, gram)
        assert np.max(np.abs(cz.cumulative)) == 0.0

    def test_additivity_exact(self, setup):
        *_, nodes, coeffs = setup
        # interval values are exact differences of cumulative values
        for r, m, t in [(0, 2, 5), (1, 4, 8), (0, 7, 8)]:
            left = coeffs.interval(0, r, m)
            right = coeffs.interval(0, m, t)
            total = coeffs.interval(0, r, t)
            assert np.array_equal(left + right, total)

    def test_zero_length_interval(self, setup):
        *_, coeffs = setup
        assert np.all(coeffs.interval(0, 3, 3) == 0.0)

    def test_single_vector_unit_case(self):
        grid = TimeGrid.uniform(1.0, 8)
        gram = PhiGram(grid, H34)
        basis = gram_schmidt([StepFunction.indicator(grid, 0.0, 1.0)], 1, gram)
        one = StepFunction.constant(grid, 1.0)
        coeffs = sigma_coeffs(basis, one, TimeGrid.uniform(1.0, 4), gram)
        assert coeffs.value(0, 1, 0.0, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_full_span_projection_is_exact(self, setup):
        grid, gram, basis, sigma, nodes, coeffs = setup
        for r, t in [(0.0, 1.0), (0.25, 0.75), (0.5, 0.625)]:
            vec = np.zeros(grid.cells)
            lo, hi = grid.node_index(r), grid.node_index(t)
            vec[lo:hi] = sigma.values[lo:hi]
            kern = StepFunction(grid, vec)
            v_full = inner_phi(kern, kern, gram)
            v_proj = projection_norm_sq(coeffs, 0, r, t)
            # defect in norm, not norm squared
            assert math.sqrt(max(v_full - v_proj, 0.0)) <= 1e-10


class TestProjectionNorm:
    def test_degenerate_interval(self, setup):
        *_, coeffs = setup
        assert projection_norm_sq(coeffs, 0, 0.5, 0.5) == 0.0

    def test_single_vector_parseval(self):
        grid = TimeGrid.uniform(1.0, 8)
        gram = PhiGram(grid, H34)
        basis = gram_schmidt([StepFunction.indicator(grid, 0.0, 1.0)], 1, gram)
        one = StepFunction.constant(grid, 1.0)
        coeffs = sigma_coeffs(basis, one, TimeGrid.uniform(1.0, 4), gram)
        assert projection_norm_sq(coeffs, 0, 0.0, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_monotone_in_k_and_bessel(self, setup):
        grid, gram, basis, sigma, nodes, _ = setup
        vals = []
        for k in range(1, basis.size + 1):
            sub = gram_schmidt(block_indicator_seeds(grid, 8)[:k], k, gram)
            coeffs_k = sigma_coeffs(sub, sigma, nodes, gram)
            vals.append(projection_norm_sq(coeffs_k, 0, 0.0, 1.0))
        assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= inner_phi(sigma, sigma, gram) + 1e-12


class TestWickExponential:
    def test_zero_kernel(self):
        ev = wick_exponential(np.zeros(4), np.zeros(4), 0.0)
        assert ev.value == 1.0 and ev.log_value == 0.0

    def test_mean_one_and_second_moment(self):
        rng = np.random.default_rng(17)
        n = 200_000
        shifts = np.array([0.5, -0.25, 0.3])
        v = float(shifts @ shifts)
        vals = wick_exponential(rng.standard_normal((n, 3)), shifts, v).value
        se = vals.std(ddof=1) / math.sqrt(n)
        assert vals.mean() == pytest.approx(1.0, abs=4 * se)
        second = vals**2
        se2 = second.std(ddof=1) / math.sqrt(n)
        assert second.mean() == pytest.approx(math.exp(v), abs=4 * se2)

    @given(st.integers(0, 2**32))
    def test_positivity(self, seed):
        rng = np.random.default_rng(seed)
        shifts = rng.normal(size=5)
        vals = wick_exponential(rng.standard_normal((16, 5)), shifts, float(shifts @ shifts))
        assert np.all(vals.value > 0.0)
        assert np.allclose(np.log(vals.value), vals.log_value)

    def test_order_preserved_by_positive_factor(self):
        # multiplying ordered values by a shared positive exponential keeps
        # the order
        rng = np.random.default_rng(3)
        shifts = np.array([0.4, 0.1])
        ev = wick_exponential(rng.standard_normal((64, 2)), shifts, float(shifts @ shifts))
        lo = np.full(64, -1.3)
        hi = np.full(64, 0.7)
        assert np.all(lo * ev.value <= hi * ev.value)

    def test_overflow_surfaces_as_inf(self):
        ev = wick_exponential(np.array([1000.0]), np.array([1.0]), 0.0)
        assert math.isinf(ev.value) and ev.value > 0


class TestTranslationShift:
    def test_zero_direction(self, setup):
        grid, gram, *_ = setup
        g = StepFunction.indicator(grid, 0.0, 0.5)
        zero = StepFunction.constant(grid, 0.0)
        assert translation_shift(g, zero, gram) == 0.0

    def test_basis_vector_against_projected_kernel(self, setup):
        # the offset of a coordinate under the projected-kernel translation
        # is exactly minus its interval coefficient
        grid, gram, basis, sigma, nodes, coeffs = setup
        r, t = 0.25, 0.875
        vec = coeffs.interval(0, nodes.node_index(r), nodes.node_index(t))
        proj = StepFunction(grid, vec @ basis.matrix)
        for k in (1, 3, 8):
            got = translation_shift(basis.vector(k), proj, gram)
            assert got == pytest.approx(-vec[k - 1], rel=1e-10, abs=1e-12)

    def test_adjacent_indicators(self):
        grid = TimeGrid.uniform(2.0, 2)
        gram = PhiGram(grid, H34)
        g = StepFunction.indicator(grid, 0.0, 1.0)
        f = StepFunction.indicator(grid, 1.0, 2.0)
        assert translation_shift(g, f, gram) == pytest.approx(-0.41421356237309515, rel=1e-12)

    @given(st.integers(0, 2**32))
    def test_additivity_over_adjacent_intervals(self, seed):
        grid = TimeGrid.uniform(1.0, 16)
        gram = PhiGram(grid, H34)
        rng = np.random.default_rng(seed)
        g = StepFunction(grid, rng.normal(size=16))
        sigma = StepFunction(grid, rng.normal(size=16))
        a, b, c = sorted(rng.choice(np.arange(17), size=3, replace=False))
        pts = grid.points

        def chunk(lo, hi):
            vals = np.zeros(16)
            vals[lo:hi] = sigma.values[lo:hi]
            return StepFunction(grid, vals)

        lhs = translation_shift(g, chunk(a, b), gram) + translation_shift(
            g, chunk(b, c), gram
        )
        rhs = translation_shift(g, chunk(a, c), gram)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


class TestReciprocalIdentity:
    def test_orthonormal_coordinates(self, setup):
        # exp of an interval times exp of the translated negated interval is
        # identically one, pathwise
        *_, coeffs = setup
        vec = coeffs.interval(0, 0, 6)
        v = float(vec @ vec)
        rng = np.random.default_rng(23)
        z = rng.standard_normal((256, vec.size))
        forward = wick_exponential(z, vec, v).value
        backward = wick_exponential(z - vec, -vec, v).value
        assert np.max(np.abs(forward * backward - 1.0)) <= 1e-12

    def test_exact_cell_kernels(self, setup):
        grid, gram, basis, sigma, nodes, _ = setup
        cells = []
        emb = [grid.node_index(t) for t in nodes.points]
        for m in range(nodes.cells):
            vals = np.zeros(grid.cells)
            vals[emb[m] : emb[m + 1]] = sigma.values[emb[m] : emb[m + 1]]
            cells.append(StepFunction(grid, vals))
        take = 6
        coef = np.array([1.0 if m < take else 0.0 for m in range(nodes.cells)])
        gram_cells = np.array(
            [[inner_phi(a, b, gram) for b in cells] for a in cells]
        )
        v = float(coef @ gram_cells @ coef)
        offsets = gram_cells @ coef
        rng = np.random.default_rng(29)
        g = rng.multivariate_normal(np.zeros(nodes.cells), gram_cells, size=128)
        forward = wick_exponential(g, coef, v).value
        backward = wick_exponential(g - offsets, -coef, v).value
        assert np.max(np.abs(forward * backward - 1.0)) <= 1e-12
