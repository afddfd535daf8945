"""Built-in smoke suite: the closed-form identities every operation must
satisfy, plus the end-to-end exact-projection equivalence of the two
solvers.  Runs in seconds with no test dependencies; `fracwick selftest`
is the CLI entry."""

from __future__ import annotations

import numpy as np

from .analysis import (
    appendix_bound_check,
    fokker_planck_residual,
    gronwall_envelope,
    l1_convergence,
    solver_frame,
    split_solver_batch,
)
from .drifts import make_drift
from .gaussian_ensemble import (
    GaussianFrame,
    build_covariance,
    cm_partial_sum_covariance,
    sample,
)
from .phi_hilbert import (
    Hurst,
    PhiGram,
    StepFunction,
    TimeGrid,
    block_indicator_seeds,
    gram_schmidt,
    inner_phi,
    phi_transform,
    rect_inner,
)
from .testfns import get_test_function
from .wick_core import (
    projection_norm_sq,
    sigma_coeffs,
    translation_shift,
    wick_exponential,
)
from .wz_solver import ProblemSpec, SolverGrid, forward_sensitivities, solve_reference, solve_truncated


def _close(a, b, tol):
    return abs(a - b) <= tol


def _standard_setup(h=0.75, horizon=1.0, fine=64, steps=8, sig=0.5, drift="sin"):
    grid = TimeGrid.uniform(horizon, fine)
    hurst = Hurst(h)
    gram = PhiGram(grid, hurst)
    basis = gram_schmidt(block_indicator_seeds(grid, steps), steps, gram)
    problem = ProblemSpec(
        drift=make_drift(drift),
        sigma=(StepFunction.constant(grid, sig),),
        init=np.array([1.0]),
        hurst=hurst,
        horizon=horizon,
    )
    return gram, basis, problem, SolverGrid(steps, horizon)


def _checks():
    h = Hurst(0.75)
    grid2 = TimeGrid.uniform(2.0, 2)
    gram2 = PhiGram(grid2, h)

    def check_rect_inner():
        assert _close(rect_inner(0, 2, 0, 2, h), 2.0**1.5, 1e-12)
        assert _close(rect_inner(0, 1, 0, 1, h), 1.0, 1e-12)
        assert _close(rect_inner(0, 1, 0, 1, Hurst(0.6)), 1.0, 1e-12)

    def check_inner_phi():
        one = StepFunction.indicator(grid2, 0.0, 1.0)
        zero = StepFunction.constant(grid2, 0.0)
        assert _close(inner_phi(one, one, gram2), 1.0, 1e-12)
        assert _close(inner_phi(one, zero, gram2), 0.0, 1e-15)

    def check_phi_transform():
        zero = StepFunction.constant(grid2, 0.0)
        for t in (0.0, 0.7, 2.0):
            assert phi_transform(zero, t, h) == 0.0

    def check_gram_schmidt():
        grid = TimeGrid.uniform(2.0, 8)
        gram = PhiGram(grid, h)
        basis = gram_schmidt([StepFunction.indicator(grid, 0.0, 2.0)], 1, gram)
        assert np.allclose(basis.matrix[0], 1.0 / 2.0**0.75, atol=1e-12)
        basis2 = gram_schmidt(block_indicator_seeds(grid, 4), 4, gram)
        assert basis2.orthonormality_defect <= 1e-10

    def check_covariance_identity_block():
        grid = TimeGrid.uniform(1.0, 32)
        gram = PhiGram(grid, h)
        basis = gram_schmidt(block_indicator_seeds(grid, 8), 8, gram)
        model = build_covariance(GaussianFrame(gram, (tuple(basis.vectors()),)))
        assert model.jitter_used == 0.0
        assert np.max(np.abs(model.matrix - np.eye(8))) <= 1e-10

    def check_covariance_cross_component_zero():
        one = StepFunction.indicator(grid2, 0.0, 1.0)
        two = StepFunction.indicator(grid2, 1.0, 2.0)
        model = build_covariance(GaussianFrame(gram2, ((one,), (two,))))
        assert model.matrix[0, 1] == 0.0 and model.matrix[1, 0] == 0.0

    def check_degenerate_frame_draws():
        zero = StepFunction.constant(grid2, 0.0)
        model = build_covariance(GaussianFrame(gram2, ((zero, zero),)))
        batch = sample(model, 1, seed=7)
        assert np.all(batch.draws == 0.0)

    def check_identity_sampling_moments():
        grid = TimeGrid.uniform(1.0, 16)
        gram = PhiGram(grid, h)
        basis = gram_schmidt(block_indicator_seeds(grid, 4), 4, gram)
        model = build_covariance(GaussianFrame(gram, (tuple(basis.vectors()),)))
        n = 100_000
        batch = sample(model, n, seed=11)
        assert np.max(np.abs(batch.draws.mean(axis=0))) <= 4.0 / np.sqrt(n)

    def check_partial_sum_covariance():
        gram, basis, problem, sgrid = _standard_setup()
        t = 1.0
        assert cm_partial_sum_covariance(basis, t, t, k=0) == 0.0
        full = rect_inner(0, t, 0, t, basis.hurst)
        for k in range(1, basis.size + 1):
            assert cm_partial_sum_covariance(basis, t, t, k=k) <= full + 1e-10

    def check_sigma_coeffs_zero_and_full():
        gram, basis, problem, sgrid = _standard_setup()
        zero = StepFunction.constant(gram.grid, 0.0)
        cz = sigma_coeffs(basis, zero, sgrid.time_grid, gram)
        assert np.max(np.abs(cz.cumulative)) == 0.0
        cs = sigma_coeffs(basis, problem.sigma[0], sgrid.time_grid, gram)
        # full span: the projection is exact, Parseval equals the Gram norm
        v_proj = projection_norm_sq(cs, 0, 0.0, 1.0)
        v_full = gram.norm_sq(problem.sigma[0])
        assert _close(v_proj, v_full, 1e-10)
        assert projection_norm_sq(cs, 0, 0.5, 0.5) == 0.0

    def check_wick_exponential():
        ev = wick_exponential(np.zeros(3), np.zeros(3), 0.0)
        assert ev.value == 1.0
        rng = np.random.Generator(np.random.Philox(key=3))
        n = 100_000
        shifts = np.array([0.4, -0.3])
        v = float(shifts @ shifts)
        vals = wick_exponential(rng.standard_normal((n, 2)), shifts, v).value
        assert np.all(vals > 0)
        se = vals.std(ddof=1) / np.sqrt(n)
        assert abs(vals.mean() - 1.0) <= 4 * se

    def check_translation_shift():
        one = StepFunction.indicator(grid2, 0.0, 1.0)
        zero = StepFunction.constant(grid2, 0.0)
        assert translation_shift(one, zero, gram2) == 0.0
        gram, basis, problem, sgrid = _standard_setup()
        cs = sigma_coeffs(basis, problem.sigma[0], sgrid.time_grid, gram)
        # translating e_k along the projected interval kernel offsets the
        # coordinate by exactly -Sigma_k(s, t)
        s, t = 0.25, 0.75
        kvec = cs.interval(0, sgrid.time_grid.node_index(s), sgrid.time_grid.node_index(t))
        proj = StepFunction(gram.grid, kvec @ basis.matrix)
        for k in (1, 2, 5):
            got = translation_shift(basis.vector(k), proj, gram)
            assert _close(got, -kvec[k - 1], 1e-10)

    def check_solver_zero_drift():
        gram, basis, problem, sgrid = _standard_setup(drift="zero")
        cs = sigma_coeffs(basis, problem.sigma, sgrid.time_grid, gram)
        rng = np.random.Generator(np.random.Philox(key=5))
        z = rng.standard_normal((4, basis.size, 1))
        path = solve_truncated(problem, basis, cs, sgrid, z)
        for n_idx, t in enumerate(sgrid.nodes):
            coef = cs.interval(0, 0, n_idx)
            expected = wick_exponential(z[:, :, 0], coef, float(coef @ coef)).value
            assert np.max(np.abs(path.values[:, n_idx, 0] - expected)) <= 1e-14 * max(
                1.0, np.max(np.abs(expected))
            )

    def check_solver_zero_sigma():
        gram, basis, problem, sgrid = _standard_setup(sig=0.0)
        cs = sigma_coeffs(basis, problem.sigma, sgrid.time_grid, gram)
        z = np.zeros((1, basis.size, 1))
        path = solve_truncated(problem, basis, cs, sgrid, z)
        euler = [1.0]
        for m in range(sgrid.steps):
            euler.append(euler[-1] + sgrid.dt * np.sin(euler[-1]))
        assert np.max(np.abs(path.values[0, :, 0] - np.array(euler))) <= 1e-14
        g = np.zeros((1, sgrid.steps, 1))
        ref = solve_reference(problem, sgrid, g, gram)
        assert np.max(np.abs(ref.values[0, :, 0] - np.array(euler))) <= 1e-14

    def check_reference_zero_drift():
        gram, basis, problem, sgrid = _standard_setup(drift="zero")
        frame = solver_frame(problem, basis, sgrid, gram)
        batch = sample(build_covariance(frame), 8, seed=21)
        z, g = split_solver_batch(batch, basis.size, sgrid)
        ref = solve_reference(problem, sgrid, g, gram)
        for n_idx in range(sgrid.steps + 1):
            ig = g[:, :n_idx, 0].sum(axis=1)
            emb_t = sgrid.nodes[n_idx]
            v = rect_inner(0, emb_t, 0, emb_t, gram.hurst) * 0.25
            expected = np.exp(ig - 0.5 * v)
            assert np.max(np.abs(ref.values[:, n_idx, 0] - expected)) <= 1e-12

    def check_sensitivities_closed_forms():
        gram, basis, problem, sgrid = _standard_setup(drift="zero")
        cs = sigma_coeffs(basis, problem.sigma, sgrid.time_grid, gram)
        rng = np.random.Generator(np.random.Philox(key=9))
        z = rng.standard_normal((4, basis.size, 1))
        path, sens = forward_sensitivities(problem, basis, cs, sgrid, z)
        for n_idx in range(sgrid.steps + 1):
            coef = cs.interval(0, 0, n_idx)
            expected = path.values[:, n_idx, 0][:, None] * coef[None, :]
            assert np.max(np.abs(sens[:, n_idx, 0, :] - expected)) <= 1e-12
        gram0, basis0, problem0, sgrid0 = _standard_setup(sig=0.0)
        cs0 = sigma_coeffs(basis0, problem0.sigma, sgrid0.time_grid, gram0)
        _, sens0 = forward_sensitivities(problem0, basis0, cs0, sgrid0, z)
        assert np.max(np.abs(sens0)) == 0.0

    def check_convergence_zero_sigma():
        gram, basis, problem, sgrid = _standard_setup(sig=0.0)
        report = l1_convergence(
            problem, basis, [1, 2, 4], sgrid, 200, seed=3, gram=gram, gronwall=False
        )
        assert all(r.l1_error == 0.0 for r in report.rungs)

    def check_bound_trivial():
        gram, basis, problem, sgrid = _standard_setup(sig=0.0)
        rec = appendix_bound_check(
            problem, basis, sgrid, gram, 0.0, 1.0, 1.0, 2.0, 2.0, 500, seed=13, k=2
        )
        assert rec.passed and rec.lhs == 0.0 and rec.rhs == 0.0
        gram, basis, problem, sgrid = _standard_setup()
        rec = appendix_bound_check(
            problem, basis, sgrid, gram, 0.0, 1.0, 1.0, 2.0, 2.0, 500, seed=13
        )
        assert rec.passed and rec.lhs <= 1e-8

    def check_gronwall_envelope_values():
        gram, basis, problem, sgrid = _standard_setup(drift="zero")
        zero_c = ProblemSpec(
            drift=make_drift("zero"),
            sigma=problem.sigma,
            init=np.array([0.0]),
            hurst=problem.hurst,
            horizon=problem.horizon,
        )
        assert gronwall_envelope(zero_c, 1.0) == 0.0
        gram, basis, problem, sgrid = _standard_setup(drift="sin")
        assert gronwall_envelope(problem, 1.0) == 4.0

    def check_fp_constant_testfn():
        gram, basis, problem, sgrid = _standard_setup()
        result = fokker_planck_residual(
            problem,
            basis,
            sgrid,
            gram,
            [get_test_function("const")],
            n=1000,
            bins=10,
            seed=17,
            k=2,
        )
        assert result.records[0].residual == 0.0

    def check_exact_projection_equivalence():
        gram, basis, problem, sgrid = _standard_setup()
        cs = sigma_coeffs(basis, problem.sigma, sgrid.time_grid, gram)
        frame = solver_frame(problem, basis, sgrid, gram)
        model = build_covariance(frame)
        batch = sample(model, 32, seed=29)
        z, g = split_solver_batch(batch, basis.size, sgrid)
        tr = solve_truncated(problem, basis, cs, sgrid, z)
        ref = solve_reference(problem, sgrid, g, gram)
        assert np.max(np.abs(tr.values - ref.values)) <= 1e-8

    return [
        ("phi_hilbert.rect_inner", check_rect_inner),
        ("phi_hilbert.inner_phi", check_inner_phi),
        ("phi_hilbert.phi_transform", check_phi_transform),
        ("phi_hilbert.gram_schmidt", check_gram_schmidt),
        ("gaussian_ensemble.identity_block", check_covariance_identity_block),
        ("gaussian_ensemble.cross_component", check_covariance_cross_component_zero),
        ("gaussian_ensemble.degenerate_frame", check_degenerate_frame_draws),
        ("gaussian_ensemble.sampling_moments", check_identity_sampling_moments),
        ("gaussian_ensemble.partial_sum_covariance", check_partial_sum_covariance),
        ("wick_core.sigma_coeffs", check_sigma_coeffs_zero_and_full),
        ("wick_core.wick_exponential", check_wick_exponential),
        ("wick_core.translation_shift", check_translation_shift),
        ("wz_solver.zero_drift", check_solver_zero_drift),
        ("wz_solver.zero_sigma", check_solver_zero_sigma),
        ("wz_solver.reference_zero_drift", check_reference_zero_drift),
        ("wz_solver.sensitivities", check_sensitivities_closed_forms),
        ("analysis.convergence_zero_sigma", check_convergence_zero_sigma),
        ("analysis.bound_trivial", check_bound_trivial),
        ("analysis.gronwall_envelope", check_gronwall_envelope_values),
        ("analysis.fp_constant", check_fp_constant_testfn),
        ("wz_solver.exact_projection_equivalence", check_exact_projection_equivalence),
    ]


def run_selftest(log=print) -> int:
    failures = []
    for name, fn in _checks():
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures.append(name)
            log(f"FAIL {name}: {exc}")
        else:
            log(f"ok   {name}")
    if failures:
        log(f"selftest failed: {', '.join(failures)}")
        return 1
    log("selftest passed")
    return 0
