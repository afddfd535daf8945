"""Acceptance suite: every gate the artifact must clear, each at its stated
tolerance, printing one line per criterion (run with -s to see them)."""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from fracwick.analysis import (
    appendix_bound_check,
    fokker_planck_residual,
    l1_convergence,
    solver_frame,
    split_solver_batch,
)
from fracwick.drifts import make_drift
from fracwick.gaussian_ensemble import build_covariance, cm_partial_sum_covariance, sample
from fracwick.phi_hilbert import (
    Hurst,
    PhiGram,
    StepFunction,
    TimeGrid,
    block_indicator_seeds,
    gram_schmidt,
    rect_inner,
)
from fracwick.testfns import get_test_function
from fracwick.wick_core import sigma_coeffs, wick_exponential
from fracwick.wz_solver import (
    ProblemSpec,
    SolverGrid,
    forward_sensitivities,
    solve_reference,
    solve_truncated,
)

from helpers import gh_abs_gap_moment, naive_truncated, quad_rect_inner

REPO = Path(__file__).resolve().parents[1]


def report(name, elapsed, budget=None):
    print(f"PASS {name} ({elapsed:.1f}s)")
    if budget is not None:
        assert elapsed < budget, f"{name} exceeded its {budget}s budget"


def default_problem(h=0.7, fine=128, steps=16):
    grid = TimeGrid.uniform(1.0, fine)
    hurst = Hurst(h)
    gram = PhiGram(grid, hurst)
    basis = gram_schmidt(block_indicator_seeds(grid, steps), steps, gram)
    problem = ProblemSpec(
        make_drift("sin"), (StepFunction.constant(grid, 0.5),), np.array([1.0]), hurst, 1.0
    )
    return gram, basis, problem, SolverGrid(steps, 1.0)


def test_inner_product_exactness():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    for _ in range(100):
        h = rng.uniform(0.51, 0.99)
        s, t = rng.uniform(0.02, 2.0, 2)
        got = rect_inner(0, t, 0, s, Hurst(h))
        closed = 0.5 * (t ** (2 * h) + s ** (2 * h) - abs(t - s) ** (2 * h))
        assert abs(got - closed) <= 1e-12 * max(abs(closed), 1e-3)
        assert abs(got - quad_rect_inner(0, t, 0, s, h)) <= 1e-8
    report("phi-space exactness (100 random triples, closed form + quadrature)",
           time.time() - t0, budget=10)


def test_basis_quality():
    t0 = time.time()
    for h in (0.6, 0.75, 0.9):
        grid = TimeGrid.uniform(1.0, 128)
        gram = PhiGram(grid, Hurst(h))
        basis = gram_schmidt(block_indicator_seeds(grid, 16), 16, gram)
        gvecs = gram.apply(basis.matrix.T).T
        inner = basis.matrix @ gvecs.T
        offdiag = np.max(np.abs(inner - np.diag(np.diag(inner))))
        assert offdiag <= 1e-10
        full = rect_inner(0, 1, 0, 1, Hurst(h))
        defects = [full - cm_partial_sum_covariance(basis, 1.0, 1.0, k=k) for k in range(17)]
        assert all(b < a for a, b in zip(defects, defects[1:]))
    report("basis quality (orthonormality 1e-10, strictly shrinking diagonal defect)",
           time.time() - t0, budget=30)


def test_solver_oracles():
    t0 = time.time()
    # (a) zero drift collapses to the interval exponential
    gram, basis, problem, sgrid = default_problem(steps=8, fine=64)
    zero_prob = ProblemSpec(make_drift("zero"), problem.sigma, problem.init,
                            problem.hurst, problem.horizon)
    coeffs = sigma_coeffs(basis, problem.sigma, sgrid.time_grid, gram)
    rng = np.random.default_rng(1)
    z = rng.standard_normal((32, basis.size, 1))
    path = solve_truncated(zero_prob, basis, coeffs, sgrid, z)
    for n in range(sgrid.steps + 1):
        vec = coeffs.interval(0, 0, n)
        expected = wick_exponential(z[:, :, 0], vec, float(vec @ vec)).value
        scale = max(1.0, float(np.max(np.abs(expected))))
        assert np.max(np.abs(path.values[:, n, 0] - expected)) <= 1e-14 * scale
    # (b) zero diffusion collapses to explicit Euler
    grid0 = gram.grid
    euler_prob = ProblemSpec(make_drift("sin"), (StepFunction.constant(grid0, 0.0),),
                             np.array([1.0]), problem.hurst, 1.0)
    coeffs0 = sigma_coeffs(basis, euler_prob.sigma, sgrid.time_grid, gram)
    path0 = solve_truncated(euler_prob, basis, coeffs0, sgrid, np.zeros((basis.size, 1)))
    euler = [1.0]
    for _ in range(sgrid.steps):
        euler.append(euler[-1] + sgrid.dt * math.sin(euler[-1]))
    assert np.max(np.abs(path0.values[:, 0] - euler)) <= 1e-14
    # (c) memoized recursion equals the direct exponential-time one
    for steps in (4, 6):
        gram_c, basis_c, problem_c, sgrid_c = default_problem(h=0.75, fine=24, steps=steps)
        basis_c = gram_schmidt(block_indicator_seeds(gram_c.grid, steps), 2, gram_c)
        coeffs_c = sigma_coeffs(basis_c, problem_c.sigma, sgrid_c.time_grid, gram_c)
        zc = np.random.default_rng(steps).standard_normal((basis_c.size, 1))
        got = solve_truncated(problem_c, basis_c, coeffs_c, sgrid_c, zc)
        expected = naive_truncated(problem_c, basis_c, gram_c, sgrid_c, zc)
        assert np.max(np.abs(got.values - expected)) <= 1e-12
    # (d) pathwise equivalence of the two solvers under exact projection
    gram_e, basis_e, problem_e, sgrid_e = default_problem(h=0.75, fine=64, steps=8)
    coeffs_e = sigma_coeffs(basis_e, problem_e.sigma, sgrid_e.time_grid, gram_e)
    model = build_covariance(solver_frame(problem_e, basis_e, sgrid_e, gram_e))
    worst = 0.0
    for seed in range(100):
        batch = sample(model, 8, seed=seed)
        zb, gb = split_solver_batch(batch, basis_e.size, sgrid_e)
        tr = solve_truncated(problem_e, basis_e, coeffs_e, sgrid_e, zb)
        ref = solve_reference(problem_e, sgrid_e, gb, gram_e)
        worst = max(worst, float(np.max(np.abs(tr.values - ref.values))))
    assert worst <= 1e-8
    report(f"solver oracles (closed forms 1e-14, naive 1e-12, coupling {worst:.1e} over 100 seeds)",
           time.time() - t0, budget=120)


def test_l1_convergence_desk_scale():
    t0 = time.time()
    gram, basis, problem, sgrid = default_problem()
    report_obj = l1_convergence(problem, basis, [1, 2, 4, 8, 16], sgrid, 10_000, 42, gram)
    assert len(report_obj.rungs) == 5
    assert report_obj.monotone_pass()
    assert report_obj.final_rung_exact(1e-8)
    assert report_obj.envelope_pass()
    assert all(r.gronwall_pass for r in report_obj.rungs)
    errs = ", ".join(f"{r.l1_error:.3g}" for r in report_obj.rungs)
    report(f"strong-error ladder nonincreasing, exact final rung [{errs}]",
           time.time() - t0, budget=300)


def test_moment_bound_grid():
    t0 = time.time()
    gram, basis, problem, sgrid = default_problem()
    n = 100_000
    for (p, p1, p2) in [(1, 2, 2), (2, 4, 4)]:
        for k in (1, 2, 4, 8):
            rec = appendix_bound_check(
                problem, basis, sgrid, gram, 0.0, 1.0, p, p1, p2, n, 42, k=k
            )
            assert rec.passed, (p, k, rec.lhs, rec.rhs)
            assert rec.ratio < 1.0
    # zero-drift cross-check of the estimator against the quadrature oracle
    coeffs = sigma_coeffs(basis, problem.sigma, sgrid.time_grid, gram)
    v_full = gram.norm_sq(problem.sigma[0])
    for k in (1, 4):
        rec = appendix_bound_check(problem, basis, sgrid, gram, 0.0, 1.0, 1, 2, 2, n, 42, k=k)
        vec = coeffs.interval(0, 0, sgrid.steps)[:k]
        v_k = float(vec @ vec)
        oracle = gh_abs_gap_moment(v_k, v_full, v_k, p=1)
        assert abs(rec.lhs - oracle) <= rec.lhs_ci
    report("exponential-gap moment bound (2 exponent pairs x 4 truncations, oracle-checked)",
           time.time() - t0, budget=120)


def test_weak_form_identity_desk_scale():
    t0 = time.time()
    gram, basis, problem, sgrid = default_problem()
    fns = [get_test_function(fid) for fid in ("bump_early", "bump_mid", "bump_wide")]
    result = fokker_planck_residual(problem, basis, sgrid, gram, fns, 100_000, 400, 42, k=4)
    for rec in result.records:
        assert rec.passed, (rec.testfn, rec.residual, rec.std_err)
    for chk in result.stein:
        assert chk.passed, (chk.name, chk.gap, chk.std_err)
    # zero-drift conditional regression matches its closed form per bin
    zero_prob = ProblemSpec(make_drift("zero"), problem.sigma, problem.init,
                            problem.hurst, problem.horizon)
    coeffs = sigma_coeffs(basis, zero_prob.sigma, sgrid.time_grid, gram)
    from fracwick.analysis import binned_means, equal_count_bins
    from fracwick.gaussian_ensemble import GaussianFrame

    kk = 4
    frame = GaussianFrame(gram, (tuple(basis.vectors()[:kk]),))
    batch = sample(build_covariance(frame), 50_000, seed=42)
    z = batch.draws[:, :, None]
    path, sens = forward_sensitivities(zero_prob, basis, coeffs, sgrid, z, k=kk)
    bins = 100
    for m in (4, 8, 16):
        x = path.values[:, m, 0]
        vec = coeffs.interval(0, 0, m)[:kk]
        idx = equal_count_bins(x, bins)
        for j in range(kk):
            got = binned_means(idx, sens[:, m, 0, j], bins)
            expected = vec[j] * binned_means(idx, x, bins)
            spread = np.array([
                sens[idx == b, m, 0, j].std(ddof=1) / math.sqrt(np.sum(idx == b))
                for b in range(bins)
            ])
            assert np.all(np.abs(got - expected) <= 3 * spread + 1e-12)
    resid = ", ".join(f"{r.residual / r.std_err:+.2f}se" for r in result.records)
    report(f"weak-form law identity (3 bumps [{resid}], calibrations, binned regression)",
           time.time() - t0, budget=300)


def test_gradient_check():
    t0 = time.time()
    rng = np.random.default_rng(99)
    step = 1e-5
    for trial in range(20):
        h = rng.uniform(0.55, 0.95)
        steps = int(rng.choice([4, 6, 8]))
        kk = int(rng.choice([2, 3]))
        drift = make_drift("sin") if rng.random() < 0.5 else make_drift(
            "tanh", {"amplitude": float(rng.uniform(0.5, 2.0)), "rate": float(rng.uniform(0.5, 1.5))}
        )
        grid = TimeGrid.uniform(1.0, 4 * steps)
        gram = PhiGram(grid, Hurst(h))
        basis = gram_schmidt(block_indicator_seeds(grid, steps), kk, gram)
        problem = ProblemSpec(
            drift,
            (StepFunction.constant(grid, float(rng.uniform(0.1, 0.8))),),
            np.array([float(rng.uniform(-2.0, 2.0))]),
            Hurst(h),
            1.0,
        )
        sgrid = SolverGrid(steps, 1.0)
        coeffs = sigma_coeffs(basis, problem.sigma, sgrid.time_grid, gram)
        z = rng.standard_normal((kk, 1))
        _, sens = forward_sensitivities(problem, basis, coeffs, sgrid, z)
        for j in range(kk):
            zp, zm = z.copy(), z.copy()
            zp[j, 0] += step
            zm[j, 0] -= step
            up = solve_truncated(problem, basis, coeffs, sgrid, zp).values[:, 0]
            dn = solve_truncated(problem, basis, coeffs, sgrid, zm).values[:, 0]
            fd = (up - dn) / (2 * step)
            scale = np.maximum(np.abs(sens[:, 0, j]), 1.0)
            assert np.max(np.abs(fd - sens[:, 0, j]) / scale) <= 1e-6
    report("gradient check (20 random configurations vs central differences)",
           time.time() - t0, budget=60)


def test_determinism_of_default_experiment(tmp_path):
    t0 = time.time()
    cfg = REPO / "configs" / "default.json"
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        r = subprocess.run(
            [sys.executable, "-m", "fracwick.cli", "run", str(cfg), "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert r.returncode == 0, r.stdout + r.stderr
        outs.append(out)
    names = ["convergence.csv", "gronwall.csv", "bound.csv", "fp.csv"]
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    rows = (outs[0] / "convergence.csv").read_text().splitlines()
    assert len(rows) == 2 + 5  # hash line, header, five ladder rungs
    report("byte-identical reruns of the shipped default experiment", time.time() - t0)
