"""Acceptance criteria, each checked at its stated tolerance and runtime budget.

Every criterion prints one ``PASS``/``FAIL`` line. Criteria that are split
into parts print one line per part.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from fpdcontrol import IdealSpec, LinearGaussianModel, synthesize_finite, trace_boundary
from fpdcontrol.cli import main
from fpdcontrol.config import load_config
from fpdcontrol.experiments import run_mismatch_experiment
from fpdcontrol.finite import PolicyStep, closed_loop_moment_arrays
from fpdcontrol.learning import LearningSchedule, learning_plan, learning_run
from fpdcontrol.regions import ParamSlice2D, grid_scan, slice_indicator
from fpdcontrol.safety import SAFE, UNSAFE, safety_region, safety_sup
from fpdcontrol.simulate import derive_rng, run_ensemble_raw, simulate_trajectory
from fpdcontrol.stationary import (
    DesignModel,
    mismatch_closed_loop,
    policy_from_precision,
    solve_riccati,
    stationary_policy,
    stationary_state_cov,
)
from tests.conftest import random_spd, random_system
from tests.oracles import lqr_backward_gains, scalar_quadratic_root
from tests.test_continuation import mixed_neighbourhood

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def report(request):
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(label: str, ok: bool, detail: str):
        line = f"[acceptance] {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:
            print(line)
        return ok

    return emit


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_1_lqr_equivalence(report):
    rng = np.random.default_rng(20190625)
    worst = 0.0
    with Timer() as tm:
        for _ in range(50):
            n, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            A, B = random_system(rng, n, m)
            Sx, Su = random_spd(rng, n), random_spd(rng, m)
            _, steps = synthesize_finite(LinearGaussianModel(A, B, np.eye(n)), IdealSpec.zero_mean(Sx, Su), 50)
            gains, _ = lqr_backward_gains(A, B, np.linalg.inv(Sx), np.linalg.inv(Su), 50)
            for s, K in zip(steps, gains):
                worst = max(worst, np.linalg.norm(s.feedback_gain + K) / max(np.linalg.norm(K), 1e-300))
    ok = worst <= 1e-8 and tm.elapsed < 10
    report("criterion 1 (LQR equivalence)", ok, f"max rel err {worst:.2e}, {tm.elapsed:.2f}s")
    assert ok


def test_criterion_2_scalar_riccati(report, plant, ideal, mismatch_design):
    with Timer() as tm:
        oracle = scalar_quadratic_root(1.27, 0.04, 5.0, 2.5)
        # the quadratic 0.0016 w^2 - 1.54025 w - 12.5 = 0, solved directly
        direct = (1.54025 + np.sqrt(1.54025**2 + 4 * 0.0016 * 12.5)) / (2 * 0.0016)
        W = solve_riccati(plant, ideal)[0, 0]
        k_exact = mismatch_closed_loop(plant, plant, stationary_policy(plant, ideal))[0, 0]
        pol = stationary_policy(mismatch_design, ideal)
        k_mis = mismatch_closed_loop(plant, mismatch_design, pol)[0, 0]
    rel = abs(W - direct) / direct
    ok = (rel <= 1e-9 and abs(oracle - direct) / direct <= 1e-12 and abs(abs(k_exact) - 0.7833) <= 1e-3
          and abs(abs(k_mis) - 0.3027) <= 1e-3 and tm.elapsed < 1)
    report("criterion 2 (scalar Riccati)", ok,
           f"W={W:.10g} rel err {rel:.1e}, |a-bk|={abs(k_exact):.6f}, mismatch {abs(k_mis):.6f}, {tm.elapsed:.3f}s")
    assert ok


def test_criterion_3_woodbury(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    with Timer() as tm:
        for _ in range(1000):
            n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            design = DesignModel(rng.standard_normal((n, n)), rng.standard_normal((n, m)), np.eye(n))
            Su_ideal = random_spd(rng, m, 1.0)
            W = random_spd(rng, n, 1.0)
            ideal = IdealSpec.zero_mean(np.eye(n), Su_ideal)
            gamma = policy_from_precision(design, ideal, W).gamma_cov_inv
            direct = np.linalg.inv(design.B @ Su_ideal @ design.B.T + np.linalg.inv(W))
            worst = max(worst, float(np.max(np.abs(gamma - direct))))
    ok = worst <= 1e-10 and tm.elapsed < 5
    report("criterion 3 (Woodbury)", ok, f"max abs diff {worst:.2e}, {tm.elapsed:.2f}s")
    assert ok


def test_criterion_4_finite_horizon_ensemble(report, plant, ideal):
    with Timer() as tm:
        _, steps = synthesize_finite(plant, ideal, 100)
        stats = run_ensemble_raw(plant, steps, [1.0], 100, 100_000, seed=20190625, workers=4)
        means, covs = closed_loop_moment_arrays(plant, steps, [1.0], [[0.0]], 100)
        zero = [PolicyStep(np.zeros((1, 1)), np.zeros(1), s.input_cov) for s in steps]
        open_loop = run_ensemble_raw(plant, zero, [1.0], 20, 10_000, seed=1)
    z = np.abs(stats.mean[1:, 0] - means[1:, 0]) / stats.se[1:, 0]
    ok_mean = bool(np.all(z <= 4))
    var_T = stats.cov[-1, 0, 0]
    var_se = var_T * np.sqrt(2.0 / (stats.runs - 1))
    s_inf = stationary_state_cov(plant, plant, stationary_policy(plant, ideal))[0, 0]
    ok_var = abs(var_T - s_inf) <= 4 * var_se
    ok_open = abs(open_loop.mean[20, 0]) > 10.0
    ok_time = tm.elapsed < 60
    report("criterion 4a (means within 4 SE of propagated prediction)", ok_mean and ok_time,
           f"max |z| {z.max():.2f}, {tm.elapsed:.1f}s")
    report("criterion 4b (final variance vs stationary value)", ok_var,
           f"sample var at t=100 {var_T:.4f} +- {var_se:.4f}, stationary {s_inf:.4f}, "
           f"time-varying prediction {covs[-1, 0, 0]:.4f}; mid-horizon t=50 sample var {stats.cov[50, 0, 0]:.4f}")
    report("criterion 4c (open loop diverges)", ok_open, f"|mean x_20| = {abs(open_loop.mean[20, 0]):.2f}")
    assert ok_mean and ok_open and ok_time
    assert ok_var, "final-step variance of the finite-horizon loop differs from the stationary value"


def test_criterion_5_mismatch(report):
    cfg = load_config(CONFIGS / "mismatch.cfg")
    with Timer() as tm:
        res = run_mismatch_experiment(cfg, workers=4)
    conv = all(abs(st.mean[-1, 0]) <= 4 * st.se[-1, 0] for st in (res.exact, res.design))
    ratio = res.mean_abs_input_ratio
    ok_ratio = 1.6 <= ratio <= 2.4
    ok = conv and ok_ratio and tm.elapsed < 120
    report("criterion 5 (mismatch input ratio)", ok,
           f"means at t=100 {res.exact.mean[-1, 0]:.4f}/{res.design.mean[-1, 0]:.4f} (converged={conv}), "
           f"time-averaged E|u| ratio {ratio:.4f}, gain ratio {res.gain_ratio:.4f}, {tm.elapsed:.1f}s")
    assert conv and tm.elapsed < 120
    assert ok_ratio, f"time-averaged |u| ratio {ratio:.4f} is outside [1.6, 2.4]"


def test_criterion_6_convergence_region(report, plant, ideal):
    with Timer() as tm:
        design = DesignModel(plant.A, 0.02, plant.noise_cov)
        slc = ParamSlice2D("true.B", "design.B", (0.0, 0.12), (0.005, 0.1), plant, design)
        ind = slice_indicator(slc, ideal)
        grid = grid_scan(slc, ind, 200)
        curves = [trace_boundary(slc, ind, h, step=0.01, tol=1e-10) for h in ((0.005, 0.02), (0.1, 0.02))]
        tol = 1e-9
        circle = trace_boundary(None, lambda x, y: np.hypot(x, y), (0.3, 0.0), step=0.02, tol=tol,
                                bounds=((-2, -2), (2, 2)))
    starts = [c.points[c.start_index] for c in curves]
    errs = [abs(starts[0][0] - 0.011166), abs(starts[1][0] - 0.093875)]
    consistent = all(mixed_neighbourhood(grid, p, pad=0) for c in curves for p in c.points)
    radial = float(np.max(np.abs(np.hypot(circle.points[:, 0], circle.points[:, 1]) - 1)))
    ok = max(errs) <= 1e-4 and consistent and radial <= tol and circle.closed and tm.elapsed < 30
    report("criterion 6 (convergence region)", ok,
           f"crossings {starts[0][0]:.8f}, {starts[1][0]:.8f}; grid-consistent={consistent}; "
           f"circle radial err {radial:.1e}; {tm.elapsed:.1f}s")
    assert ok


def test_criterion_7_safety(report, plant, ideal):
    with Timer() as tm:
        pol = stationary_policy(plant, ideal)
        _, sup_p, _ = safety_sup(plant, plant, pol, [1.0], 3.0, 3000)
        mc = run_ensemble_raw(plant, pol, [1.0], 200, 100_000, seed=7, workers=4, exceed_threshold=3.0)
        mc_sup = float(mc.exceed_prob[1:].max())
        slc = ParamSlice2D("design.A", "design.B", (1.27, 2.0), (0.04, 0.5), plant,
                           DesignModel(plant.A, plant.B, plant.noise_cov))
        grid = safety_region(slc, plant, ideal, [1.0], 3.0, 0.1, 3000, resolution=2)
    ok_p = abs(sup_p - 0.016) <= 0.002
    ok_mc = abs(mc_sup - sup_p) <= 0.01
    ok_lab = grid.labels[0, 0] == SAFE and grid.labels[0, 1] == UNSAFE and grid.values[0, 1] > 1
    ok = ok_p and ok_mc and ok_lab and tm.elapsed < 120
    report("criterion 7 (safety)", ok,
           f"analytic sup p {sup_p:.6f}, MC {mc_sup:.5f}, labels exact={grid.labels[0, 0]} "
           f"unstable={grid.labels[0, 1]} (rho {grid.values[0, 1]:.3f}), {tm.elapsed:.1f}s")
    assert ok


def test_criterion_8_learning(report, plant, ideal):
    with Timer() as tm:
        plan = learning_plan(plant, ideal, LearningSchedule(0, 0.5, 0, 0.5, perturbation_seed=3), 100)
        dev = float(np.max(np.abs(plan.rho[39:] - 0.78335)))
        run = learning_run(plant, ideal, LearningSchedule(), 100, [1.0], derive_rng(11, 0))
        ref = simulate_trajectory(plant, stationary_policy(plant, ideal), [1.0], derive_rng(11, 0), 100)
        same = np.array_equal(run.trajectory.states, ref.states) and np.array_equal(run.trajectory.inputs, ref.inputs)
    ok = dev <= 1e-3 and same and tm.elapsed < 30
    report("criterion 8 (learning)", ok, f"max |rho_t - 0.78335| for t>=40 {dev:.2e}, identical={same}, {tm.elapsed:.2f}s")
    assert ok


CLI_CASES = [
    ("synthesize", "scalar_example.cfg", ["out.csv"]),
    ("simulate", "scalar_example.cfg", ["out.csv", "out_hist.csv"]),
    ("mismatch", "mismatch.cfg", ["out.csv"]),
    ("region-convergence", "region_convergence.cfg", ["out.csv", "boundary.csv", "boundary_2.csv"]),
    ("region-safety", "region_safety.cfg", ["out.csv"]),
    ("learn", "learning.cfg", ["out.csv"]),
]


def test_criterion_9_determinism(report, tmp_path):
    mismatched = []
    with Timer() as tm:
        for cmd, cfg, files in CLI_CASES:
            blobs = []
            for k, workers in enumerate((1, 1, 4)):
                d = tmp_path / f"{cmd}_{k}"
                d.mkdir()
                code = main([cmd, "--config", str(CONFIGS / cfg), "--out", str(d / "out.csv"),
                             "--workers", str(workers)]
                            + (["--boundary-out", str(d / "boundary.csv")] if cmd == "region-convergence" else []))
                assert code == 0
                blobs.append([(d / f).read_bytes() for f in files])
            if not (blobs[0] == blobs[1] == blobs[2]):
                mismatched.append(cmd)
    ok = not mismatched
    report("criterion 9 (determinism)", ok,
           f"{len(CLI_CASES)} subcommands x 3 runs (workers 1, 1, 4); mismatched: {mismatched or 'none'}; {tm.elapsed:.1f}s")
    assert ok
