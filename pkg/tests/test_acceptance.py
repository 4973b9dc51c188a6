"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test records a one-line outcome that is printed in the terminal
summary as ``criterion N: PASS/FAIL``.
"""
import cmath
import math
import time

import numpy as np
import pytest

from koper_slow.config import ExperimentConfig
from koper_slow.experiments import (
    LP_DEFAULTS,
    MANIFOLD_GRID,
    TRACKING_DEFAULTS,
    cutoff_params,
    cutoff_setup,
    rerun_from_manifest,
    run_preset,
    tracking_states,
)
from koper_slow.manifold import (
    check_invariance,
    exponential_tracking,
    lp_iterate,
    manifold_graph,
    tail_ratios,
)
from koper_slow.model import EQUILIBRIUM, EXAMPLE, classify_equilibrium, drift, jacobian
from koper_slow.noise import ks_self_similarity, sample_uniform_path


def cubic_roots(b, c, d):
    """Roots of x^3 + b x^2 + c x + d (Cardano, independent of numpy)."""
    p = c - b * b / 3
    q = 2 * b**3 / 27 - b * c / 3 + d
    u = (-q / 2 + cmath.sqrt((q / 2) ** 2 + (p / 3) ** 3)) ** (1 / 3)
    w = complex(-0.5, math.sqrt(3) / 2)
    return [w**k * u - p / (3 * w**k * u) - b / 3 for k in range(3)]


def test_criterion_01_equilibrium(acceptance):
    t0 = time.perf_counter()
    g = drift(EQUILIBRIUM, EXAMPLE)
    elapsed = time.perf_counter() - t0
    worst = max(abs(v) for v in g)
    ok = worst <= 1e-14 and elapsed < 1e-3
    acceptance(1, ok, f"max |g(P)| = {worst:.1e}, {elapsed * 1e6:.0f} us")
    assert ok


def test_criterion_02_linearization(acceptance):
    t0 = time.perf_counter()
    worst_td = 0.0
    for eps in (0.01, 0.05, 0.1):
        rep = classify_equilibrium(jacobian(EQUILIBRIUM, EXAMPLE.with_(eps=eps)))
        worst_td = max(worst_td, abs(rep.trace + 3 * eps), abs(rep.det + 5 * eps**2))
    J = jacobian(EQUILIBRIUM, EXAMPLE)
    rep = classify_equilibrium(J)
    # characteristic polynomial x^3 - tr x^2 + m2 x - det
    m2 = 0.5 * (np.trace(J) ** 2 - np.trace(J @ J))
    oracle = cubic_roots(-np.trace(J), m2, -np.linalg.det(J))
    key = lambda z: (round(z.real, 9), round(z.imag, 9))  # noqa: E731
    eig_err = max(abs(a - b) for a, b in zip(sorted(rep.eigenvalues, key=key), sorted(oracle, key=key)))
    elapsed = time.perf_counter() - t0
    ok = worst_td <= 1e-12 and eig_err <= 1e-8 and max(e.real for e in rep.eigenvalues) < 0 and elapsed < 1
    acceptance(2, ok, f"trace/det err {worst_td:.1e}, eigenvalue err {eig_err:.1e}, {elapsed:.3f} s")
    assert ok


def test_criterion_03_self_similarity(acceptance):
    t0 = time.perf_counter()
    pvals = [ks_self_similarity(1.5, 0.05, 10_000, seed)[1] for seed in (0, 1, 2)]
    elapsed = time.perf_counter() - t0
    ok = sum(p > 0.01 for p in pvals) >= 2 and elapsed < 30
    acceptance(3, ok, "KS p-values " + ", ".join(f"{p:.3f}" for p in pvals) + f", {elapsed:.1f} s")
    assert ok


def test_criterion_04_gaussian(acceptance):
    t0 = time.perf_counter()
    dt = 0.01
    path = sample_uniform_path(2.0, 0.0, 1000.0, dt, 0)
    inc = np.diff(path.values[path.grid >= 0])
    var = float(np.var(inc, ddof=1) / dt)
    elapsed = time.perf_counter() - t0
    ok = inc.size == 100_000 and abs(var - 2) <= 0.05 * 2 and elapsed < 30
    acceptance(4, ok, f"variance per unit time {var:.4f} from {inc.size} increments, {elapsed:.2f} s")
    assert ok


def test_criterion_05_deterministic_figure(acceptance, tmp_path):
    t0 = time.perf_counter()
    art = run_preset(ExperimentConfig("fig3", out_dir=str(tmp_path), plot=False))
    elapsed = time.perf_counter() - t0
    xmax = art.results["x_max_0_5"]
    dist = max(abs(v - 1) for v in art.results["final"])
    ok = 1.8 <= xmax <= 2.2 and dist <= 1e-2 and elapsed < 60
    acceptance(5, ok, f"max x on [0,5] = {xmax:.4f}, |u(400) - P| = {dist:.1e}, {elapsed:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def setup():
    p = cutoff_params(ExperimentConfig("manifold"))
    return cutoff_setup(p, 0, 0.5, LP_DEFAULTS["trunc_tol"])


def lp_kwargs():
    return {"dt": LP_DEFAULTS["lp_dt"], "tol": LP_DEFAULTS["tol"], "trunc_tol": LP_DEFAULTS["trunc_tol"]}


def test_criterion_06_contraction(acceptance, setup):
    g = MANIFOLD_GRID
    nodes = [(y, z) for y in (g["y_min"], 0.5 * (g["y_min"] + g["y_max"]), g["y_max"])
             for z in (g["z_min"], 0.5 * (g["z_min"] + g["z_max"]), g["z_max"])]
    worst_tail, worst_res, worst_time = 0.0, 0.0, 0.0
    for y0, z0 in nodes:
        t0 = time.perf_counter()
        res = lp_iterate(setup, y0, z0, **lp_kwargs())
        worst_time = max(worst_time, time.perf_counter() - t0)
        worst_tail = max(worst_tail, float(tail_ratios(res.ratios).max()))
        worst_res = max(worst_res, res.residual)
    ok = (abs(setup.rho - 0.5) < 1e-12 and worst_tail <= 0.6 and worst_res <= 2 * LP_DEFAULTS["tol"]
          and worst_time < 60)
    acceptance(6, ok, f"rho {setup.rho:.3f}, K_est {setup.K:g}, max tail ratio {worst_tail:.3f}, "
                      f"max residual {worst_res:.1e} over {len(nodes)} nodes, {worst_time:.2f} s/node")
    assert ok


def test_criterion_07_lipschitz(acceptance, setup):
    g = MANIFOLD_GRID
    t0 = time.perf_counter()
    graph = manifold_graph(setup, (g["y_min"], g["y_max"]), (g["z_min"], g["z_max"]), 11, 11, **lp_kwargs())
    elapsed = time.perf_counter() - t0
    ok = (not graph.failed and np.all(np.isfinite(graph.h_values))
          and graph.lip_measured <= 1.1 * graph.lip_bound and elapsed < 600)
    acceptance(7, ok, f"lip_measured {graph.lip_measured:.4f} <= 1.1 x {graph.lip_bound:.4f}, {elapsed:.1f} s")
    assert ok


LADDER = ((4e-4, 1e-6, 1e-6), (2e-4, 1e-7, 1e-7), (1e-4, 1e-8, 1e-8))


def test_criterion_08_invariance(acceptance, setup):
    y0, z0 = TRACKING_DEFAULTS["y0"], TRACKING_DEFAULTS["z0"]
    t0 = time.perf_counter()
    defects = []
    for dt, tol, tt in LADDER:
        lp = {"dt": dt / 4, "tol": tol, "trunc_tol": tt}
        graph = manifold_graph(setup, (y0, y0), (z0, z0), 1, 1, **lp)
        defects.append(check_invariance(setup, graph, y0, z0, 0.5, dt))
    elapsed = time.perf_counter() - t0
    budget = 10 * sum(LADDER[-1])
    decreasing = all(a > b for a, b in zip(defects, defects[1:]))
    ok = decreasing and defects[-1] <= budget and elapsed < 600
    acceptance(8, ok, "defects " + ", ".join(f"{d:.3g}" for d in defects)
               + f" (budget {budget:.1e} at the finest level), {elapsed:.1f} s")
    assert decreasing
    assert defects[-1] <= budget


def test_criterion_09_tracking(acceptance):
    t0 = time.perf_counter()
    slopes = []
    for seed in (0, 1, 2):
        cfg = ExperimentConfig("tracking", seed=seed)
        p = cutoff_params(cfg)
        t_end, dt = TRACKING_DEFAULTS["t_end"], TRACKING_DEFAULTS["dt"]
        s = cutoff_setup(p, seed, t_end, LP_DEFAULTS["trunc_tol"])
        u_on, u_off = tracking_states(cfg, s, lp_kwargs())
        slopes.append(exponential_tracking(s, u_on, u_off, t_end, dt).c2_fit)
    elapsed = time.perf_counter() - t0
    ok = all(c < 0 for c in slopes) and elapsed < 300
    acceptance(9, ok, "c2_fit " + ", ".join(f"{c:.1f}" for c in slopes) + f", {elapsed:.1f} s")
    assert ok


def test_criterion_10_reproducibility(acceptance, tmp_path):
    t0 = time.perf_counter()
    mismatched = []
    n_files = 0
    for preset in ("fig1", "fig2", "fig3", "manifold", "tracking", "custom"):
        first, second = tmp_path / preset / "a", tmp_path / preset / "b"
        art = run_preset(ExperimentConfig(preset, seed=3, out_dir=str(first)))
        again = rerun_from_manifest(art.manifest, out_dir=str(second))
        if sorted(art.csv_files) != sorted(again.csv_files) or not art.csv_files:
            mismatched.append(preset)
        for name in art.csv_files:
            n_files += 1
            if (first / name).read_bytes() != (second / name).read_bytes():
                mismatched.append(f"{preset}/{name}")
    elapsed = time.perf_counter() - t0
    ok = not mismatched and elapsed < 300
    summary = f"{n_files} CSV files byte-identical on rerun" if not mismatched else f"mismatch: {mismatched}"
    acceptance(10, ok, f"{summary}, {elapsed:.1f} s")
    assert ok
