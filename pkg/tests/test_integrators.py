import math

import numpy as np
import pytest
from scipy import stats

from koper_slow.errors import BlowUpError, DomainError, InputError
from koper_slow.integrators import (
    ensemble_terminal,
    integrate_em,
    integrate_rescaled,
    integrate_rk4_deterministic,
    read_trajectory_csv,
    rk4_steps,
)
from koper_slow.model import EQUILIBRIUM, EXAMPLE
from koper_slow.noise import StablePath, sample_uniform_path


def euler_reference(p, s0, t_end, dt):
    x, y, z = s0
    out = [(x, y, z)]
    for _ in range(int(round(t_end / dt))):
        g1 = p.k * y + (-x * x * x + 3.0 * x) - (p.lambda0 + p.lambda1 * z)
        g2 = x - 2.0 * y + z
        g3 = y - z
        x, y, z = x + dt * ((1.0 / p.eps) * g1), y + dt * (1.0 * g2), z + dt * (p.eps_hat * g3)
        out.append((x, y, z))
    return np.array(out)


def test_zero_noise_is_deterministic_euler():
    p = EXAMPLE.with_(sigma=0.0)
    traj = integrate_em(p, (0.0, 0.0, 0.0), None, 0.5, 1e-3)
    assert np.array_equal(traj.states, euler_reference(p, (0.0, 0.0, 0.0), 0.5, 1e-3))
    assert traj.seed is None and traj.scheme == "euler-maruyama"


def test_one_step_hand_value():
    path = StablePath(np.array([0.0, 1e-3]), np.array([0.0, 0.37]), 0, 1.6, seed=0)
    traj = integrate_em(EXAMPLE, (0.0, 0.0, 0.0), path, 1e-3, 1e-3)
    expected = 0.06 + 0.5 * 0.05 ** (-1 / 1.6) * 0.37
    assert traj.states[1, 0] == pytest.approx(expected, rel=1e-14)
    assert traj.states[1, 1] == 0.0 and traj.states[1, 2] == 0.0


def linear(s, p):
    x, y, z = s
    return -p.eps * x, -y, -z / p.eps_hat


def test_linear_oracle_em():
    p = EXAMPLE.with_(sigma=0.0)
    traj = integrate_em(p, (1.0, 2.0, -1.0), None, 1.0, 1e-4, drift_fn=linear)
    assert np.allclose(traj.final, np.exp(-1.0) * np.array([1.0, 2.0, -1.0]), atol=1e-3, rtol=0)


def test_em_strong_order_additive_noise():
    # dx = -x dt + sigma dL in the rescaled form; reference on the finest grid, same path
    p = EXAMPLE.with_(sigma=0.5, alpha=1.5)

    def lin(s, q):
        x, y, z = s
        return -x, -y / q.eps, -z / (q.eps * q.eps_hat)

    fine = 2.0**-12
    errs = []
    dts = [2.0**-6, 2.0**-7, 2.0**-8, 2.0**-9]
    for seed in range(20):
        path = sample_uniform_path(1.5, 0.0, 1.0, fine, seed)
        ref = integrate_rescaled(p, (1.0, 0.0, 0.0), path, 1.0, fine, drift_fn=lin).final[0]
        errs.append([abs(integrate_rescaled(p, (1.0, 0.0, 0.0), path, 1.0, dt, drift_fn=lin).final[0] - ref)
                     for dt in dts])
    mean = np.mean(errs, axis=0)
    slope = np.polyfit(np.log(dts), np.log(mean), 1)[0]
    assert slope >= 0.8


def test_rk4_order():
    f = lambda t, x, y, z: (-x, -2 * y, 0.5 * z)  # noqa: E731
    exact = np.array([math.exp(-1), math.exp(-2), math.exp(0.5)])
    errs = []
    for n in (10, 20, 40, 80):
        errs.append(np.max(np.abs(np.array(rk4_steps(f, 0.0, (1, 1, 1), n, 1.0 / n)[-1]) - exact)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 8) & (ratios < 32))


def test_rk4_figure_trajectory():
    traj = integrate_rk4_deterministic(EXAMPLE.with_(sigma=0.0), (0.0, 0.0, 0.0), 400.0, 1e-3)
    early = traj.times <= 5.0
    assert 1.8 <= traj.x[early].max() <= 2.2
    assert np.max(np.abs(np.array(traj.final) - 1.0)) < 1e-2


def test_rk4_equilibrium_constant():
    traj = integrate_rk4_deterministic(EXAMPLE.with_(sigma=0.0), EQUILIBRIUM, 100.0, 1e-2)
    assert np.max(np.abs(traj.states - 1.0)) <= 1e-12


def test_rk4_requires_zero_noise():
    with pytest.raises(DomainError):
        integrate_rk4_deterministic(EXAMPLE, (0, 0, 0), 1.0, 1e-3)


def test_rescaled_matches_original_in_rescaled_time():
    p = EXAMPLE.with_(sigma=0.0)
    orig = integrate_em(p, (0.0, 0.0, 0.0), None, 0.5, 1e-3)
    resc = integrate_rescaled(p, (0.0, 0.0, 0.0), None, 10.0, 1e-3 / 0.05)
    assert np.max(np.abs(orig.states - resc.states)) <= 1e-6
    assert np.allclose(resc.times * 0.05, orig.times)


def test_rescaled_equilibrium_constant():
    traj = integrate_rescaled(EXAMPLE.with_(sigma=0.0), EQUILIBRIUM, None, 5.0, 1e-2)
    assert np.all(traj.states == 1.0)


def test_rescaled_equal_in_law():
    p = EXAMPLE.with_(alpha=1.5, sigma=0.5)
    n = 2000
    resc_paths = [sample_uniform_path(1.5, 0.0, 1.0, 1e-3, seed) for seed in range(n)]
    orig_paths = [sample_uniform_path(1.5, 0.0, 0.05, 5e-5, seed) for seed in range(n, 2 * n)]
    a = ensemble_terminal(p, (0.0, 0.0, 0.0), resc_paths, 1.0, 1e-3, rescaled=True)[:, 0]
    b = ensemble_terminal(p, (0.0, 0.0, 0.0), orig_paths, 0.05, 5e-5)[:, 0]
    a, b = a[np.isfinite(a)], b[np.isfinite(b)]
    assert min(a.size, b.size) > 0.99 * n
    assert stats.ks_2samp(a, b, method="asymp").pvalue > 0.01


def test_ensemble_matches_single_runs():
    p = EXAMPLE.with_(alpha=1.7)
    paths = [sample_uniform_path(1.7, 0.0, 0.2, 1e-3, s) for s in range(3)]
    term = ensemble_terminal(p, (0.1, 0.2, 0.3), paths, 0.2, 1e-3)
    for row, path in zip(term, paths):
        assert np.allclose(row, integrate_em(p, (0.1, 0.2, 0.3), path, 0.2, 1e-3).final, rtol=1e-12, atol=1e-12)


def test_zero_noise_consistency_ladder():
    p = EXAMPLE.with_(sigma=0.0)
    dists = []
    for dt in (1e-2, 1e-3, 1e-4):
        em = integrate_rescaled(p, (0.0, 0.0, 0.0), None, 10.0, dt)
        rk = integrate_rk4_deterministic(p, (0.0, 0.0, 0.0), 10.0, dt)
        dists.append(np.max(np.abs(em.states - rk.states)))
    assert dists[0] > dists[1] > dists[2]


def test_determinism_and_csv(tmp_path):
    path = sample_uniform_path(1.6, 0.0, 1.0, 1e-3, 3)
    a = integrate_em(EXAMPLE, (0, 0, 0), path, 1.0, 1e-3)
    b = integrate_em(EXAMPLE, (0, 0, 0), path, 1.0, 1e-3)
    assert np.array_equal(a.states, b.states)
    f = tmp_path / "t.csv"
    a.to_csv(f)
    assert f.read_text().startswith("t,x,y,z\n")
    t, s = read_trajectory_csv(f)
    assert np.array_equal(s, a.states) and np.array_equal(t, a.times)


def test_blow_up_guard_on_large_jump():
    times = np.array([0.0, 1e-3, 2e-3, 3e-3])
    path = StablePath(times, np.array([0.0, 0.0, 1e4, 1e4]), 0, 1.6)
    p = EXAMPLE
    with pytest.raises(BlowUpError) as info:
        integrate_em(p, (0.0, 0.0, 0.0), path, 3e-3, 1e-3)
    assert info.value.step == 3


def test_tamed_survives_large_jump():
    times = 1e-3 * np.arange(101)
    vals = np.where(times >= 2e-3, 50.0, 0.0)
    path = StablePath(times, vals, 0, 1.6)
    traj = integrate_em(EXAMPLE, (0.0, 0.0, 0.0), path, 0.1, 1e-3, tamed=True)
    assert np.all(np.isfinite(traj.states)) and traj.meta["tamed"]


def test_input_errors():
    path = sample_uniform_path(1.6, 0.0, 1.0, 1e-3, 0)
    with pytest.raises(InputError):
        integrate_em(EXAMPLE, (0, 0, 0), path, 2.0, 1e-3)  # not covered
    with pytest.raises(InputError):
        integrate_em(EXAMPLE, (0, 0, 0), path, 1.0, 1.5e-3)  # not a multiple
    with pytest.raises(InputError):
        integrate_em(EXAMPLE, (0, 0, 0), path, 0.5, 5e-4)  # misaligned with path grid
    with pytest.raises(InputError):
        integrate_em(EXAMPLE, (0, 0, 0), None, 0.5, 1e-3)
    with pytest.raises(InputError):
        integrate_em(EXAMPLE.with_(alpha=1.5), (0, 0, 0), path, 0.5, 1e-3)
