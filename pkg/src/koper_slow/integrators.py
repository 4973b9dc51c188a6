"""Fixed-step integrators for the stochastic, rescaled and deterministic systems.

Noise increments are read from a pre-sampled :class:`~koper_slow.noise.StablePath`
instead of being drawn inside the stepper, so the same path can drive the SDE
and the random ODE.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, DomainError, InputError
from .model import KoperParams, State, drift as koper_drift
from .noise import StablePath

GUARD = 1e9

EULER_MARUYAMA = "euler-maruyama"
RK4_DETERMINISTIC = "rk4-deterministic"
RK4_RANDOM = "rk4-random-ode"


@dataclass(eq=False)
class Trajectory:
    """States sampled on a uniform time grid."""

    times: np.ndarray
    states: np.ndarray  # shape (n, 3)
    params: KoperParams
    scheme: str
    seed: int | None
    dt: float
    meta: dict = field(default_factory=dict)

    @property
    def x(self):
        return self.states[:, 0]

    @property
    def y(self):
        return self.states[:, 1]

    @property
    def z(self):
        return self.states[:, 2]

    @property
    def final(self) -> State:
        return State(*map(float, self.states[-1]))

    def __len__(self):
        return len(self.times)

    def to_csv(self, fp):
        """Write ``t,x,y,z`` rows with round-trip float formatting."""
        own = isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__")
        f = open(fp, "w", newline="") if own else fp
        try:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["t", "x", "y", "z"])
            for t, (x, y, z) in zip(self.times, self.states):
                w.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}", f"{z:.17g}"])
        finally:
            if own:
                f.close()


def read_trajectory_csv(fp):
    """Return ``(times, states)`` from a ``t,x,y,z`` CSV."""
    data = np.loadtxt(fp, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:4]


def _n_steps(t_end, dt):
    if not dt > 0:
        raise InputError("dt must be positive")
    if t_end < 0:
        raise InputError("t_end must be non-negative")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise InputError(f"t_end={t_end} is not a multiple of dt={dt}")
    return n


def _noise_increments(path, times):
    """Path increments over consecutive ``times``; times must be grid points."""
    if path is None:
        raise InputError("a noise path is required when sigma > 0")
    if not path.covers(times[0], times[-1]):
        raise InputError(
            f"path support [{path.t_min}, {path.t_max}] does not cover "
            f"[{times[0]}, {times[-1]}]"
        )
    idx = np.searchsorted(path.grid, times)
    idx = np.clip(idx, 0, path.grid.size - 1)
    near = np.minimum(
        np.abs(path.grid[idx] - times), np.abs(path.grid[np.maximum(idx - 1, 0)] - times)
    )
    if np.any(near > path._tol):
        raise InputError("integration grid is not aligned with the path grid")
    return path.increments(times)


def _euler(p, s0, path, t_end, dt, scale, noise_scale, drift_fn, tamed, scheme):
    n = _n_steps(t_end, dt)
    times = dt * np.arange(n + 1)
    if p.sigma > 0:
        if path is not None and path.alpha != p.alpha:
            raise InputError(f"path alpha {path.alpha} differs from params alpha {p.alpha}")
        dL = (noise_scale * _noise_increments(path, times)).tolist()
    else:
        dL = [0.0] * n
    a1, a2, a3 = scale
    x, y, z = map(float, s0)
    if not all(map(math.isfinite, (x, y, z))):
        raise InputError("initial state must be finite")
    out = [(x, y, z)]
    for i in range(n):
        g1, g2, g3 = drift_fn((x, y, z), p)
        f1, f2, f3 = a1 * g1, a2 * g2, a3 * g3
        if tamed:
            damp = 1.0 + dt * math.sqrt(f1 * f1 + f2 * f2 + f3 * f3)
            f1, f2, f3 = f1 / damp, f2 / damp, f3 / damp
        x, y, z = x + dt * f1 + dL[i], y + dt * f2, z + dt * f3
        if not (abs(x) + abs(y) + abs(z) <= GUARD):
            raise BlowUpError(
                f"state left the guard |u| <= {GUARD:g} at step {i + 1} (t={times[i + 1]:.6g})",
                step=i + 1,
                time=float(times[i + 1]),
            )
        out.append((x, y, z))
    seed = path.seed if (path is not None and p.sigma > 0) else None
    return Trajectory(
        times, np.array(out), p, scheme, seed, dt, {"tamed": bool(tamed)}
    )


def integrate_em(p: KoperParams, s0, path: StablePath | None, t_end, dt,
                 drift_fn=koper_drift, tamed=False) -> Trajectory:
    """Explicit Euler-Maruyama for the original-time stochastic system.

    ``x += dt/eps*g1 + sigma*eps**(-1/alpha)*dL``, ``y += dt*g2``,
    ``z += dt*eps_hat*g3``.  With ``tamed=True`` the drift vector ``f`` is
    replaced by ``f / (1 + dt*|f|)``.
    """
    noise = p.sigma * p.eps ** (-1.0 / p.alpha)
    return _euler(p, s0, path, t_end, dt, (1.0 / p.eps, 1.0, p.eps_hat),
                  noise, drift_fn, tamed, EULER_MARUYAMA)


def integrate_rescaled(p: KoperParams, s0, path: StablePath | None, t_end, dt,
                       drift_fn=koper_drift, tamed=False) -> Trajectory:
    """Euler-Maruyama for the time-rescaled stochastic system.

    ``dx = g1 dt + sigma dL``, ``dy = eps*g2 dt``, ``dz = eps*eps_hat*g3 dt``;
    equal in law to :func:`integrate_em` after ``t -> eps*t``.
    """
    return _euler(p, s0, path, t_end, dt, (1.0, p.eps, p.eps * p.eps_hat),
                  p.sigma, drift_fn, tamed, EULER_MARUYAMA)


def ensemble_terminal(p: KoperParams, s0, paths, t_end, dt, rescaled=False,
                      drift_fn=koper_drift):
    """Terminal states of many Euler-Maruyama runs, stepped together.

    Same update as :func:`integrate_em` (or :func:`integrate_rescaled`),
    vectorised across ``paths``.  Non-finite or guard-crossing runs come back
    as ``nan`` rows instead of raising.
    """
    n = _n_steps(t_end, dt)
    times = dt * np.arange(n + 1)
    if rescaled:
        a1, a2, a3, noise = 1.0, p.eps, p.eps * p.eps_hat, p.sigma
    else:
        a1, a2, a3 = 1.0 / p.eps, 1.0, p.eps_hat
        noise = p.sigma * p.eps ** (-1.0 / p.alpha)
    dL = noise * np.stack([_noise_increments(q, times) for q in paths])
    m = dL.shape[0]
    x, y, z = (np.full(m, float(v)) for v in s0)
    alive = np.ones(m, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            g1, g2, g3 = drift_fn((x, y, z), p)
            x, y, z = x + dt * a1 * g1 + dL[:, i], y + dt * a2 * g2, z + dt * a3 * g3
            bad = ~(np.abs(x) + np.abs(y) + np.abs(z) <= GUARD)
            if bad.any():
                alive &= ~bad
                x, y, z = (np.where(alive, v, 0.0) for v in (x, y, z))
    out = np.column_stack([x, y, z])
    out[~alive] = np.nan
    return out


def rk4_steps(f, t0, u0, n, dt):
    """Classical RK4 for ``u' = f(t, u)`` with ``u`` a 3-tuple of floats.

    Returns the list of ``n + 1`` states.  ``dt`` may be negative.  Raises
    :class:`BlowUpError` when the state crosses the guard.
    """
    x, y, z = map(float, u0)
    out = [(x, y, z)]
    h = dt
    h2 = 0.5 * dt
    for i in range(n):
        t = t0 + i * dt
        k1 = f(t, x, y, z)
        k2 = f(t + h2, x + h2 * k1[0], y + h2 * k1[1], z + h2 * k1[2])
        k3 = f(t + h2, x + h2 * k2[0], y + h2 * k2[1], z + h2 * k2[2])
        k4 = f(t + h, x + h * k3[0], y + h * k3[1], z + h * k3[2])
        x += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        z += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        if not (abs(x) + abs(y) + abs(z) <= GUARD):
            raise BlowUpError(
                f"state left the guard at step {i + 1} (t={t + h:.6g})",
                step=i + 1,
                time=t + h,
            )
        out.append((x, y, z))
    return out


def integrate_rk4_deterministic(p: KoperParams, s0, t_end, dt,
                                drift_fn=koper_drift) -> Trajectory:
    """Classical RK4 on the rescaled deterministic system ``x'=g1, y'=eps g2, z'=eps eps_hat g3``."""
    if p.sigma != 0:
        raise DomainError("deterministic integration requires sigma = 0")
    n = _n_steps(t_end, dt)
    e, eh = p.eps, p.eps * p.eps_hat

    def f(t, x, y, z):
        g1, g2, g3 = drift_fn((x, y, z), p)
        return g1, e * g2, eh * g3

    states = rk4_steps(f, 0.0, s0, n, dt)
    return Trajectory(dt * np.arange(n + 1), np.array(states), p, RK4_DETERMINISTIC, None, dt)
