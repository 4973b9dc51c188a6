"""Random slow manifold of the Koper system by Lyapunov-Perron iteration.

The stochastic system is turned into a random ODE by subtracting the scaled
noise from the fast variable, ``X = x - sigma*eta(t)`` with
``eta(t) = eps**(-1/alpha) * omega(t)``:

    X' = g1(X + sigma*eta, Y, Z) / eps
    Y' = g2(X + sigma*eta, Y, Z)
    Z' = eps_hat * g3(X + sigma*eta, Y, Z)

For fixed slow anchors ``(Y0, Z0)`` the Lyapunov-Perron map acts on functions
on the half-line ``t <= 0``:

    J1(U)(t) = 1/eps * int_{-inf}^t g1 ds,   J2(U)(t) = Y0 + int_0^t g2 ds,
    J3(U)(t) = Z0 + eps_hat * int_0^t g3 ds

and is iterated in the weighted sup norm ``sup_t exp(-beta t) |U(t)|`` with
``beta = -gamma/eps``.  The half-line is truncated to ``[-T, 0]`` where
``exp(-gamma T / eps)`` equals the truncation tolerance.  The graph value
``h(Y0, Z0)`` is the fast component of the fixed point at ``t = 0``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import (
    BlowUpError,
    BoxEscapeError,
    ContractionError,
    ConvergenceError,
    DomainError,
    InputError,
    KoperError,
    NumericalError,
    RangeError,
)
from .integrators import RK4_RANDOM, Trajectory, _n_steps, GUARD
from .model import KoperParams, State, cutoff_lipschitz, drift as koper_drift, estimate_lipschitz
from .noise import StablePath, sample_uniform_path, shift


class Contraction(NamedTuple):
    rho: float
    contractive: bool


def contraction_rate(K: float, gamma: float, eps: float) -> Contraction:
    """Contraction constant of the Lyapunov-Perron map.

    ``rho = -K/(eps*beta) + K/beta + K/beta`` evaluated at ``beta = -gamma/eps``,
    i.e. ``K*(1 - 2*eps)/gamma``.  ``eps = 0`` returns the limit ``K/gamma``.
    """
    if not K > 0 or not gamma > 0:
        raise DomainError(f"K and gamma must be positive (K={K}, gamma={gamma})")
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    if eps == 0.0:
        rho = K / gamma
    else:
        beta = -gamma / eps
        rho = -K / (eps * beta) + K / beta + K / beta
    return Contraction(rho, rho < 1.0)


def lipschitz_bound(K: float, gamma: float, eps: float) -> float:
    """Upper bound ``K / (gamma - K(1 - 2 eps))`` on the graph's Lipschitz constant."""
    rho, ok = contraction_rate(K, gamma, eps)
    if not ok:
        raise ContractionError(
            f"no Lipschitz bound: rho={rho:.4g} >= 1 (K={K}, gamma={gamma})",
            K=K, gamma=gamma, rho=rho,
        )
    return K / (gamma - K * (1.0 - 2.0 * eps))


def truncation_horizon(gamma: float, eps: float, trunc_tol: float) -> float:
    """``T`` with ``exp(-gamma T / eps) = trunc_tol``."""
    if not 0 < trunc_tol < 1:
        raise DomainError("truncation tolerance must lie in (0, 1)")
    return eps / gamma * math.log(1.0 / trunc_tol)


def weighted_norm(U, times, beta) -> float:
    """``sum_c sup_t |exp(-beta t) U_c(t)|`` over the rows of ``U``."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    w = np.exp(-beta * np.asarray(times, dtype=float))
    return float(np.sum(np.max(np.abs(U) * w, axis=1)))


@dataclass(eq=False)
class RandomODESetup:
    """Parameters, a two-sided noise path and the constants of the estimates.

    ``K`` defaults to ``params.K``, else the closed-form cutoff constant (no
    box) or the box-local estimate.  ``gamma`` defaults to ``params.gamma``,
    else ``2*K*(1 - 2*eps)`` which makes the contraction constant 1/2.
    """

    params: KoperParams
    path: StablePath | None = None
    box: tuple | None = None
    drift_fn: object = field(default=koper_drift, repr=False)

    def __post_init__(self):
        p = self.params
        if p.sigma > 0:
            if self.path is None:
                raise InputError("a noise path is required when sigma > 0")
            if self.path.alpha != p.alpha:
                raise InputError(f"path alpha {self.path.alpha} differs from params alpha {p.alpha}")

    @cached_property
    def eta_scale(self) -> float:
        return self.params.eps ** (-1.0 / self.params.alpha)

    @cached_property
    def K(self) -> float:
        p = self.params
        if p.K is not None:
            return float(p.K)
        if self.box is not None:
            return estimate_lipschitz(p, self.box)
        if p.cutoff is not None:
            return cutoff_lipschitz(p)
        raise DomainError("cannot derive K: give params.K, a box, or a cutoff")

    @cached_property
    def gamma(self) -> float:
        p = self.params
        if p.gamma is not None:
            return float(p.gamma)
        return 2.0 * self.K * (1.0 - 2.0 * p.eps)

    @property
    def beta(self) -> float:
        return -self.gamma / self.params.eps

    @property
    def rho(self) -> float:
        return contraction_rate(self.K, self.gamma, self.params.eps).rho

    def shifted(self, s: float) -> "RandomODESetup":
        """Same setup driven by the shifted path."""
        path = shift(self.path, s) if self.path is not None else None
        new = RandomODESetup(self.params, path, self.box, self.drift_fn)
        # keep the constants even when they were derived
        new.__dict__["K"] = self.K
        new.__dict__["gamma"] = self.gamma
        return new

    def eta(self, t):
        return eta(self, t)


def eta(setup: RandomODESetup, t):
    """Scaled noise ``eps**(-1/alpha) * omega(t)`` (cadlag lookup)."""
    if setup.path is None:
        return 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
    return setup.eta_scale * setup.path.at(t)


def transform_to_random(s, setup: RandomODESetup, t) -> State:
    """``(x, y, z) -> (x - sigma*eta(t), y, z)``."""
    x, y, z = s
    return State(float(x - setup.params.sigma * eta(setup, t)), float(y), float(z))


def transform_from_random(S, setup: RandomODESetup, t) -> State:
    """Inverse of :func:`transform_to_random`."""
    X, Y, Z = S
    return State(float(X + setup.params.sigma * eta(setup, t)), float(Y), float(Z))


def solve_random_ode(setup: RandomODESetup, s0, t_span, dt) -> Trajectory:
    """RK4 for the random ODE over ``t_span = (t0, t1)``; ``t1 < t0`` runs backward.

    The noise term is looked up (cadlag) at each stage time.
    """
    t0, t1 = map(float, t_span)
    n = _n_steps(abs(t1 - t0), dt)
    h = dt if t1 >= t0 else -dt
    p = setup.params
    g = setup.drift_fn
    inv_eps, eh = 1.0 / p.eps, p.eps_hat
    ts = t0 + h * np.arange(n + 1)
    if p.sigma > 0:
        if not setup.path.covers(min(t0, t1), max(t0, t1)):
            raise RangeError(f"path does not cover [{min(t0, t1)}, {max(t0, t1)}]")
        sn = (p.sigma * eta(setup, ts)).tolist()
        sm = (p.sigma * eta(setup, ts[:-1] + 0.5 * h)).tolist() if n else []
    else:
        sn = [0.0] * (n + 1)
        sm = [0.0] * n

    x, y, z = map(float, s0)
    out = [(x, y, z)]
    h2 = 0.5 * h
    for i in range(n):
        a, b, c = sn[i], sm[i], sn[i + 1]
        g1, g2, g3 = g((x + a, y, z), p)
        k1 = (g1 * inv_eps, g2, eh * g3)
        g1, g2, g3 = g((x + h2 * k1[0] + b, y + h2 * k1[1], z + h2 * k1[2]), p)
        k2 = (g1 * inv_eps, g2, eh * g3)
        g1, g2, g3 = g((x + h2 * k2[0] + b, y + h2 * k2[1], z + h2 * k2[2]), p)
        k3 = (g1 * inv_eps, g2, eh * g3)
        g1, g2, g3 = g((x + h * k3[0] + c, y + h * k3[1], z + h * k3[2]), p)
        k4 = (g1 * inv_eps, g2, eh * g3)
        x += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        z += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        if not (abs(x) + abs(y) + abs(z) <= GUARD):
            raise BlowUpError(
                f"random ODE left the guard at step {i + 1} (t={ts[i + 1]:.6g})",
                step=i + 1, time=float(ts[i + 1]),
            )
        out.append((x, y, z))
    seed = setup.path.seed if setup.path is not None else None
    return Trajectory(ts, np.array(out), p, RK4_RANDOM, seed, dt)


class LPResult(NamedTuple):
    """Outcome of :func:`lp_iterate`.

    ``U_star`` holds the fixed point on ``[-T, 0]`` in random coordinates,
    ``h`` its fast component at ``t = 0`` and ``ratios`` the successive
    quotients of weighted-norm distances between iterates.
    """

    U_star: Trajectory
    h: float
    ratios: np.ndarray
    distances: np.ndarray
    residual: float
    iterations: int
    rho: float
    T_trunc: float


def _lp_map(U, Y0, Z0, noise, p, g, dt):
    X, Y, Z = U
    g1, g2, g3 = g((X + noise, Y, Z), p)
    g1 = np.broadcast_to(g1, X.shape)
    g2 = np.broadcast_to(g2, X.shape)
    g3 = np.broadcast_to(g3, X.shape)
    I1 = cumulative_trapezoid(g1, dx=dt, initial=0.0)
    I2 = cumulative_trapezoid(g2, dx=dt, initial=0.0)
    I3 = cumulative_trapezoid(g3, dx=dt, initial=0.0)
    return np.array([
        I1 / p.eps,
        Y0 + (I2 - I2[-1]),
        Z0 + p.eps_hat * (I3 - I3[-1]),
    ])


def lp_iterate(setup: RandomODESetup, Y0: float, Z0: float, T_trunc=None, dt=1e-4,
               tol=1e-8, max_iter=500, trunc_tol=1e-8) -> LPResult:
    """Picard iteration of the Lyapunov-Perron map for slow anchors ``(Y0, Z0)``.

    The integrals are trapezoidal on the uniform grid ``-N*dt, ..., 0`` with
    ``N*dt >= T_trunc`` (default ``eps/gamma * ln(1/trunc_tol)``).  The start
    is ``U = (0, Y0, Z0)``; iteration stops once consecutive iterates are
    within ``tol`` in the weighted norm.

    Raises
    ------
    ContractionError
        ``rho >= 1`` for the setup's ``K`` and ``gamma``.
    ConvergenceError
        ``max_iter`` reached.
    BoxEscapeError
        The fixed point leaves ``setup.box``.
    """
    p = setup.params
    K, gamma = setup.K, setup.gamma
    rho, ok = contraction_rate(K, gamma, p.eps)
    if not ok:
        raise ContractionError(
            f"Lyapunov-Perron map not contractive: rho={rho:.4g} (K={K:.4g}, gamma={gamma:.4g})",
            K=K, gamma=gamma, rho=rho,
        )
    if not dt > 0 or not tol > 0:
        raise InputError("dt and tol must be positive")
    if T_trunc is None:
        T_trunc = truncation_horizon(gamma, p.eps, trunc_tol)
    N = max(1, int(math.ceil(T_trunc / dt - 1e-9)))
    times = dt * np.arange(-N, 1, dtype=float)
    times[-1] = 0.0
    if p.sigma > 0:
        if not setup.path.covers(times[0], 0.0):
            raise RangeError(f"path does not cover [{times[0]:.6g}, 0]")
        noise = p.sigma * eta(setup, times)
    else:
        noise = np.zeros_like(times)
    weights = np.exp(-setup.beta * times)

    U = np.array([np.zeros_like(times), np.full_like(times, Y0), np.full_like(times, Z0)])
    distances = []
    converged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            U_new = _lp_map(U, Y0, Z0, noise, p, setup.drift_fn, dt)
            if not np.all(np.isfinite(U_new)):
                raise NumericalError("Lyapunov-Perron iterate became non-finite")
            d = float(np.sum(np.max(np.abs(U_new - U) * weights, axis=1)))
            distances.append(d)
            U = U_new
            if d <= tol:
                converged = True
                break
    if not converged:
        raise ConvergenceError(
            f"Lyapunov-Perron iteration did not reach tol={tol:g} in {max_iter} steps "
            f"(last distance {distances[-1]:.3g})"
        )
    residual = float(
        np.sum(np.max(np.abs(_lp_map(U, Y0, Z0, noise, p, setup.drift_fn, dt) - U) * weights, axis=1))
    )
    if setup.box is not None:
        box = np.asarray(setup.box, dtype=float)
        pts = np.array([U[0] + noise, U[1], U[2]])
        out = np.any((pts < box[:, :1]) | (pts > box[:, 1:]), axis=0)
        if out.any():
            t_bad = float(times[np.flatnonzero(out)[-1]])
            raise BoxEscapeError(
                f"fixed point leaves the hypothesis box at t={t_bad:.6g}", time=t_bad
            )
    dist = np.array(distances)
    ratios = dist[1:] / dist[:-1] if dist.size > 1 else np.empty(0)
    traj = Trajectory(times, U.T.copy(), p, "lyapunov-perron", setup.path.seed if setup.path else None, dt)
    return LPResult(traj, float(U[0, -1]), ratios, dist, residual, len(distances), rho, float(N * dt))


def tail_ratios(ratios) -> np.ndarray:
    """Final quarter of the ratio sequence (at least one ratio).

    Early ratios mix the fast Volterra transient with the coupled slow mode
    and can spike where the two cancel; the final quarter is the asymptotic
    regime.
    """
    ratios = np.asarray(ratios)
    return ratios[ratios.size - max(1, ratios.size // 4):] if ratios.size else ratios


@dataclass(eq=False)
class ManifoldGraph:
    """Fast-variable graph ``h(Y0, Z0)`` over a slow grid.

    ``h`` here is the graph map written ``l^eps`` in the literature.
    """

    y_grid: np.ndarray
    z_grid: np.ndarray
    h_values: np.ndarray  # shape (n_y, n_z); nan where a node failed
    lip_measured: float
    lip_bound: float
    omega_tag: dict
    lp_options: dict
    meta: dict
    failed: list = field(default_factory=list)

    def node(self, Y0, Z0):
        """Grid indices of ``(Y0, Z0)``; raises :class:`InputError` if off-grid."""
        i = np.flatnonzero(np.isclose(self.y_grid, Y0, rtol=0, atol=1e-12))
        j = np.flatnonzero(np.isclose(self.z_grid, Z0, rtol=0, atol=1e-12))
        if i.size == 0 or j.size == 0:
            raise InputError(f"({Y0}, {Z0}) is not a node of the graph grid")
        return int(i[0]), int(j[0])

    def point(self, i, j) -> State:
        """The manifold point ``(h, y_i, z_j)`` in random coordinates."""
        return State(float(self.h_values[i, j]), float(self.y_grid[i]), float(self.z_grid[j]))

    def to_csv(self, fp):
        own = isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__")
        f = open(fp, "w", newline="") if own else fp
        try:
            f.write("y0,z0,h\n")
            for i, y in enumerate(self.y_grid):
                for j, z in enumerate(self.z_grid):
                    f.write(f"{y:.17g},{z:.17g},{self.h_values[i, j]:.17g}\n")
        finally:
            if own:
                f.close()

    def metadata(self) -> dict:
        return {
            **self.omega_tag,
            **self.meta,
            "lip_measured": self.lip_measured,
            "lip_bound": self.lip_bound,
            **self.lp_options,
            "failed_nodes": [list(f[:2]) for f in self.failed],
        }

    def write_metadata(self, fp):
        with open(fp, "w") as f:
            json.dump(self.metadata(), f, indent=2, sort_keys=True)
            f.write("\n")


def measured_lipschitz(y_grid, z_grid, h_values) -> float:
    """Largest ``|dh| / (|dy| + |dz|)`` over horizontally/vertically adjacent nodes."""
    h = np.asarray(h_values, dtype=float)
    quotients = []
    if h.shape[0] > 1:
        quotients.append(np.abs(np.diff(h, axis=0)) / np.abs(np.diff(y_grid))[:, None])
    if h.shape[1] > 1:
        quotients.append(np.abs(np.diff(h, axis=1)) / np.abs(np.diff(z_grid))[None, :])
    vals = [q[np.isfinite(q)] for q in quotients]
    vals = [v for v in vals if v.size]
    return float(max(v.max() for v in vals)) if vals else 0.0


def manifold_graph(setup: RandomODESetup, y_range, z_range, n_y, n_z, **lp_options) -> ManifoldGraph:
    """Evaluate ``h`` on an ``n_y x n_z`` slow grid.

    Nodes are independent given the shared path; a node whose iteration fails
    is recorded in ``failed`` and holds ``nan``.  A contraction violation is
    global and raised immediately.
    """
    p = setup.params
    K, gamma = setup.K, setup.gamma
    bound = lipschitz_bound(K, gamma, p.eps)  # raises ContractionError when rho >= 1
    y_grid = np.linspace(y_range[0], y_range[1], n_y)
    z_grid = np.linspace(z_range[0], z_range[1], n_z)
    h = np.full((n_y, n_z), np.nan)
    failed = []
    T_used = None
    for i, y0 in enumerate(y_grid):
        for j, z0 in enumerate(z_grid):
            try:
                res = lp_iterate(setup, float(y0), float(z0), **lp_options)
            except ContractionError:
                raise
            except KoperError as exc:
                failed.append((i, j, f"{type(exc).__name__}: {exc}"))
                continue
            h[i, j] = res.h
            T_used = res.T_trunc
    opts = {
        "dt": lp_options.get("dt", 1e-4),
        "tol": lp_options.get("tol", 1e-8),
        "trunc_tol": lp_options.get("trunc_tol", 1e-8),
        "max_iter": lp_options.get("max_iter", 500),
    }
    if lp_options.get("T_trunc") is not None:
        opts["T_trunc"] = lp_options["T_trunc"]
    omega_tag = {
        "seed": setup.path.seed if setup.path is not None else None,
        "shift": float(setup.path.base_times[setup.path.origin]) if setup.path is not None else 0.0,
    }
    meta = {
        "eps": p.eps, "sigma": p.sigma, "alpha": p.alpha,
        "K_est": K, "gamma": gamma, "rho": contraction_rate(K, gamma, p.eps).rho,
        "T_trunc": T_used if T_used is not None else truncation_horizon(gamma, p.eps, opts["trunc_tol"]),
    }
    return ManifoldGraph(
        y_grid, z_grid, h, measured_lipschitz(y_grid, z_grid, h), bound,
        omega_tag, opts, meta, failed,
    )


def check_invariance(setup: RandomODESetup, graph: ManifoldGraph, Y0, Z0, s, dt) -> float:
    """Defect of positive invariance after time ``s``.

    Starts on the graph at ``(h(Y0, Z0), Y0, Z0)``, solves the random ODE to
    time ``s`` and compares with the graph value recomputed for the shifted
    path at the evolved slow coordinates.  The shifted path re-anchors the
    noise at ``s``, so the fast coordinate is moved into that frame
    (``X + sigma*eta(s)``) before comparing.
    """
    if s < 0:
        raise InputError("s must be non-negative")
    i, j = graph.node(Y0, Z0)
    h0 = graph.h_values[i, j]
    if not np.isfinite(h0):
        raise NumericalError(f"graph node ({Y0}, {Z0}) has no value")
    traj = solve_random_ode(setup, (h0, Y0, Z0), (0.0, s), dt)
    Xs, Ys, Zs = traj.states[-1]
    if setup.box is not None:
        box = np.asarray(setup.box, dtype=float)
        if not (box[1, 0] <= Ys <= box[1, 1] and box[2, 0] <= Zs <= box[2, 1]):
            raise RangeError(f"evolved slow state ({Ys:.4g}, {Zs:.4g}) outside the box")
    moved = setup.shifted(s) if s != 0 else setup
    res = lp_iterate(moved, float(Ys), float(Zs), **graph.lp_options)
    x_frame = Xs + setup.params.sigma * eta(setup, s)
    return float(abs(x_frame - res.h))


class TrackingResult(NamedTuple):
    c2_fit: float
    times: np.ndarray
    log_distances: np.ndarray
    fit_points: int
    truncated: bool


def exponential_tracking(setup: RandomODESetup, u_on, u_off, t_end, dt) -> TrackingResult:
    """Fit the exponential rate at which two random-ODE orbits approach.

    Both states are evolved with the same noise; ``log |u_on(t) - u_off(t)|``
    is fitted by a line over the second half of ``[0, t_end]``.  Distances
    below 1e-14 are dropped from the fit (``truncated`` is then set).  With
    identical initial states the slope is ``nan``.
    """
    if not t_end > 0:
        raise InputError("t_end must be positive")
    a = solve_random_ode(setup, u_on, (0.0, t_end), dt)
    b = solve_random_ode(setup, u_off, (0.0, t_end), dt)
    dist = np.linalg.norm(a.states - b.states, axis=1)
    with np.errstate(divide="ignore"):
        logd = np.log(dist)
    half = a.times >= 0.5 * t_end
    usable = half & (dist > 1e-14)
    truncated = bool(np.any(half & ~usable))
    if usable.sum() < 2:
        return TrackingResult(float("nan"), a.times, logd, int(usable.sum()), truncated)
    slope = np.polyfit(a.times[usable], logd[usable], 1)[0]
    return TrackingResult(float(slope), a.times, logd, int(usable.sum()), truncated)


def make_setup(params: KoperParams, seed: int, t_min: float, t_max: float,
               path_dt: float = 2.5e-5, box=None) -> RandomODESetup:
    """Setup with a fresh two-sided path on ``[t_min, t_max]``."""
    path = None
    if params.sigma > 0:
        path = sample_uniform_path(params.alpha, t_min, t_max, path_dt, seed)
    return RandomODESetup(params, path, box)
