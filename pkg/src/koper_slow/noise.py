"""Symmetric alpha-stable Levy noise on time grids.

Paths are two-sided and anchored at zero.  Increments over a step of length
``dt`` are ``dt**(1/alpha)`` times a standard symmetric stable variate drawn
with the Chambers-Mallows-Stuck transform, whose characteristic function is
``exp(-|s|**alpha)``.  For ``alpha=2`` this is a Gaussian with variance 2.

The positive-time and negative-time branches use independent streams derived
from one master seed, so a path is a pure function of ``(alpha, grid, seed)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats

from .errors import DomainError, InputError, RangeError, StatisticsError

# stream tags appended to the master seed
_POSITIVE_BRANCH = 0
_NEGATIVE_BRANCH = 1
_KS_STREAM = 2
_KS_REFERENCE_STREAM = 3

_HALF_PI = 0.5 * math.pi


def _check_alpha(alpha):
    if not (0.0 < alpha <= 2.0) or not math.isfinite(alpha):
        raise DomainError(f"stability index must lie in (0, 2], got {alpha!r}")


def sample_standard_stable(alpha: float, u: float, w: float) -> float:
    """Map ``(u, w)`` to one standard symmetric alpha-stable variate.

    Parameters
    ----------
    alpha : float
        Stability index in (0, 2].
    u : float
        Uniform angle in the open interval (-pi/2, pi/2).
    w : float
        Positive (standard exponential) weight.

    Returns
    -------
    float
        ``sin(alpha u) / cos(u)**(1/alpha) * (cos((1-alpha) u) / w)**((1-alpha)/alpha)``.
        At ``alpha=2`` this equals ``2 sin(u) sqrt(w)``.
    """
    _check_alpha(alpha)
    if not (-_HALF_PI < u < _HALF_PI):
        raise DomainError(f"u must lie in (-pi/2, pi/2), got {u!r}")
    if not (w > 0.0) or not math.isfinite(w):
        raise DomainError(f"w must be positive, got {w!r}")
    return float(_cms(alpha, np.float64(u), np.float64(w)))


def _cms(alpha, u, w):
    # vectorised body of sample_standard_stable; no domain checks
    if alpha == 1.0:
        return np.tan(u)
    return (
        np.sin(alpha * u)
        / np.cos(u) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    )


def standard_stable_variates(alpha, size, rng):
    """Draw ``size`` standard symmetric stable variates from ``rng``."""
    _check_alpha(alpha)
    u = rng.uniform(-_HALF_PI, _HALF_PI, size)
    # uniform() is half-open; keep u strictly inside the interval
    u = np.where(u <= -_HALF_PI, np.nextafter(-_HALF_PI, 0.0), u)
    w = rng.exponential(1.0, size)
    w = np.where(w > 0.0, w, np.finfo(float).tiny)
    return _cms(alpha, u, w)


def _stream(seed, tag):
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


@dataclass(frozen=True, eq=False)
class StablePath:
    """A sampled two-sided stable path.

    The raw samples live in ``base_times``/``base_values``; ``origin`` is the
    index that plays the role of time zero.  Shifting only moves ``origin``,
    so the flow laws of the shift hold bit-for-bit.
    """

    base_times: np.ndarray
    base_values: np.ndarray
    origin: int
    alpha: float
    seed: int | None = None
    jump_cap: float | None = field(default=None, repr=False)

    def __post_init__(self):
        _check_alpha(self.alpha)
        t = np.asarray(self.base_times, dtype=float)
        v = np.asarray(self.base_values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size == 0:
            raise InputError("times and values must be equal-length 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise InputError("grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise InputError("path values must be finite")
        if not (0 <= self.origin < t.size):
            raise InputError("origin index outside the grid")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "base_times", t)
        object.__setattr__(self, "base_values", v)

    @cached_property
    def grid(self) -> np.ndarray:
        return self.base_times - self.base_times[self.origin]

    @cached_property
    def values(self) -> np.ndarray:
        return self.base_values - self.base_values[self.origin]

    @property
    def t_min(self) -> float:
        return float(self.grid[0])

    @property
    def t_max(self) -> float:
        return float(self.grid[-1])

    @cached_property
    def _tol(self):
        if self.base_times.size < 2:
            return 1e-12
        return 1e-9 * float(np.min(np.diff(self.base_times)))

    def covers(self, t0, t1) -> bool:
        return t0 >= self.t_min - self._tol and t1 <= self.t_max + self._tol

    def index_of(self, t: float) -> int:
        """Index of the grid point equal to ``t`` (to round-off)."""
        if not self.covers(t, t):
            raise RangeError(f"t={t} outside sampled support [{self.t_min}, {self.t_max}]")
        i = int(np.searchsorted(self.grid, t))
        for j in (i - 1, i):
            if 0 <= j < self.grid.size and abs(self.grid[j] - t) <= self._tol:
                return j
        raise InputError(f"t={t} is not a grid point")

    def at(self, t):
        """Evaluate the path at ``t`` using left-constant (cadlag) lookup."""
        t = np.asarray(t, dtype=float)
        if t.size and (t.min() < self.t_min - self._tol or t.max() > self.t_max + self._tol):
            raise RangeError(
                f"times outside sampled support [{self.t_min}, {self.t_max}]"
            )
        idx = np.searchsorted(self.grid, t + self._tol, side="right") - 1
        idx = np.clip(idx, 0, self.grid.size - 1)
        out = self.values[idx]
        return float(out) if out.ndim == 0 else out

    def increments(self, times):
        """``omega(times[i+1]) - omega(times[i])`` for a sequence of times."""
        v = self.at(np.asarray(times, dtype=float))
        return np.diff(v)


def sample_path(alpha: float, grid, seed: int, jump_cap: float | None = None) -> StablePath:
    """Sample a stable path on ``grid`` (strictly increasing, containing 0).

    ``jump_cap`` clips individual increments to ``[-jump_cap, jump_cap]``; it
    exists for plotting and must stay ``None`` for any quantitative work.
    """
    _check_alpha(alpha)
    grid = np.array(grid, dtype=float, ndmin=1)
    if grid.ndim != 1 or grid.size == 0:
        raise InputError("grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
        raise InputError("grid must be finite and strictly increasing")
    span = max(1.0, float(grid[-1] - grid[0]))
    zero = np.flatnonzero(np.abs(grid) <= 1e-12 * span)
    if zero.size != 1:
        raise InputError("grid must contain the time 0")
    o = int(zero[0])
    grid[o] = 0.0

    values = np.zeros_like(grid)
    n_pos = grid.size - 1 - o
    if n_pos:
        steps = np.diff(grid[o:])
        incr = steps ** (1.0 / alpha) * standard_stable_variates(
            alpha, n_pos, _stream(seed, _POSITIVE_BRANCH)
        )
        if jump_cap is not None:
            incr = np.clip(incr, -jump_cap, jump_cap)
        values[o + 1 :] = np.cumsum(incr)
    if o:
        # steps walking backward from 0: grid[o]-grid[o-1], grid[o-1]-grid[o-2], ...
        steps = -np.diff(grid[o::-1])
        incr = steps ** (1.0 / alpha) * standard_stable_variates(
            alpha, o, _stream(seed, _NEGATIVE_BRANCH)
        )
        if jump_cap is not None:
            incr = np.clip(incr, -jump_cap, jump_cap)
        values[o - 1 :: -1] = -np.cumsum(incr)
    return StablePath(grid, values, o, float(alpha), int(seed), jump_cap)


def uniform_grid(t_min: float, t_max: float, dt: float) -> np.ndarray:
    """Uniform grid ``k*dt`` covering ``[t_min, t_max]`` and containing 0."""
    if dt <= 0 or t_min > 0 or t_max < 0:
        raise InputError("need dt > 0 and t_min <= 0 <= t_max")
    n_neg = int(math.ceil(-t_min / dt - 1e-9))
    n_pos = int(math.ceil(t_max / dt - 1e-9))
    return dt * np.arange(-n_neg, n_pos + 1, dtype=float)


def sample_uniform_path(alpha, t_min, t_max, dt, seed, jump_cap=None) -> StablePath:
    """Convenience wrapper: ``sample_path`` on ``uniform_grid(t_min, t_max, dt)``."""
    return sample_path(alpha, uniform_grid(t_min, t_max, dt), seed, jump_cap)


def shift(path: StablePath, t: float) -> StablePath:
    """Return the shifted path ``s -> omega(s + t) - omega(t)``.

    ``t`` must be a grid point of ``path``; the result lives on the same
    samples with time zero moved to ``t``.
    """
    k = path.index_of(t)
    return StablePath(
        path.base_times, path.base_values, k, path.alpha, path.seed, path.jump_cap
    )


def ks_self_similarity(alpha, c, n_samples, seed, seed_ref=None, n_steps=16):
    """Two-sample KS test of ``c**(-1/alpha) * L(c)`` against ``L(1)``.

    Both samples are endpoints of independently simulated paths built from
    several increments (``n_steps`` on the shorter of the two horizons), so
    the check exercises the stability of sums as well as the time scaling.
    Passing ``seed_ref=seed`` with ``c=1`` reproduces the first sample exactly.

    Returns
    -------
    (statistic, p_value) : tuple of float
        Asymptotic two-sample Kolmogorov-Smirnov result.
    """
    _check_alpha(alpha)
    if not c > 0:
        raise DomainError(f"scale c must be positive, got {c!r}")
    if n_samples < 100:
        raise DomainError("n_samples must be at least 100")

    h = min(c, 1.0) / n_steps
    steps_c = max(1, int(round(c / h)))
    steps_1 = max(1, int(round(1.0 / h)))

    def endpoints(horizon, steps, rng):
        xi = standard_stable_variates(alpha, (n_samples, steps), rng)
        return (horizon / steps) ** (1.0 / alpha) * xi.sum(axis=1)

    scaled = c ** (-1.0 / alpha) * endpoints(c, steps_c, _stream(seed, _KS_STREAM))
    if seed_ref is None:
        ref_rng = _stream(seed, _KS_REFERENCE_STREAM)
    else:
        ref_rng = _stream(seed_ref, _KS_STREAM)
    reference = endpoints(1.0, steps_1, ref_rng)

    pooled = np.concatenate([scaled, reference])
    if not np.all(np.isfinite(pooled)) or np.ptp(pooled) == 0.0:
        raise StatisticsError("degenerate samples: all values equal or non-finite")
    res = stats.ks_2samp(scaled, reference, method="asymp")
    return float(res.statistic), float(res.pvalue)


def path_to_csv(path: StablePath, fp) -> None:
    """Write ``t,value`` rows (shifted grid, anchored values)."""
    own = isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__")
    f = open(fp, "w", newline="") if own else fp
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(path.grid, path.values):
            w.writerow([f"{t:.17g}", f"{v:.17g}"])
    finally:
        if own:
            f.close()


def path_from_csv(fp, alpha: float, seed: int | None = None) -> StablePath:
    """Read a path written by :func:`path_to_csv`."""
    own = isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__")
    f = open(fp, newline="") if own else fp
    try:
        rows = list(csv.reader(f))
    finally:
        if own:
            f.close()
    if not rows or [h.strip() for h in rows[0]] != ["t", "value"]:
        raise InputError("expected header 't,value'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    except ValueError as exc:
        raise InputError(f"malformed path CSV: {exc}") from None
    if data.size == 0:
        raise InputError("path CSV has no rows")
    t, v = data[:, 0], data[:, 1]
    zero = np.flatnonzero(t == 0.0)
    if zero.size != 1 or v[zero[0]] != 0.0:
        raise InputError("path CSV must contain t=0 with value 0")
    return StablePath(t, v, int(zero[0]), float(alpha), seed)
