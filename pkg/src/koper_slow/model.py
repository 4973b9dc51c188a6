"""The Koper vector field, its parameters, equilibria and linearisation.

The unscaled nonlinearities are

    g1(x, y, z) = k*y - x**3 + 3*x - lambda(z),   lambda(z) = lambda0 + lambda1*z
    g2(x, y, z) = x - 2*y + z
    g3(x, y, z) = y - z

The stochastic system scales g1 by 1/eps and g3 by eps_hat; the rescaled
deterministic system (time t -> eps*t) reads

    x' = g1,  y' = eps*g2,  z' = eps*eps_hat*g3.

With ``cutoff=R`` the cubic ``-x**3 + 3x`` is continued linearly (C^1) outside
``|x| <= R``, which makes the drift globally Lipschitz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DomainError, InputError, NumericalError


class State(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class KoperParams:
    """Model constants plus the constants entering the manifold estimates.

    ``K`` is a Lipschitz constant of the drift and ``gamma`` the decay-rate
    parameter (the weight exponent is ``-gamma/eps``).  Leave them ``None`` to
    have them derived (see :class:`koper_slow.manifold.RandomODESetup`).
    """

    k: float = -10.0
    lambda0: float = -3.0
    lambda1: float = -5.0
    eps: float = 0.05
    eps_hat: float = 1.0
    sigma: float = 0.5
    alpha: float = 1.6
    K: float | None = None
    gamma: float | None = None
    cutoff: float | None = None

    def __post_init__(self):
        for name in ("k", "lambda0", "lambda1", "eps", "eps_hat", "sigma", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not 0.0 < self.eps < 1.0:
            raise DomainError(f"eps must lie in (0, 1), got {self.eps}")
        if self.eps_hat <= 0:
            raise DomainError("eps_hat must be positive")
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")
        if not 0.0 < self.alpha <= 2.0:
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.K is not None and not self.K > 0:
            raise DomainError("K must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if self.cutoff is not None and not self.cutoff > 0:
            raise DomainError("cutoff radius must be positive")

    @property
    def in_theory_range(self) -> bool:
        """True when alpha lies in (1, 2) or the noise is switched off."""
        return self.sigma == 0 or 1.0 < self.alpha < 2.0

    def check_theory_range(self):
        if not self.in_theory_range:
            raise DomainError(
                f"alpha={self.alpha} with sigma>0: stability index must lie in (1, 2)"
            )

    def lam(self, z):
        return self.lambda0 + self.lambda1 * z

    def with_(self, **changes) -> "KoperParams":
        return replace(self, **changes)


EXAMPLE = KoperParams()
EQUILIBRIUM = State(1.0, 1.0, 1.0)


def cubic(x, cutoff=None):
    """``-x**3 + 3x``, continued linearly outside ``|x| <= cutoff``."""
    if cutoff is None:
        return -x * x * x + 3.0 * x
    R = cutoff
    if isinstance(x, (float, int)):
        xc = min(max(x, -R), R)
        return -xc * xc * xc + 3.0 * xc + (3.0 - 3.0 * R * R) * (x - xc)
    xc = np.clip(x, -R, R)
    slope = 3.0 - 3.0 * R * R
    out = -xc * xc * xc + 3.0 * xc + slope * (x - xc)
    return float(out) if np.ndim(out) == 0 else out


def cubic_prime(x, cutoff=None):
    if cutoff is None:
        return 3.0 - 3.0 * x * x
    if isinstance(x, (float, int)):
        xc = min(max(x, -cutoff), cutoff)
        return 3.0 - 3.0 * xc * xc
    xc = np.clip(x, -cutoff, cutoff)
    out = 3.0 - 3.0 * xc * xc
    return float(out) if np.ndim(out) == 0 else out


def drift(s, p: KoperParams):
    """Unscaled nonlinearities ``(g1, g2, g3)`` at ``s``; accepts arrays."""
    x, y, z = s
    g1 = p.k * y + cubic(x, p.cutoff) - p.lam(z)
    g2 = x - 2.0 * y + z
    g3 = y - z
    return g1, g2, g3


def rescaled_drift(s, p: KoperParams):
    """Vector field of the rescaled deterministic system."""
    g1, g2, g3 = drift(s, p)
    return g1, p.eps * g2, p.eps * p.eps_hat * g3


def jacobian(s, p: KoperParams) -> np.ndarray:
    """Exact Jacobian of :func:`rescaled_drift`."""
    x = s[0]
    e, eh = p.eps, p.eps * p.eps_hat
    return np.array(
        [
            [cubic_prime(x, p.cutoff), p.k, -p.lambda1],
            [e, -2.0 * e, e],
            [0.0, eh, -eh],
        ]
    )


def find_equilibrium(p: KoperParams, guess=(0.9, 0.9, 0.9), tol=1e-12, max_iter=100) -> State:
    """Damped Newton iteration on the rescaled drift.

    The step is halved (up to 30 times) while the residual max-norm does not
    decrease.  Raises :class:`NumericalError` on a singular Jacobian and
    :class:`ConvergenceError` if ``max_iter`` steps do not reach ``tol``.
    """
    if not tol > 0:
        raise InputError("tol must be positive")
    u = np.array(guess, dtype=float)
    if u.shape != (3,) or not np.all(np.isfinite(u)):
        raise InputError("guess must be a finite 3-vector")

    def residual(v):
        return np.array(rescaled_drift(v, p))

    F = residual(u)
    r = np.max(np.abs(F))
    for _ in range(max_iter):
        if r <= tol:
            return State(*map(float, u))
        J = jacobian(u, p)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise NumericalError(f"singular Jacobian at {tuple(u)}") from None
        if not np.all(np.isfinite(step)):
            raise NumericalError(f"singular Jacobian at {tuple(u)}")
        t = 1.0
        for _ in range(31):
            trial = u + t * step
            F_trial = residual(trial)
            r_trial = np.max(np.abs(F_trial))
            if r_trial < r:
                break
            t *= 0.5
        u, F, r = trial, F_trial, r_trial
    if r <= tol:
        return State(*map(float, u))
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {r:.3g})")


class EquilibriumReport(NamedTuple):
    eigenvalues: np.ndarray
    stable: bool
    trace: float
    det: float


def classify_equilibrium(J) -> EquilibriumReport:
    """Eigenvalues of a 3x3 matrix from its characteristic cubic.

    The cubic ``l**3 - tr l**2 + m l - det`` (``m`` the sum of principal 2x2
    minors) is solved through its companion matrix.  Stability means every
    eigenvalue has negative real part.
    """
    J = np.asarray(J, dtype=float)
    if J.shape != (3, 3) or not np.all(np.isfinite(J)):
        raise InputError("expected a finite 3x3 matrix")
    tr = J[0, 0] + J[1, 1] + J[2, 2]
    minors = (
        J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
        + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1]
    )
    det = (
        J[0, 0] * (J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
        - J[0, 1] * (J[1, 0] * J[2, 2] - J[1, 2] * J[2, 0])
        + J[0, 2] * (J[1, 0] * J[2, 1] - J[1, 1] * J[2, 0])
    )
    eig = np.roots([1.0, -tr, minors, -det]).astype(complex)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    return EquilibriumReport(eig, bool(np.all(eig.real < 0)), float(tr), float(det))


def _check_box(box):
    box = np.asarray(box, dtype=float)
    if box.shape != (3, 2) or not np.all(np.isfinite(box)):
        raise InputError("box must be ((xlo, xhi), (ylo, yhi), (zlo, zhi))")
    if np.any(box[:, 0] > box[:, 1]):
        raise InputError("empty box: some lower bound exceeds its upper bound")
    return box


def _max_abs_cubic_prime(p, xlo, xhi, n_grid):
    # |c'| is piecewise quadratic; its maximum sits at an endpoint, at 0 or at
    # the cutoff radius, so adding those points makes the grid search exact
    pts = [xlo, xhi, *np.linspace(xlo, xhi, n_grid)]
    for c in (0.0, p.cutoff, -p.cutoff if p.cutoff else None):
        if c is not None and xlo <= c <= xhi:
            pts.append(c)
    return float(np.max(np.abs(cubic_prime(np.array(pts), p.cutoff))))


def partial_bounds(p: KoperParams, box, n_grid=33) -> np.ndarray:
    """Matrix of ``sup |d g_i / d u_j|`` over ``box`` (rows g1..g3, cols x,y,z)."""
    box = _check_box(box)
    if n_grid < 2:
        raise InputError("n_grid must be at least 2")
    c_max = _max_abs_cubic_prime(p, box[0, 0], box[0, 1], n_grid)
    return np.array(
        [
            [c_max, abs(p.k), abs(p.lambda1)],
            [1.0, 2.0, 1.0],
            [0.0, 1.0, 1.0],
        ]
    )


def estimate_lipschitz(p: KoperParams, box, n_grid=33) -> float:
    """Box-local Lipschitz constant K of the drift.

    Each component satisfies ``|g_i(u) - g_i(v)| <= K * |u - v|_1`` on the box;
    K is the largest partial-derivative bound.  Nested boxes give
    non-decreasing values.
    """
    return float(np.max(partial_bounds(p, box, n_grid)))


def cutoff_lipschitz(p: KoperParams) -> float:
    """Closed-form global K for the cutoff drift."""
    if p.cutoff is None:
        raise DomainError("cubic drift is not globally Lipschitz; set a cutoff")
    R = p.cutoff
    return float(max(3.0, abs(3.0 - 3.0 * R * R), abs(p.k), abs(p.lambda1), 2.0))


class HypothesisAudit(NamedTuple):
    K: float
    growth_L: float
    h3_max_slope: float
    h3_holds: bool
    h3_violations: int


def audit_hypotheses(p: KoperParams, box, n_grid=17) -> HypothesisAudit:
    """Evaluate the Lipschitz, growth and monotonicity hypotheses on a box grid.

    ``growth_L`` is the smallest L with ``|g|^2 <= L (1 + |u|^2)`` at every
    grid point.  Monotonicity needs ``dg1/dx <= -L < 0``; the audit reports the
    largest slope found and how many x-grid points violate it.
    """
    box = _check_box(box)
    axes = [np.linspace(lo, hi, n_grid) for lo, hi in box]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    g1, g2, g3 = drift((X, Y, Z), p)
    ratio = (g1**2 + g2**2 + g3**2) / (1.0 + X**2 + Y**2 + Z**2)
    slopes = cubic_prime(axes[0], p.cutoff)
    max_slope = float(np.max(slopes))
    return HypothesisAudit(
        K=estimate_lipschitz(p, box, n_grid),
        growth_L=float(np.max(ratio)),
        h3_max_slope=max_slope,
        h3_holds=max_slope < 0,
        h3_violations=int(np.sum(slopes >= 0)),
    )


def equilibrium_row(eps, report: EquilibriumReport) -> list[str]:
    """CSV row ``eps,trace,det,re1,im1,re2,im2,re3,im3,stable``."""
    row = [f"{eps:.17g}", f"{report.trace:.17g}", f"{report.det:.17g}"]
    for ev in report.eigenvalues:
        row += [f"{ev.real:.17g}", f"{ev.imag:.17g}"]
    row.append("1" if report.stable else "0")
    return row


EQUILIBRIUM_HEADER = ["eps", "trace", "det", "re1", "im1", "re2", "im2", "re3", "im3", "stable"]
