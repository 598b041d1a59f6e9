"""The operator Delta = -2(D-2)^{-1}.

Rotationally invariant problems on a collar reduce to the ODE
sin^2(t) f'' - 2 f = g on (0, pi), solved with the explicit Green's function
G(t, t0) = -(1/pi) u(min) u(pi - max), u(t) = 1 - t cot t.  On a surface the
kernel of Delta is the orbit sum of (1/pi) Q_1(cosh d), Q_1 the Legendre
function of the second kind of degree one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from . import hyp2
from .fuchsian import CutoffTooSmall, enumerate_ball

N_GRID = 2048
GL_NODES, GL_WEIGHTS = leggauss(8)
RESIDUAL_GATE = 1e-6


class ResidualTooLarge(RuntimeError):
    pass


class CoincidentPoints(ValueError):
    pass


# ---------------------------------------------------------------------------
# 1-D kernel


def u(theta):
    """u(t) = 1 - t cot t, positive on (0, pi); series near 0 avoids cancellation."""
    t = np.asarray(theta, dtype=float)
    small = np.abs(t) < 0.05
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 1.0 - t / np.tan(t)
    t2 = t * t
    ser = t2 / 3 + t2 ** 2 / 45 + 2 * t2 ** 3 / 945 + t2 ** 4 / 4725
    return np.where(small, ser, out)


def green1d(theta, theta0):
    """G(t, t0), continuous with unit jump in dG/dt at t = t0."""
    t, t0 = np.broadcast_arrays(np.asarray(theta, float), np.asarray(theta0, float))
    lo, hi = np.minimum(t, t0), np.maximum(t, t0)
    return -u(lo) * u(np.pi - hi) / np.pi


def theta_grid(n=N_GRID):
    """Chebyshev-clustered nodes on [0, pi] including both endpoints."""
    k = np.arange(n)
    return 0.5 * np.pi * (1.0 - np.cos(np.pi * k / (n - 1)))


def smooth_step(x):
    """C-infinity approximate characteristic function of R_+; the derivative is
    supported in (-log 2, 0)."""
    x = np.asarray(x, dtype=float)
    s = (x + math.log(2.0)) / math.log(2.0)

    def psi(v):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)

    a, b = psi(s), psi(1.0 - s)
    return a / (a + b)


def collar_cutoff(theta, ell):
    """chi(log(sin t / ell)): 1 where sin t >= ell, 0 where sin t <= ell/2."""
    return smooth_step(np.log(np.sin(np.asarray(theta, float)) / ell))


# ---------------------------------------------------------------------------
# rotationally invariant functions


@dataclass
class RotInvFunction:
    """Values on a theta grid over [0, pi]; optional exact evaluator."""
    theta: np.ndarray
    values: np.ndarray
    evaluator: object = None
    residual: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.theta.shape != self.values.shape or np.any(np.diff(self.theta) <= 0):
            raise ValueError("grid must be strictly increasing and match values")
        if not np.all(np.isfinite(self.values[[0, -1]])):
            raise ValueError("endpoint values must be finite")

    @classmethod
    def from_callable(cls, fn, n=N_GRID):
        th = theta_grid(n)
        return cls(th, np.asarray(fn(th), dtype=float), evaluator=fn)

    def __call__(self, theta):
        if self.evaluator is not None:
            return np.asarray(self.evaluator(np.asarray(theta, float)), dtype=float)
        return CubicSpline(self.theta, self.values)(theta)

    def sup(self):
        return float(np.max(np.abs(self.values)))


def _as_callable(g):
    if isinstance(g, RotInvFunction):
        return g.__call__
    if callable(g):
        return g
    raise TypeError("source must be callable or a RotInvFunction")


class _RotInvSolver:
    """Cumulative panel integrals for f = int G(t, t0) g(t0) csc^2 t0 dt0."""

    def __init__(self, g, n=N_GRID):
        self.g = _as_callable(g)
        self.edges = theta_grid(n)
        a, b = self.edges[:-1], self.edges[1:]
        x, w = self._nodes(a, b)
        h1, h2 = self._integrands(x)
        p1 = (h1 * w).sum(axis=1)
        p2 = (h2 * w).sum(axis=1)
        self.c1 = np.concatenate([[0.0], np.cumsum(p1)])          # int_0^{edge}
        self.c2 = np.concatenate([np.cumsum(p2[::-1])[::-1], [0.0]])  # int_{edge}^pi

    @staticmethod
    def _nodes(a, b):
        half = 0.5 * (b - a)
        x = 0.5 * (a + b)[:, None] + half[:, None] * GL_NODES[None, :]
        return x, half[:, None] * GL_WEIGHTS[None, :]

    def _integrands(self, x):
        s2 = np.sin(x) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            gw = np.where(s2 > 0, np.asarray(self.g(x), dtype=float) / s2, 0.0)
        return u(x) * gw, u(np.pi - x) * gw

    def __call__(self, theta):
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.edges) - 2)
        a = self.edges[k]
        x, w = self._nodes(a, t)
        h1, h2 = self._integrands(x)
        part = (h1 * w).sum(axis=1)
        i1 = self.c1[k] + part
        i2 = self.c2[k] - (h2 * w).sum(axis=1)
        f = -(u(np.pi - t) * i1 + u(t) * i2) / np.pi
        f = np.where((t <= 0) | (t >= np.pi), 0.0, f)
        return f.reshape(np.shape(theta))


def _residual(f, g, theta, h=2e-3):
    """sup |sin^2 f'' - 2 f - g| with a fourth-order centered stencil.

    The step shrinks like sin(theta) near the endpoints, where sources on a
    thin collar vary on that scale.
    """
    t = theta[(theta > 0) & (theta < np.pi)]
    hs = np.minimum(h, 0.02 * np.sin(t))
    fm2, fm1, f0, fp1, fp2 = (f(t + k * hs) for k in (-2, -1, 0, 1, 2))
    d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * hs * hs)
    return float(np.max(np.abs(np.sin(t) ** 2 * d2 - 2 * f0 - _as_callable(g)(t))))


def solve_rotinv(g, n=N_GRID, gate=RESIDUAL_GATE, check_points=400):
    """Endpoint-vanishing solution of (D_theta - 2) f = g.

    g is a callable of theta or a RotInvFunction; the result carries an exact
    evaluator and the residual of the ODE on interior check points.
    """
    solver = _RotInvSolver(g, n)
    th = theta_grid(n)
    vals = solver(th)
    chk = theta_grid(check_points)[1:-1]
    res = _residual(solver, g, chk)
    if not res <= gate:
        raise ResidualTooLarge(f"ODE residual {res:.3e} exceeds gate {gate:.1e}")
    return RotInvFunction(th, vals, evaluator=solver, residual=res)


def apply_delta_rotinv(g, n=N_GRID, gate=RESIDUAL_GATE):
    """Delta g = -2 (D_theta - 2)^{-1} g."""
    f = solve_rotinv(g, n, gate)
    ev = f.evaluator
    return RotInvFunction(f.theta, -2.0 * f.values, evaluator=lambda t: -2.0 * ev(t),
                          residual=2.0 * f.residual)


# ---------------------------------------------------------------------------
# surface kernel


def legendre_q1(x):
    """Q_1(x) = (x/2) log((x+1)/(x-1)) - 1 for x > 1; series at large x."""
    x = np.asarray(x, dtype=float)
    big = x > 30.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 0.5 * x * np.log((x + 1.0) / (x - 1.0)) - 1.0
    xi2 = 1.0 / np.where(big, x, 2.0) ** 2
    ser = xi2 * (1 / 3 + xi2 * (1 / 5 + xi2 * (1 / 7 + xi2 * (1 / 9 + xi2 / 11))))
    return np.where(big, ser, direct)


def q2(d):
    """Kernel function with -2 q2(d) the Green's function of Delta on H.

    -2 q2(d) = Q_1(cosh d)/pi: it solves the radial equation
    f'' + coth(d) f' - 2 f = 0, behaves as -(1/pi) log d at 0, decays like
    e^{-2d} and has unit mass over H.  q2(0) returns -inf.
    """
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        out = -legendre_q1(np.cosh(np.minimum(d, 700.0))) / (2.0 * np.pi)
    out = np.where(d <= 0, -np.inf, out)
    return out if out.ndim else float(out)


def delta_kernel(d):
    """Kernel of Delta on H as a function of distance, -2 q2(d)."""
    return -2.0 * np.asarray(q2(d))


@dataclass
class SurfaceGreenValue:
    value: float
    tail_bound: float
    cutoff: float
    terms: int


def green_surface(G, z, z0, R, budget=None):
    """Truncated orbit sum sum_A -2 q2(d(z, A z0)) over d <= R."""
    z, z0 = complex(z), complex(z0)
    d0 = float(hyp2.dist(z, z0))
    if R < d0 + 2.0:
        raise CutoffTooSmall(f"cutoff {R} below d(z, z0) + 2 = {d0 + 2:.3f}")
    kw = {} if budget is None else {"budget": budget}
    orb = enumerate_ball(G, R + d0, basepoint=z0, **kw)
    w = (orb.mats[:, 0, 0] * z0 + orb.mats[:, 0, 1]) / (orb.mats[:, 1, 0] * z0 + orb.mats[:, 1, 1])
    d = hyp2.dist(z, w)
    if d.min() < 1e-8:
        raise CoincidentPoints("z and z0 coincide modulo the group")
    d = d[d <= R]
    kap = orb.kappa
    return SurfaceGreenValue(float(np.sum(np.sort(delta_kernel(d))[::-1])), kap * math.exp(-R), R, d.size)


# ---------------------------------------------------------------------------
# Delta expansion on a collar


@dataclass
class ExpansionCheck:
    ell: float
    sup_remainder: float
    theta: np.ndarray
    remainder: np.ndarray
    main: np.ndarray
    meta: dict = field(default_factory=dict)


def delta_product_expansion_check(G, alpha="alpha", beta=None, grid=None, n_rows=None):
    """sup over the collar of |2 Delta(mu_a conj mu_b) - main terms|.

    Cyclic models are exactly rotationally invariant and reduce to the 1-D
    solve.  For groups with a collar decomposition the meridian average of
    the product is solved on the collar cylinder (curvature.collar_delta).
    """
    from .curvature import collar_delta

    return collar_delta(G, alpha, beta, grid=grid, n_rows=n_rows)
