"""Elementary differentials, the coset series Theta_alpha and harmonic
Beltrami differentials mu_alpha = conj(Theta_alpha) (ds^2)^{-1}.

Conventions: alpha is the imaginary axis, the coset sum is
Theta(z) = (2/pi) sum_v (v^{-1})^* (dz/z)^2 over lifts v alpha, and for a lift
with v = [[a, b], [c, d]] the term is 1/((dz - b)(cz - a))^2 while
sinh d(z, v alpha) = |Re((dz - b) conj(cz - a))| / Im z.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import csv
import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import hyp2
from .fuchsian import (DEFAULT_BUDGET, CutoffTooSmall, coset_reps, injectivity_radius,
                       lifts_near, lifts_near_many)

TWO_PI = 2.0 / math.pi
LAURENT_GATE = 1e-9


class QuadratureNonConvergent(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# collars and the elementary differential


def collar_width(ell):
    """w with sinh(w) sinh(ell/2) = 1."""
    if not ell > 0:
        raise ValueError("length must be positive")
    return math.asinh(1.0 / math.sinh(ell / 2.0))


@dataclass(frozen=True)
class CollarChart:
    """Collar {l <= arg z <= pi - l} about iR+ (extended: l/2 instead of l)."""
    geodesic: str
    ell: float
    width: float
    extended: bool = False

    @classmethod
    def for_length(cls, ell, geodesic="alpha", extended=False):
        return cls(geodesic, float(ell), collar_width(ell), extended)

    @property
    def bounds(self):
        t = self.ell / 2.0 if self.extended else self.ell
        return t, math.pi - t

    def theta(self, z):
        return np.angle(np.asarray(z, dtype=complex))

    def contains(self, z):
        lo, hi = self.bounds
        t = self.theta(z)
        return (t >= lo) & (t <= hi)

    def sin2(self, z):
        return np.sin(self.theta(z)) ** 2


def eval_omega(z):
    """Beltrami coefficient of conj((dz/z)^2)(ds^2)^{-1}: y^2 / conj(z)^2."""
    z = hyp2.as_complex(z)
    return np.imag(z) ** 2 / np.conj(z) ** 2


@lru_cache(maxsize=None)
def mean_value_constant(n_theta=200, n_r=24, n_phi=128):
    """max over a theta grid of |omega(p)| / int_{B(p;1)} |omega| dA.

    Calibrates the mean-value inequality |mu(p)| <= C int_{B(p,1)} |mu| dA
    on the cyclic model; the maximum is attained near the real axis.
    """
    x, w = leggauss(n_r)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * w * np.sinh(r)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    best = 0.0
    for t in np.linspace(0.02, np.pi / 2, n_theta):
        p = np.exp(1j * t)
        q = hyp2.exp_map(p, r[:, None], phi[None, :])
        integral = float(np.sum(wr[:, None] * np.abs(eval_omega(q))) * 2.0 * np.pi / n_phi)
        best = max(best, float(np.abs(eval_omega(p))) / integral)
    return best


def _taper(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)

    def psi(v):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)

    a, b = psi(x), psi(1.0 - x)
    return a / (a + b)


def _lift_terms(z, V):
    """(terms, distances) for points z (n,) against lifts V (m,2,2)."""
    a, b, c, d = V[:, 0, 0], V[:, 0, 1], V[:, 1, 0], V[:, 1, 1]
    zz = z[:, None]
    p1 = d[None] * zz - b[None]
    p2 = c[None] * zz - a[None]
    dist = np.arcsinh(np.abs(np.real(p1 * np.conj(p2))) / np.imag(zz))
    return 1.0 / (p1 * p2) ** 2, dist


# ---------------------------------------------------------------------------
# the coset series


class BeltramiEvaluator:
    """Truncated coset series for Theta_alpha and mu_alpha.

    Terms are weighted by a smooth taper in d(z, lift) falling from 1 to 0 over
    [R(z) - 1, R(z)].  R(z) is the absolute cutoff when one is given (the
    truncated series is then exactly group-equivariant) and otherwise the
    distance from the reduced point to the axis, capped at `s_cap`, plus
    `excess`; the truncation error is then uniform in absolute terms.  Points in a
    cusp region above normalized horocyclic height `cusp_height` evaluate to
    zero; the cusp bound (cusp_bound_check) limits what is lost.  `parity` keeps only lifts of
    one B-parity, giving the coset series of the even-parity double cover.
    """

    def __init__(self, G, alpha=None, cutoff=None, excess=8.0, cusp_height=1.0, parity=None,
                 budget=DEFAULT_BUDGET, chunk=4_000_000, s_cap=1.0):
        self.G = G
        self.alpha = alpha if alpha is not None else G.frame()[0]
        self.cutoff = cutoff
        self.excess = float(excess)
        self.s_cap = float(s_cap)
        self.cusp_height = cusp_height
        self.parity = parity
        self.budget = budget
        self.chunk = chunk
        if G.kind == "cyclic-hyperbolic":
            self.mode = "cyclic"
            self.ell = G.length
        elif G.pingpong is not None and self.alpha == "alpha":
            self.mode = "pingpong"
            self.pp = G.pingpong
            self.ell = G.length
            r0, r1 = self.pp.rho_window()
            self._rho0, self._rhow = r0, r1 - r0
        elif G.kind == "explicit" and self.alpha in G.geodesics:
            if cutoff is None:
                raise CutoffTooSmall("explicit groups need an absolute cutoff")
            self.mode = "generic"
            A = G.primitives[self.alpha]
            self.ell = hyp2.translation_length(A)
            reps = coset_reps(G, self.alpha, cutoff, budget)
            self._lifts = np.array([np.linalg.inv(C.as_array()) for C in reps])
        else:
            raise ValueError(f"no coset series for geodesic {self.alpha!r} in a {G.kind} group")
        if parity is not None and self.mode != "pingpong":
            raise ValueError("parity selection needs a punctured-torus group")

    # -- metadata
    @property
    def truncation_bound(self):
        """Bound on |mu| lost to truncation: lifts beyond distance d are
        counted as l e^d / (2 pi) per unit area, each contributing at most
        (2/pi) 4 e^{-2d}."""
        if self.mode == "cyclic":
            return 0.0
        R = self.cutoff if self.cutoff is not None else self.excess
        return 2.0 * 4.0 * self.ell / math.pi ** 2 * math.exp(-(R - 1.0))

    # -- cells for the punctured torus
    def _cell_geometry(self, jj, mm, kk):
        sc = jj + 0.5
        rc = self._rho0 + (kk + 0.5) * self._rhow / mm
        r = 0.5 + 0.5 * math.cosh(max(abs(jj), abs(jj + 1))) * self._rhow / mm
        if self.cutoff is not None:
            cut = self.cutoff + r
        else:
            cut = min(abs(sc) + 0.5, self.s_cap) + self.excess + r
        return complex(hyp2.from_fermi(rc, sc)), cut

    def _cell_store(self):
        key = ("cells", self.cutoff, self.excess, self.s_cap)
        return self.G._cache.setdefault(key, {})

    def _fill_cells(self, keys):
        store = self._cell_store()
        todo = [tuple(int(v) for v in k) for k in keys]
        todo = [k for k in todo if k not in store]
        if not todo:
            return
        geo = [self._cell_geometry(*k) for k in todo]
        res = lifts_near_many(self.pp, [c for c, _ in geo], [r for _, r in geo], self.budget)
        for k, vp in zip(todo, res):
            store[k] = vp

    def _theta_reduced(self, w, flip=None):
        """Theta at points of the closed domain D (punctured torus).

        flip marks points reached by an odd reduction, for which the lifts of
        the opposite parity are the relevant ones.
        """
        out = np.zeros(w.shape, dtype=complex)
        rho, s = hyp2.fermi(w)
        live = np.ones(w.shape, dtype=bool)
        if self.cusp_height is not None:
            live = self.pp.horo_height(w) <= self.cusp_height
        j = np.floor(s).astype(int)
        smax = np.maximum(np.abs(j), np.abs(j + 1)).astype(float)
        m = np.ceil(self._rhow * np.cosh(smax)).astype(int)
        k = np.clip(np.floor((rho - self._rho0) / self._rhow * m).astype(int), 0, m - 1)
        if self.cutoff is not None:
            reff = np.full(w.shape, float(self.cutoff))
        else:
            reff = np.minimum(np.abs(s), self.s_cap) + self.excess
        want = np.zeros(w.shape, dtype=int)
        if self.parity is not None:
            want = self.parity ^ (np.zeros(w.shape, dtype=int) if flip is None else flip)
        keys = np.stack([j, m, k, want], axis=1)
        idx = np.nonzero(live)[0]
        if not idx.size:
            return out
        uk, inv = np.unique(keys[idx], axis=0, return_inverse=True)
        inv = inv.ravel()
        self._fill_cells(uk[:, :3])
        store = self._cell_store()
        order = np.argsort(inv, kind="stable")
        bounds = np.searchsorted(inv[order], np.arange(len(uk) + 1))
        for ci, key in enumerate(uk):
            sel = idx[order[bounds[ci]:bounds[ci + 1]]]
            V, par = store[tuple(int(v) for v in key[:3])]
            if self.parity is not None:
                V = V[par == key[3]]
            out[sel] = self._sum_terms(w[sel], V, reff[sel])
        return out

    def _sum_terms(self, z, V, reff):
        out = np.zeros(z.shape, dtype=complex)
        step = max(1, self.chunk // max(1, len(V)))
        for i in range(0, len(z), step):
            zz, rr = z[i:i + step], reff[i:i + step]
            t, d = _lift_terms(zz, V)
            if self.cutoff is not None and np.any(d.min(axis=1) + 2.0 > rr):
                raise CutoffTooSmall("cutoff below distance to the nearest lift plus 2")
            out[i:i + step] = TWO_PI * np.sum(t * _taper(rr[:, None] - d), axis=1)
        return out

    # -- public evaluation
    def theta(self, z):
        """Coefficient of dz^2 of Theta_alpha at z (array input allowed)."""
        z = hyp2.as_complex(z)
        zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        if self.mode == "cyclic":
            out = TWO_PI / zz ** 2
        elif self.mode == "generic":
            out = self._sum_terms(zz, self._lifts, np.full(zz.shape, float(self.cutoff)))
        else:
            w, M, par = self.pp.reduce(zz, with_parity=True)
            c, d = M[:, 1, 0], M[:, 1, 1]
            out = self._theta_reduced(w, par) / (c * zz + d) ** 4
        return out.reshape(np.shape(z)) if np.ndim(z) else complex(out[0])

    def mu(self, z):
        z = hyp2.as_complex(z)
        return np.conj(self.theta(z)) * np.imag(z) ** 2

    def nearest_lift_distance(self, z):
        """Distance from z to the nearest lift of alpha, i.e. d(alpha, z) on the surface."""
        zz = np.atleast_1d(np.asarray(hyp2.as_complex(z), dtype=complex)).ravel()
        if self.mode == "cyclic":
            out = hyp2.dist_to_imaginary_axis(zz)
        elif self.mode == "generic":
            out = _lift_terms(zz, self._lifts)[1].min(axis=1)
        else:
            w, _, flip = self.pp.reduce(zz, with_parity=True)
            out = np.empty(w.shape)
            for i, p in enumerate(w):
                cut = float(hyp2.dist_to_imaginary_axis(p)) + 1e-9
                while True:
                    V, par = lifts_near(self.pp, p, cut, self.budget)
                    if self.parity is not None:
                        V = V[par == self.parity ^ flip[i]]
                    if len(V):
                        break
                    cut += 1.0
                out[i] = _lift_terms(np.array([p]), V)[1].min()
        return out.reshape(np.shape(z)) if np.ndim(z) else float(out[0])


def eval_theta(ev, z):
    return ev.theta(z)


def eval_mu(ev, z):
    return ev.mu(z)


# ---------------------------------------------------------------------------
# checks


@dataclass
class DecayReport:
    ratios: np.ndarray
    max_ratio: float
    points: np.ndarray


def pointwise_decay_check(ev, samples):
    """max of |mu(p)| inj(p) e^{d(alpha, p)} / l over sample points."""
    pts = np.atleast_1d(np.asarray(samples, dtype=complex))
    mu = np.abs(ev.mu(pts))
    d = np.atleast_1d(ev.nearest_lift_distance(pts))
    inj = np.array([injectivity_radius(ev.G, p) for p in pts])
    ratios = mu * inj * np.exp(d) / ev.ell
    return DecayReport(ratios, float(ratios.max()), pts)


@dataclass
class CuspBoundReport:
    boundary_max: float
    worst_margin: float
    holds: bool
    heights: np.ndarray
    values: np.ndarray
    bounds: np.ndarray


def cusp_bound_check(ev, cusp=0, n_samples=1000, n_boundary=256, max_height=2.5, seed=0):
    """Check |mu| <= e^pi |w| (log|w| / pi)^2 max_{|w| = e^-pi} |mu| in the cusp
    chart w = exp(2 pi i sigma(z)), sigma sending the cusp to infinity with unit
    translation; the boundary circle |w| = e^-pi is horocyclic height 1/2.

    The factor e^pi comes from the Schwarz lemma on |w| <= e^-pi and makes the
    bound an equality scale at the boundary circle; without it the inequality
    already fails there."""
    G = ev.G
    if G.pingpong is None or not G.pingpong.cusp_maps:
        raise ValueError("group has no cusp chart")
    sig = np.asarray(G.pingpong.cusp_maps[cusp])
    si = np.linalg.inv(sig)

    def pull(zeta):
        return (si[0, 0] * zeta + si[0, 1]) / (si[1, 0] * zeta + si[1, 1])

    old = ev.cusp_height
    ev.cusp_height = None
    try:
        xb = np.arange(n_boundary) / n_boundary
        mb = float(np.max(np.abs(ev.mu(pull(xb + 0.5j)))))
        rng = np.random.default_rng(seed)
        Y = rng.uniform(0.5, max_height, n_samples)
        X = rng.uniform(0.0, 1.0, n_samples)
        vals = np.abs(ev.mu(pull(X + 1j * Y)))
    finally:
        ev.cusp_height = old
    absw = np.exp(-2.0 * np.pi * Y)
    bounds = math.exp(math.pi) * absw * (np.log(absw) / np.pi) ** 2 * mb
    margin = float(np.min(bounds - vals))
    return CuspBoundReport(mb, margin, bool(margin >= -ev.truncation_bound), Y, vals, bounds)


# ---------------------------------------------------------------------------
# Laurent analysis on the collar annulus


@dataclass
class LaurentData:
    ell: float
    coeffs: dict
    radius: float
    nodes: int
    chart: str = "w"

    @property
    def modulus(self):
        """The annulus is exp(-2 pi^2 / l) < |w| < 1."""
        return math.exp(-2.0 * math.pi ** 2 / self.ell)

    def symmetry_residual(self, n):
        """|a_{-n} - conj(a_n) e^{-2 pi^2 n / l}| for the inversion symmetry of
        inputs invariant under z -> -conj(z)."""
        a, b = self.coeffs[n], self.coeffs[-n]
        return abs(b - np.conj(a) * math.exp(-2.0 * math.pi ** 2 * n / self.ell))


def laurent_coefficients(phi, ell, n_window, chart="w", radius=math.exp(-math.pi),
                         n0=64, max_nodes=1 << 16, gate=LAURENT_GATE):
    """Laurent coefficients of w^2 phi(w) on |w| = radius by the trapezoid rule.

    phi(w) is the coefficient of dw^2.  chart 'w' returns coefficients of
    (dw/w)^2; chart 'z' rescales to (dz/z)^2 for z = exp(l log(w) / (2 pi i)),
    so a_0 is the main coefficient of Theta_alpha.
    """
    if chart not in ("w", "z"):
        raise ValueError("chart must be 'w' or 'z'")
    ns = np.arange(-n_window, n_window + 1)
    scale = 1.0 if chart == "w" else -4.0 * math.pi ** 2 / ell ** 2

    def coeffs(N):
        w = radius * np.exp(2j * np.pi * np.arange(N) / N)
        f = w ** 2 * np.asarray(phi(w), dtype=complex)
        F = np.fft.fft(f) / N
        return np.array([F[n % N] * radius ** (-n) for n in ns]) * scale

    N = n0
    prev = coeffs(N)
    while True:
        N *= 2
        if N > max_nodes:
            raise QuadratureNonConvergent(f"Laurent coefficients unstable at {N // 2} nodes")
        cur = coeffs(N)
        if np.max(np.abs(cur - prev)) <= gate:
            return LaurentData(ell, {int(n): complex(c) for n, c in zip(ns, cur)}, radius, N, chart)
        prev = cur


def annulus_differential(ev):
    """phi(w) with phi dw^2 = Theta_alpha dz^2 on the annulus cover, w = e^{2 pi i log(z) / l}."""
    ell = ev.ell

    def phi(w):
        w = np.asarray(w, dtype=complex)
        theta = -ell * np.log(np.abs(w)) / (2.0 * math.pi)
        rho = ell * np.angle(w) / (2.0 * math.pi)
        z = np.exp(rho + 1j * theta)
        dzdw = z * ell / (2j * math.pi * w)
        return ev.theta(z) * dzdw ** 2

    return phi


@dataclass
class MainCoefficients:
    alpha: str
    a_alpha: float
    a_beta: dict
    remainder_bound: float


def main_coefficients(G, frame=None, alpha=None, cutoff=None):
    """a_beta(alpha) = <grad l_beta, grad l_alpha> / l_alpha over the frame."""
    from .pairing import pairing_series, frame_lengths

    frame = list(frame) if frame is not None else G.frame()
    alpha = alpha if alpha is not None else frame[0]
    lengths = frame_lengths(G, frame)
    res = {b: pairing_series(G, alpha, b, cutoff) for b in frame}
    coeffs = {b: r.value / lengths[alpha] for b, r in res.items()}
    err = max(r.error for r in res.values()) / lengths[alpha]
    return MainCoefficients(alpha, coeffs[alpha], coeffs, err)


# ---------------------------------------------------------------------------
# output


def write_samples_csv(ev, points, path):
    """Columns x, y, theta, |mu|, bound, truncation_bound; bound is the
    elementary estimate (2/pi) 4 e^{-2 d(alpha, z)} summed over the nearest lift."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    mu = np.abs(ev.mu(pts))
    d = np.atleast_1d(ev.nearest_lift_distance(pts))
    bound = TWO_PI * 4.0 * np.exp(-2.0 * d)
    with open(path, "w", newline="") as fh:
        fh.write(f"# group={ev.G.kind} alpha={ev.alpha} ell={ev.ell!r}\n")
        fh.write(f"# cutoff={ev.cutoff} excess={ev.excess} cusp_height={ev.cusp_height}\n")
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "theta", "abs_mu", "bound", "truncation_bound"])
        for p, m, b in zip(pts, mu, bound):
            wr.writerow([repr(p.real), repr(p.imag), repr(float(np.angle(p))), repr(float(m)),
                         repr(float(b)), repr(ev.truncation_bound)])
    return path
