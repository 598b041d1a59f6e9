"""Weil-Petersson curvature from the integrals I_abcd = int mu_a conj(mu_b) Delta(mu_c conj(mu_d)) dA.

Three evaluation tiers:

* collar-leading: on each collar mu_a is replaced by its main term
  a_a(eta) omega_eta and Delta(sin^4) = sin^2 / 2, giving
  I_abcd = (3 pi / 16) sum_eta l_eta a_a a_b a_c a_d (exact on cyclic models);
* collar mode-0: the meridian average of mu_a conj(mu_b) is sampled on the
  collar cylinder and Delta applied through the rotationally invariant solve;
* full quadrature: nested Monte Carlo, Delta f(z) = E f(exp_z(r, phi)) with
  r drawn from the radial density 2 Q_1(cosh r) sinh r of the kernel.

Curvature conventions: the tensor R(mu, nu, rho, sigma) is
(I(mu,nu,rho,sigma) + I(mu,sigma,rho,nu)) / 2, evaluated on root-length
gradients lambda_a = grad l_a / (2 l_a^{1/2}); the Hermitian form is half the
Petersson form.  Holomorphic curvature is -R(a,a,a,a) / <<a,a>>^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize

from . import hyp2
from .beltrami import CollarChart, TWO_PI, _taper, collar_width
from .greens import ExpansionCheck, apply_delta_rotinv, collar_cutoff
from .pairing import (COVER_FRAME, StatisticalErrorTooLarge, _sample_domain, evaluator_for,
                      frame_lengths, gram_matrix, pairing_series)

COLLAR_SIN6 = 3.0 * math.pi / 8.0


class DegenerateSection(ValueError):
    pass


class ZeroVector(ValueError):
    pass


class InvalidPartition(ValueError):
    pass


class SearchBudgetExceeded(RuntimeError):
    pass


@dataclass
class CurvatureIntegral:
    indices: tuple
    value: complex
    method: str
    error: float
    remainder: str = ""
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# collar-leading tier


def collar_sin6_integral(ell, n=64):
    """Gauss-Legendre value of int_c sin^6 dA = l int_l^{pi-l} sin^4 t dt."""
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = ell, math.pi - ell
    t = 0.5 * (a + b) + 0.5 * (b - a) * x
    return ell * 0.5 * (b - a) * float(np.sum(w * np.sin(t) ** 4))


def _remainder_tag(idx):
    counts = sorted((idx.count(k) for k in set(idx)), reverse=True)
    if counts == [4]:
        return "O(l_a^3)"
    if counts == [3, 1]:
        return "O(l_a^4 l_b^2)"
    return "O((l_a l_b l_c l_d)^(1/2))"


def curvature_integral_collar(indices, lengths, coeffs):
    """Leading collar value of I_abcd.

    lengths maps geodesic -> length; coeffs maps collar geodesic eta ->
    {frame geodesic -> a_frame(eta)}, the main coefficients on that collar.
    """
    a, b, c, d = indices
    total = 0.0
    for eta, row in coeffs.items():
        total += lengths[eta] * row[a] * row[b] * row[c] * row[d]
    return CurvatureIntegral(tuple(indices), 0.5 * COLLAR_SIN6 * total, "collar-leading", 0.0,
                             _remainder_tag(list(indices)))


def main_coefficient_table(G, frame=None, R=None):
    """{eta: {beta: a_beta(eta)}} with a_beta(eta) = <grad l_beta, grad l_eta> / l_eta."""
    frame = list(frame) if frame is not None else G.frame()
    lengths = frame_lengths(G, frame)
    P = {}
    for i, x in enumerate(frame):
        for y in frame[i:]:
            P[x, y] = P[y, x] = pairing_series(G, x, y, R).value
    return {eta: {b: P[b, eta] / lengths[eta] for b in frame} for eta in frame}, lengths, P


# ---------------------------------------------------------------------------
# collar mode-0 tier


def _surface_area(G, cover):
    if G.kind == "cyclic-hyperbolic":
        return math.inf
    return (4.0 if cover else 2.0) * math.pi


def _mode0_profile(G, alpha, beta, ds=0.05, spacing=0.05, extra=5.0):
    """Meridian averages g0(s) of mu_a conj(mu_b) on the cylinder about alpha.

    Rows sit at Fermi distance s with about (l cosh s)/spacing points each;
    the range |s| <= w + extra runs well past the collar, where the average
    settles to the surface mean <mu_a, mu_b>/area.
    """
    key = ("mode0", alpha, beta, ds, spacing, extra)
    if key in G._cache:
        return G._cache[key]
    ell = G.length
    w = collar_width(ell)
    cover = alpha in COVER_FRAME or beta in COVER_FRAME
    if G.kind == "cyclic-hyperbolic":
        S = w + 1.0
    else:
        S = w + extra
    n = int(math.ceil(2 * S / ds))
    s = np.linspace(-S, S, n + 1)
    counts = np.maximum(8, np.ceil(ell * np.cosh(s) / spacing).astype(int))
    row = np.repeat(np.arange(len(s)), counts)
    off = np.concatenate([[0], np.cumsum(counts)[:-1]])
    j = np.arange(row.size) - off[row]
    rho = (j + 0.5) * ell / counts[row]
    z = hyp2.from_fermi(rho, s[row])
    ev_a = evaluator_for(G, alpha)
    mu_a = ev_a.mu(z)
    mu_b = mu_a if beta == alpha else evaluator_for(G, beta).mu(z)
    prod = mu_a * np.conj(mu_b)
    g0 = np.bincount(row, prod.real, len(s)) / counts + 1j * np.bincount(row, prod.imag, len(s)) / counts
    P_ab = pairing_series(G, alpha, beta).value
    P_aa = pairing_series(G, alpha, alpha).value
    area = _surface_area(G, cover)
    prof = {"s": s, "g0": g0, "S": S, "w": w, "ell": ell, "c0": P_ab / area if math.isfinite(area) else 0.0,
            "a": P_aa / ell, "ab": P_aa / ell * P_ab / ell, "P": P_ab, "points": int(z.size)}
    G._cache[key] = prof
    return prof


def _delta_mode0(prof):
    """F0 = Delta of the meridian average, as a callable of theta.

    Delta(c0) = c0 and Delta(sin^4) = sin^2 / 2 exactly; the remainder
    r = g0 - ab sin^4 - c0 is tapered to zero at |s| = S and passed to the
    rotationally invariant solve.
    """
    s, g0, S = prof["s"], prof["g0"], prof["S"]
    ab, c0 = prof["ab"], prof["c0"]
    r = (g0 - ab / np.cosh(s) ** 4 - c0) * _taper((S - np.abs(s)) / 2.0)
    parts = []
    for comp in (r.real, r.imag):
        if not np.any(comp):
            parts.append(None)
            continue
        spl = CubicSpline(s, comp)

        def fn(theta, spl=spl):
            ss = np.log(np.tan(np.asarray(theta, float) / 2.0))
            return np.where(np.abs(ss) < S, spl(np.clip(ss, -S, S)), 0.0)

        parts.append(apply_delta_rotinv(fn).evaluator)

    def F0(theta):
        t = np.asarray(theta, float)
        out = c0 + 0.5 * ab * np.sin(t) ** 2 + 0j
        if parts[0] is not None:
            out = out + parts[0](t)
        if parts[1] is not None:
            out = out + 1j * parts[1](t)
        return out

    return F0


def collar_delta(G, alpha="alpha", beta=None, grid=None, n_rows=None):
    """2 Delta(mu_a conj mu_b) against chi a_a(a) a_b(a) sin^2 on the collar of alpha.

    Only the meridian mean (mode 0) of the product enters; the oscillating
    modes of mu_a conj(mu_b) are exponentially small inside the collar.
    """
    alpha = alpha if alpha is not None else G.frame()[0]
    beta = alpha if beta is None else beta
    kw = {}
    if n_rows is not None:
        ell = G.length
        S = collar_width(ell) + (1.0 if G.kind == "cyclic-hyperbolic" else 5.0)
        kw["ds"] = 2 * S / n_rows
    prof = _mode0_profile(G, alpha, beta, **kw)
    F0 = _delta_mode0(prof)
    lo, hi = CollarChart.for_length(prof["ell"]).bounds
    th = np.linspace(lo, hi, 801) if grid is None else np.asarray(grid, float)
    chi = collar_cutoff(th, prof["ell"]) * collar_cutoff(math.pi - th, prof["ell"])
    main = chi * prof["ab"] * np.sin(th) ** 2
    rem = 2.0 * F0(th) - main
    rem = rem.real if not np.any(np.iscomplex(rem)) else rem
    return ExpansionCheck(prof["ell"], float(np.max(np.abs(rem))), th, rem, main,
                          {"points": prof["points"], "c0": prof["c0"], "a": prof["a"]})


def curvature_integral_mode0(G, alpha=None, beta=None, gamma=None, delta=None, n_quad=4001):
    """I_abcd from the meridian averages on the collar of alpha.

    The collar |s| <= w contributes l int cosh(s) g0_ab(s) F0_cd(s) ds; the
    thin remainder of the surface is charged at the collar-boundary value of
    F0.  Higher meridian modes are not included.
    """
    alpha = alpha if alpha is not None else G.frame()[0]
    beta = alpha if beta is None else beta
    gamma = alpha if gamma is None else gamma
    delta = gamma if delta is None else delta
    p_ab = _mode0_profile(G, alpha, beta)
    p_cd = p_ab if (gamma, delta) == (alpha, beta) else _mode0_profile(G, gamma, delta)
    F0 = _delta_mode0(p_cd)
    w, ell = p_ab["w"], p_ab["ell"]
    s = np.linspace(-w, w, n_quad)
    g = CubicSpline(p_ab["s"], p_ab["g0"].real)(s) + 1j * CubicSpline(p_ab["s"], p_ab["g0"].imag)(s)
    th = 2.0 * np.arctan(np.exp(s))
    f = ell * np.cosh(s) * g * F0(th)
    from scipy.integrate import simpson
    collar = simpson(f.real, x=s) + 1j * simpson(f.imag, x=s)
    mass = simpson((ell * np.cosh(s) * g).real, x=s)
    edge = 0.5 * (F0(th[0]) + F0(th[-1]))
    thick = (p_ab["P"] - mass) * edge if G.kind != "cyclic-hyperbolic" else 0.0
    val = collar + thick
    val = val.real if abs(val.imag) < 1e-15 else val
    return CurvatureIntegral((alpha, beta, gamma, delta), val, "collar-mode0", float(abs(thick)),
                             _remainder_tag([alpha, beta, gamma, delta]),
                             {"collar": complex(collar), "thick": complex(thick)})


@dataclass
class AreaVariation:
    ell: float
    theta: np.ndarray
    density: np.ndarray
    leading: np.ndarray
    sup_deviation: float
    integral: float


def second_variation_area(G, alpha=None, theta=None):
    """Density 2(-|mu|^2 + Delta|mu|^2) on the collar against a^2 (sin^2 - 2 sin^4).

    The density is reported per unit hyperbolic area as a function of theta,
    by default at the sampled meridian rows inside the collar; the integral is
    over the collar.
    """
    alpha = alpha if alpha is not None else G.frame()[0]
    prof = _mode0_profile(G, alpha, alpha)
    F0 = _delta_mode0(prof)
    ell = prof["ell"]
    lo, hi = CollarChart.for_length(ell).bounds
    if theta is None:
        # the sampled rows inside the collar, no interpolation
        th = 2.0 * np.arctan(np.exp(prof["s"]))
        keep = (th >= lo) & (th <= hi)
        th, g = th[keep], prof["g0"].real[keep]
    else:
        th = np.asarray(theta, float)
        g = CubicSpline(prof["s"], prof["g0"].real)(np.log(np.tan(th / 2.0)))
    dens = 2.0 * (-g + F0(th).real)
    a2 = prof["a"] ** 2
    lead = a2 * (np.sin(th) ** 2 - 2.0 * np.sin(th) ** 4)
    # dA = l d(theta) / sin^2 on the collar
    integral = float(ell * np.trapezoid(dens / np.sin(th) ** 2, th))
    return AreaVariation(ell, th, dens, lead, float(np.max(np.abs(dens - lead))), integral)


# ---------------------------------------------------------------------------
# full quadrature tier


def _kernel_cdf_tail(r):
    """1 - F(r) for the radial density 2 Q_1(cosh r) sinh r."""
    r = np.asarray(r, float)
    x = np.cosh(np.minimum(r, 700.0))
    big = x > 30.0
    xb = np.where(big, x, 2.0)
    ser = 2.0 * sum(xb ** -(2 * m + 1) / ((2 * m + 1) * (2 * m + 3)) for m in range(6))
    with np.errstate(divide="ignore", invalid="ignore"):
        sh = np.sinh(r)
        direct = 1.0 + 2.0 * np.sinh(r / 2) ** 2 - sh ** 2 * np.log(1.0 / np.tanh(r / 2))
    return np.where(big, ser, np.where(r > 0, direct, 1.0))


_R_TABLE = np.concatenate([[0.0], np.geomspace(1e-9, 1.0, 3000), np.linspace(1.0, 45.0, 8000)[1:]])
_T_TABLE = np.minimum.accumulate(_kernel_cdf_tail(_R_TABLE))


def sample_kernel_radius(u):
    """Inverse transform: r with 1 - F(r) = u."""
    return np.interp(-np.asarray(u, float), -_T_TABLE, _R_TABLE)


def curvature_integral_full(G, alpha=None, beta=None, gamma=None, delta=None, R=None, samples=1_000_000,
                            tol=None, seed=0, batch=50_000):
    """Nested Monte Carlo estimate of I_abcd with its standard error.

    Outer points cover a fundamental domain (D union B(D) for the 2-curve
    frame) with area weights; each carries one inner point at kernel-distributed
    distance, an unbiased estimate of Delta(mu_c conj mu_d).  R is the excess
    cutoff of the coset series (default evaluator setting when None).
    """
    alpha = alpha if alpha is not None else G.frame()[0]
    beta = alpha if beta is None else beta
    gamma = alpha if gamma is None else gamma
    delta = gamma if delta is None else delta
    names = (alpha, beta, gamma, delta)
    kw = {} if R is None else {"excess": R}
    evs = {n: evaluator_for(G, n, **kw) for n in set(names)}
    cover = any(n in COVER_FRAME for n in names)
    Bm = G.pingpong.mats[2] if cover else None
    rng = np.random.default_rng(seed)
    total, sq, done = 0.0 + 0.0j, 0.0, 0
    while done < samples:
        n = min(batch, samples - done)
        z, wt = _sample_domain(G, n, rng)
        live = wt > 0
        zs = [z[live]]
        if cover:
            zl = zs[0]
            zs.append((Bm[0, 0] * zl + Bm[0, 1]) / (Bm[1, 0] * zl + Bm[1, 1]))
        f = np.zeros(n, dtype=complex)
        acc = np.zeros(int(live.sum()), dtype=complex)
        for zz in zs:
            r = sample_kernel_radius(rng.uniform(0.0, 1.0, zz.size))
            ww = hyp2.exp_map(zz, r, rng.uniform(0.0, 2 * math.pi, zz.size))
            ab = evs[alpha].mu(zz) * np.conj(evs[beta].mu(zz))
            cd = evs[gamma].mu(ww) * np.conj(evs[delta].mu(ww))
            acc += ab * cd
        f[live] = acc
        v = f * wt
        total += v.sum()
        sq += float(np.sum(np.abs(v) ** 2))
        done += n
    mean = total / samples
    se = math.sqrt(max(sq / samples - abs(mean) ** 2, 0.0) / samples)
    if tol is not None and se > tol:
        raise StatisticalErrorTooLarge(f"standard error {se:.3e} exceeds {tol:.3e} after {samples} samples")
    val = mean.real if abs(mean.imag) <= 3 * se else mean
    return CurvatureIntegral(names, val, "full-quadrature", se, _remainder_tag(list(names)),
                             {"samples": samples, "seed": seed})


# ---------------------------------------------------------------------------
# the tensor


@dataclass
class CurvatureTensorTable:
    """R(lambda_a, conj lambda_b, lambda_c, conj lambda_d) over a frame."""
    frame: list
    entries: np.ndarray
    gram: np.ndarray
    lengths: dict
    errors: np.ndarray = None
    method: str = ""

    def symmetry_residual(self):
        """Largest violation of the Kahler symmetries of the table."""
        R = self.entries
        r1 = np.abs(R - R.transpose(2, 1, 0, 3)).max()
        r2 = np.abs(R - R.transpose(0, 3, 2, 1)).max()
        r3 = np.abs(R - np.conj(R.transpose(1, 0, 3, 2))).max()
        return float(max(r1, r2, r3))


def tensor_from_integrals(frame, lengths, I, gram, errors=None, method=""):
    """Assemble R from an (n,n,n,n) array of I values on geodesic-length gradients."""
    I = np.asarray(I, dtype=complex)
    root = np.array([math.sqrt(lengths[f]) for f in frame])
    scale = 16.0 * np.einsum("a,b,c,d->abcd", root, root, root, root)
    R = 0.5 * (I + I.transpose(0, 3, 2, 1)) / scale
    err = None if errors is None else np.asarray(errors, float) / scale
    return CurvatureTensorTable(list(frame), R, np.asarray(gram, dtype=complex), dict(lengths), err, method)


def wp_curvature(G, frame=None, method="collar-leading", R=None, samples=200_000, seed=0):
    """Curvature table over a frame.

    method: "collar-leading" (closed form from the main coefficients) or
    "full-quadrature" (Monte Carlo for every index tuple; slow).
    """
    frame = list(frame) if frame is not None else G.frame()
    coeffs, lengths, P = main_coefficient_table(G, frame, R)
    n = len(frame)
    I = np.zeros((n,) * 4, dtype=complex)
    E = np.zeros((n,) * 4)
    for idx in itertools.product(range(n), repeat=4):
        names = tuple(frame[k] for k in idx)
        if method == "collar-leading":
            ci = curvature_integral_collar(names, lengths, coeffs)
        elif method == "full-quadrature":
            ci = curvature_integral_full(G, *names, samples=samples, seed=seed)
        else:
            raise ValueError(f"unknown method {method!r}")
        I[idx], E[idx] = ci.value, ci.error
    gram = gram_matrix(G, frame, R).entries
    return tensor_from_integrals(frame, lengths, I, gram, E, method)


def _coeffs(a, n):
    a = np.asarray(a, dtype=complex).ravel()
    if a.size != n:
        raise ValueError(f"coefficient array must have length {n}")
    return a


def _R4(table, x, yb, z, wb):
    return np.einsum("abcd,a,b,c,d->", table.entries, x, np.conj(yb), z, np.conj(wb))


def _herm(table, x, y):
    return np.einsum("ab,a,b->", table.gram, x, np.conj(y))


@dataclass
class SectionSpec:
    a: np.ndarray
    b: np.ndarray
    orthogonal: bool = False


def orthogonalize(table, section):
    """Real Gram-Schmidt of b against a in the Riemannian metric Re<<.,.>>."""
    a = _coeffs(section.a, len(table.frame))
    b = _coeffs(section.b, len(table.frame))
    aa = _herm(table, a, a).real
    if not aa > 0:
        raise DegenerateSection("first vector vanishes")
    b = b - (_herm(table, b, a).real / aa) * a
    return SectionSpec(a, b, True)


def sectional_curvature(table, section, rtol=1e-10):
    """Riemannian sectional curvature of the real span of a and b.

    With x, y the (1,0) parts, the numerator is
    -2 Re R(x, y, y, x) + 2 Re R(x, y, x, y) and the denominator
    4 (<<x,x>><<y,y>> - (Re<<x,y>>)^2).
    """
    sec = orthogonalize(table, section)
    x, y = sec.a, sec.b
    xx, yy = _herm(table, x, x).real, _herm(table, y, y).real
    den = 4.0 * (xx * yy - _herm(table, x, y).real ** 2)
    if not den > rtol * 4.0 * xx * max(_herm(table, section.b, section.b).real, 0.0):
        raise DegenerateSection("a and b are linearly dependent over the reals")
    num = -2.0 * _R4(table, x, y, y, x).real + 2.0 * _R4(table, x, y, x, y).real
    return float(num / den)


def holomorphic_curvature(table, a):
    """-R(a, a, a, a) / <<a, a>>^2."""
    a = _coeffs(a, len(table.frame))
    if not np.any(a != 0):
        raise ZeroVector("holomorphic curvature needs a nonzero direction")
    h = _herm(table, a, a).real
    return float(-_R4(table, a, a, a, a).real / h ** 2)


# ---------------------------------------------------------------------------
# near-stratum model


def stratum_distance(lengths):
    """(2 pi sum l)^{1/2}."""
    l = np.atleast_1d(np.asarray(lengths, float))
    if np.any(l <= 0):
        raise ValueError("lengths must be positive")
    return float(math.sqrt(2.0 * math.pi * l.sum()))


def model_metric_norm(coeffs):
    """Hermitian norm of sum c_a lambda_a in the product model, <<lambda_a, lambda_b>> = delta/(4 pi).

    The Riemannian norm of the model metric 2 pi sum (d l^{1/2})^2 + (d l^{1/2} J)^2
    is sqrt(2) times this.
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    return float(math.sqrt(np.sum(np.abs(c) ** 2) / (4.0 * math.pi)))


# ---------------------------------------------------------------------------
# flats


@dataclass
class FlatsSubspace:
    """Real span of complex coefficient vectors over a frame of size n.

    sigma lists the frame indices of pinched geodesics (one factor each);
    parts lists the frame index sets of the remaining product factors.
    """
    vectors: np.ndarray
    sigma: list
    parts: list
    n: int = None

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=complex))
        if self.n is None:
            self.n = self.vectors.shape[1]

    def factors(self):
        return [("sigma", [k]) for k in self.sigma] + [("part", list(p)) for p in self.parts]


@dataclass
class FlatsReport:
    flat: bool
    dimension: int
    projection_dims: list
    max_dimension: int

    def lines(self):
        out = [f"{kind}{idx}: projection dimension {d}" for (kind, idx), d in self.projection_dims]
        out.append(f"subspace dimension {self.dimension}, bound {self.max_dimension}")
        out.append("flat-limit" if self.flat else "not-flat")
        return out


def _real_rank(V, tol=1e-9):
    V = np.atleast_2d(V)
    if V.size == 0:
        return 0
    M = np.concatenate([V.real, V.imag], axis=1)
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))


def _check_partition(S):
    seen = []
    for kind, idx in S.factors():
        if not idx:
            raise InvalidPartition("empty factor")
        seen.extend(idx)
    if sorted(seen) != list(range(S.n)):
        raise InvalidPartition("factors must be disjoint and cover the frame")
    if S.vectors.shape[1] != S.n:
        raise InvalidPartition("vectors do not match the frame size")


def classify_flat(S):
    """Flat limit iff every factor projection of span_R(S) has real dimension <= 1."""
    _check_partition(S)
    dims = [((kind, idx), _real_rank(S.vectors[:, idx])) for kind, idx in S.factors()]
    bound = len(S.sigma) + len(S.parts)
    dim = _real_rank(S.vectors)
    flat = all(d <= 1 for _, d in dims) and dim <= bound
    return FlatsReport(flat, dim, dims, bound)


@dataclass
class Witness:
    x: np.ndarray
    y: np.ndarray
    curvature: float
    evaluations: int


def beyond_flats_witness(table, vectors, budget=20_000, n_random=64, seed=0):
    """Most negative sectional curvature over 2-planes in span_R(vectors).

    Grid over pairs of basis vectors and seeded random pairs, followed by
    Nelder-Mead refinement of the best starts.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=complex))
    k = V.shape[0]
    if _real_rank(V) <= len(table.frame):
        raise ValueError("subspace must have real dimension above the complex frame dimension")
    count = [0]

    def K(p):
        count[0] += 1
        if count[0] > budget:
            raise SearchBudgetExceeded(f"more than {budget} curvature evaluations")
        s, t = p[:k], p[k:]
        try:
            return sectional_curvature(table, SectionSpec(s @ V, t @ V))
        except DegenerateSection:
            return math.inf

    starts = []
    eye = np.eye(k)
    for i, j in itertools.combinations(range(k), 2):
        starts.append(np.concatenate([eye[i], eye[j]]))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        starts.append(rng.standard_normal(2 * k))
    vals = [K(p) for p in starts]
    order = np.argsort(vals)[:4]
    best_p, best = starts[order[0]], vals[order[0]]
    for i in order:
        res = minimize(K, starts[i], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxfev": 2000})
        if res.fun < best:
            best_p, best = res.x, float(res.fun)
    if not math.isfinite(best):
        raise SearchBudgetExceeded("no non-degenerate section found")
    return Witness(best_p[:k] @ V, best_p[k:] @ V, float(best), count[0])
