"""Weil-Petersson pairings of geodesic-length gradients.

Two independent routes: the distance series over double cosets, and Monte
Carlo integration of mu conj(nu) over a fundamental domain.

Punctured-torus groups also expose a 2-curve frame through the index-two
subgroup of words with even B-exponent sum (a twice-punctured torus).  Its
geodesics alpha1 = alpha and alpha2 = B alpha both have length l; lifts of
alpha1 are the even-parity lifts of alpha and lifts of alpha2 the odd ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import hyp2
from .fuchsian import double_coset_reps

COVER_FRAME = ("alpha1", "alpha2")


class CrossingAxes(ValueError):
    pass


class StatisticalErrorTooLarge(RuntimeError):
    pass


@dataclass
class PairingResult:
    value: float
    method: str
    error: float
    meta: dict = field(default_factory=dict)


@dataclass
class PairingMatrix:
    frame: list
    entries: np.ndarray
    errors: np.ndarray

    def is_positive_definite(self):
        try:
            np.linalg.cholesky(0.5 * (self.entries + self.entries.T))
        except np.linalg.LinAlgError:
            return False
        return True


def riera_summand(u):
    """s(u) = u log((u+1)/(u-1)) - 2 = 2 Q_1(u); series for large u."""
    u = np.asarray(u, dtype=float)
    big = u > 30.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = u * np.log((u + 1.0) / (u - 1.0)) - 2.0
    x = 1.0 / np.where(big, u, 2.0) ** 2
    ser = 2.0 * x * (1 / 3 + x * (1 / 5 + x * (1 / 7 + x * (1 / 9 + x / 11))))
    return np.where(big, ser, direct)


def default_series_cutoff(ell):
    """Cutoff for the double-coset sum: the first lifts sit near distance
    2 log(4/l), so the cutoff grows with the collar."""
    return 10.0 + 2.0 * math.log(1.0 / min(ell, 1.0))


def frame_lengths(G, frame):
    out = {}
    for name in frame:
        if name in COVER_FRAME:
            out[name] = G.length
        elif G.kind == "cyclic-hyperbolic" and name == "core":
            out[name] = G.length
        else:
            out[name] = hyp2.translation_length(G.primitives[name])
    return out


def _series_tail(u, R):
    """Tail estimate: double cosets counted as N(d) ~ c e^d with c fitted at
    the cutoff, each contributing about (8/3) e^{-2d}."""
    if len(u) == 0:
        return 0.0
    c = len(u) * math.exp(-R)
    return (2.0 / math.pi) * (8.0 / 3.0) * c * math.exp(-R)


def pairing_series(G, alpha, beta, R=None):
    """(2/pi)(delta l + sum s(u)) over double-coset representatives."""
    if G.kind == "cyclic-hyperbolic":
        if alpha != beta:
            raise KeyError("cyclic models carry a single geodesic")
        return PairingResult(2.0 / math.pi * G.length, "riera-series", 0.0, {"terms": 0, "cutoff": R})
    cover = alpha in COVER_FRAME or beta in COVER_FRAME
    if cover:
        if not (alpha in COVER_FRAME and beta in COVER_FRAME) or G.pingpong is None:
            raise KeyError("cover frame geodesics need a punctured-torus group")
        ell = G.length
        R = default_series_cutoff(ell) if R is None else R
        dc = double_coset_reps(G, "alpha", "alpha", R)
        want = 0 if alpha == beta else 1
        u = dc.u[dc.parity == want]
        diag = ell if alpha == beta else 0.0
    else:
        lengths = frame_lengths(G, [alpha, beta])
        R = default_series_cutoff(lengths[alpha]) if R is None else R
        dc = double_coset_reps(G, alpha, beta, R)
        if alpha != beta and np.any(dc.crossing):
            raise CrossingAxes(f"{alpha} and {beta} intersect")
        u = dc.u
        diag = lengths[alpha] if alpha == beta else 0.0
    s = np.sort(riera_summand(u))
    val = 2.0 / math.pi * (diag + float(np.sum(s)))
    return PairingResult(val, "riera-series", _series_tail(u, R),
                         {"terms": int(len(u)), "cutoff": R, "min_u": float(u.min()) if len(u) else math.inf})


# ---------------------------------------------------------------------------
# Monte Carlo


def _is_cover(ev):
    return getattr(ev, "parity", None) is not None


def _sample_domain(G, n, rng):
    """Points and importance weights covering a fundamental domain once."""
    if G.kind == "cyclic-hyperbolic":
        r0, r1 = 0.0, G.length
        inside = None
    elif G.pingpong is not None:
        r0, r1 = G.pingpong.rho_window()
        inside = G.pingpong.in_domain
    else:
        raise ValueError("quadrature needs a cyclic or punctured-torus group")
    rho = rng.uniform(r0, r1, n)
    th = rng.uniform(0.0, math.pi, n)
    z = np.exp(rho + 1j * th)
    wt = (r1 - r0) * math.pi / np.sin(th) ** 2
    if inside is not None:
        wt = np.where(inside(z), wt, 0.0)
    return z, wt


def pairing_quadrature(G, mu_ev, nu_ev, samples=1_000_000, tol=None, seed=0, batch=100_000):
    """Monte Carlo estimate of int mu conj(nu) dA over a fundamental domain.

    Points are drawn uniformly in (log r, theta) over a rectangle covering the
    domain and weighted by the area density csc^2(theta).  For the 2-curve
    cover the domain is D union B(D).
    """
    rng = np.random.default_rng(seed)
    cover = _is_cover(mu_ev) or _is_cover(nu_ev)
    Bm = G.pingpong.mats[2] if cover else None
    total = 0.0 + 0.0j
    sq = 0.0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        z, wt = _sample_domain(G, n, rng)
        f = np.zeros(n, dtype=complex)
        live = wt > 0
        zl = z[live]
        f[live] = mu_ev.mu(zl) * np.conj(nu_ev.mu(zl))
        if cover:
            bz = (Bm[0, 0] * zl + Bm[0, 1]) / (Bm[1, 0] * zl + Bm[1, 1])
            f[live] += mu_ev.mu(bz) * np.conj(nu_ev.mu(bz))
        v = f * wt
        total += v.sum()
        sq += float(np.sum(np.abs(v) ** 2))
        done += n
    mean = total / samples
    var = max(sq / samples - abs(mean) ** 2, 0.0)
    se = math.sqrt(var / samples)
    if tol is not None and se > tol:
        raise StatisticalErrorTooLarge(f"standard error {se:.3e} exceeds {tol:.3e} after {samples} samples")
    val = mean.real if abs(mean.imag) <= 3 * se else mean
    return PairingResult(val, "quadrature", se, {"samples": samples, "seed": seed,
                                                 "truncation": max(mu_ev.truncation_bound, nu_ev.truncation_bound)})


# ---------------------------------------------------------------------------
# Gram matrix and norm comparison


def gram_matrix(G, frame=None, R=None):
    """<<l_a, l_b>> = <grad l_a, grad l_b> / (8 sqrt(l_a l_b)), half-Petersson."""
    frame = list(frame) if frame is not None else G.frame()
    lengths = frame_lengths(G, frame)
    n = len(frame)
    P = np.zeros((n, n))
    E = np.zeros((n, n))
    for i, a in enumerate(frame):
        for j in range(i, n):
            b = frame[j]
            r = pairing_series(G, a, b, R)
            scale = 8.0 * math.sqrt(lengths[a] * lengths[b])
            P[i, j] = P[j, i] = r.value / scale
            E[i, j] = E[j, i] = r.error / scale
    return PairingMatrix(frame, P, E)


def evaluator_for(G, name, **kw):
    from .beltrami import BeltramiEvaluator

    if name in COVER_FRAME:
        return BeltramiEvaluator(G, "alpha", parity=COVER_FRAME.index(name), **kw)
    return BeltramiEvaluator(G, name, **kw)


def _sup_grid(G, n_rho, n_theta, cover):
    if G.kind == "cyclic-hyperbolic":
        r0, r1 = 0.0, G.length
    else:
        r0, r1 = G.pingpong.rho_window()
    rho = np.linspace(r0, r1, n_rho, endpoint=False)
    th = np.linspace(0.0, math.pi, n_theta + 2)[1:-1]
    z = np.exp(rho[:, None] + 1j * th[None, :]).ravel()
    if G.pingpong is not None:
        z = z[G.pingpong.in_domain(z)]
        if cover:
            B = G.pingpong.mats[2]
            z = np.concatenate([z, (B[0, 0] * z + B[0, 1]) / (B[1, 0] * z + B[1, 1])])
    return z


@dataclass
class NormRatioResult:
    ratio: float
    argmax: str
    coefficients: np.ndarray
    candidates: list


def norm_ratio(G, R=None, grid=(64, 129), frame=None, n_directions=24):
    """max over candidate mu of sup|mu| / ||mu||.

    Candidates are unit combinations c_1 mu_1 + c_2 mu_2 of the frame
    gradients on a direction grid (a single gradient for 1-element frames).
    Ties are broken towards the shortest geodesic, then frame order.
    """
    frame = list(frame) if frame is not None else G.frame()[:1]
    lengths = frame_lengths(G, frame)
    cover = any(f in COVER_FRAME for f in frame)
    z = _sup_grid(G, grid[0], grid[1], cover)
    mus = np.array([evaluator_for(G, f).mu(z) for f in frame])
    n = len(frame)
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            P[i, j] = P[j, i] = pairing_series(G, frame[i], frame[j], R).value
    dirs = [np.eye(n)[i] for i in range(n)]
    if n == 2:
        for t in np.linspace(0, math.pi / 2, n_directions + 1)[1:-1]:
            for ph in (0.0, math.pi / 2, math.pi):
                dirs.append(np.array([math.cos(t), math.sin(t) * np.exp(1j * ph)]))
    elif n > 2:
        raise ValueError("norm comparison supports frames of at most two geodesics")
    cands = []
    for c in dirs:
        sup = float(np.max(np.abs(c @ mus)))
        nrm = math.sqrt(float(np.real(np.conj(c) @ P @ c)))
        cands.append((sup / nrm, c))
    best = max(r for r, _ in cands)
    ties = [(r, c) for r, c in cands if r >= best * (1 - 1e-9)]
    pure = [(r, c) for r, c in ties if np.count_nonzero(np.abs(c) > 1e-12) == 1]
    if pure:
        pure.sort(key=lambda rc: (lengths[frame[int(np.argmax(np.abs(rc[1])))]],
                                  int(np.argmax(np.abs(rc[1])))))
        r, c = pure[0]
        desc = f"grad {frame[int(np.argmax(np.abs(c)))]}"
    else:
        r, c = ties[0]
        desc = "combination " + ", ".join(f"{frame[i]}:{c[i]:.3f}" for i in range(n))
    return NormRatioResult(r, desc, c, [(float(rr), cc) for rr, cc in cands])
