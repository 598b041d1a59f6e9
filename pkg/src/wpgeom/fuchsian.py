"""Fuchsian groups of the collar, cusp and punctured-torus models; truncated
orbit, coset and double-coset enumeration.

The punctured torus is realized from an ideal quadrilateral D with vertices
-lam e^{-tau}, -e^{-tau}, 1, lam (lam = e^l).  A pairs the side s = [-e^{-tau}, 1]
with As, B pairs s_L = [-lam e^{-tau}, -e^{-tau}] with s_R = [1, lam].  The four
half-planes cut off by the sides give a ping-pong table: a reduced word
g1...gn sends D into g1...g_{n-1} H_{gn}, and these regions are nested.  All
enumeration for this kind prunes on the distance to those regions, which is
exact (no element inside the cutoff is missed).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
import re
from typing import Optional

import numpy as np

from . import hyp2
from .hyp2 import MoebiusMap, GeodesicLine, IMAGINARY_AXIS

Z0 = 1j
DEFAULT_BUDGET = 10_000_000
KINDS = ("cyclic-hyperbolic", "cyclic-parabolic", "punctured-torus", "explicit")


class InvalidSpec(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class BudgetExceeded(RuntimeError):
    def __init__(self, count, budget):
        self.count = count
        super().__init__(f"enumeration exceeded budget {budget} (partial count {count}); lower the cutoff")


class CutoffInsufficient(RuntimeError):
    pass


class CutoffTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class GroupSpec:
    kind: str
    length: Optional[float] = None
    twist: float = 0.0
    generators: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown kind {self.kind!r}")
        if self.kind in ("cyclic-hyperbolic", "punctured-torus"):
            if self.length is None or not (self.length > 0) or not math.isfinite(self.length):
                raise InvalidSpec("length must be positive")
        if self.kind == "explicit" and not self.generators:
            raise InvalidSpec("explicit kind needs generators")


def _parse_float(v, lineno, key):
    try:
        return float(v)
    except ValueError:
        raise InvalidSpec(f"{key}: not a number: {v!r}", lineno) from None


def parse_spec_text(text):
    """Parse `key = value` lines (kind, length, twist, generators)."""
    vals, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidSpec(f"expected key = value, got {raw.strip()!r}", lineno)
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in ("kind", "length", "twist", "generators"):
            raise InvalidSpec(f"unknown key {key!r}", lineno)
        if key in vals:
            raise InvalidSpec(f"duplicate key {key!r}", lineno)
        vals[key], lines[key] = val, lineno
    if "kind" not in vals:
        raise InvalidSpec("missing key 'kind'", 1 if not lines else max(lines.values()))
    kw = {"kind": vals["kind"]}
    if "length" in vals:
        kw["length"] = _parse_float(vals["length"], lines["length"], "length")
    if "twist" in vals:
        kw["twist"] = _parse_float(vals["twist"], lines["twist"], "twist")
    if "generators" in vals:
        gens = []
        for chunk in vals["generators"].split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = [p for p in re.split(r"[,\s]+", chunk.strip("()[] ")) if p]
            if len(parts) != 4:
                raise InvalidSpec(f"generator needs 4 entries, got {chunk!r}", lines["generators"])
            nums = [_parse_float(p, lines["generators"], "generators") for p in parts]
            det = nums[0] * nums[3] - nums[1] * nums[2]
            if abs(det - 1.0) > 1e-9:
                raise InvalidSpec(f"generator determinant {det} != 1", lines["generators"])
            gens.append(MoebiusMap(*nums))
        kw["generators"] = tuple(gens)
    try:
        return GroupSpec(**kw)
    except InvalidSpec as e:
        key = "kind" if "kind" in str(e) else ("length" if "length" in str(e) else "generators")
        raise InvalidSpec(str(e), lines.get(key)) from None


def parse_spec_file(path):
    with open(path) as fh:
        return parse_spec_text(fh.read())


# ---------------------------------------------------------------------------
# ping-pong structure of the punctured torus

LETTERS = ("A", "a", "B", "b")  # a = A^{-1}, b = B^{-1}
INV = np.array([1, 0, 3, 2])


def punctured_torus_b0(ell):
    """Side pairing of [-lam,-1] -> [1,lam] with parabolic commutator."""
    h = ell / 2.0
    k = 1.0 / math.sinh(h)
    return MoebiusMap(k * math.cosh(h), k * math.exp(h), k * math.exp(-h), k * math.cosh(h))


@dataclass
class PingPong:
    ell: float
    twist: float
    mats: np.ndarray          # (4,2,2) for A, A^-1, B, B^-1
    centers: np.ndarray       # (4,) half-plane boundary centers
    radii: np.ndarray
    inside: np.ndarray        # True if H_g is the disk side
    vertices: np.ndarray      # ideal vertices of D
    cusp_maps: list = field(default_factory=list)  # sigma_v with sigma_v(v) = oo, unit translation

    def in_halfplane(self, z, g, eps=1e-12):
        # open half-planes with a relative margin, so points on a side are not
        # bounced between paired sides by rounding
        d2 = np.abs(z - self.centers[g]) ** 2 - self.radii[g] ** 2
        m = eps * self.radii[g] ** 2
        return d2 < -m if self.inside[g] else d2 > m

    def in_domain(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape, dtype=bool)
        for g in range(4):
            out &= ~self.in_halfplane(z, g)
        return out

    def rho_window(self):
        et = math.exp(-self.twist)
        return math.log(min(et, 1.0)), math.log(math.exp(self.ell) * max(et, 1.0))

    def reduce(self, z, max_steps=100000, with_parity=False):
        """Return (w, M) with w = M z in the closure of D; M is (n,2,2).

        with_parity also returns the B-exponent parity of M.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
        M = np.broadcast_to(np.eye(2), z.shape + (2, 2)).copy()
        par = np.zeros(z.shape, dtype=int)
        active = np.ones(z.shape, dtype=bool)
        for _ in range(max_steps):
            if not active.any():
                break
            idx = np.nonzero(active)[0]
            zi = z[idx]
            moved = np.zeros(idx.size, dtype=bool)
            for g in range(4):
                hit = ~moved & self.in_halfplane(zi, g)
                if hit.any():
                    gi = self.mats[INV[g]]
                    zi[hit] = (gi[0, 0] * zi[hit] + gi[0, 1]) / (gi[1, 0] * zi[hit] + gi[1, 1])
                    M[idx[hit]] = gi @ M[idx[hit]]
                    if g >= 2:
                        par[idx[hit]] ^= 1
                    moved |= hit
            z[idx] = zi
            active[idx[~moved]] = False
        else:
            raise RuntimeError("reduction did not terminate")
        det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
        M /= np.sqrt(det)[:, None, None]
        return (z, M, par) if with_parity else (z, M)

    def horo_height(self, z):
        """max over the cusp vertices of the normalized horocyclic height."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for s in self.cusp_maps:
            w = (s[0, 0] * z + s[0, 1]) / (s[1, 0] * z + s[1, 1])
            out = np.maximum(out, np.imag(w))
        return out


def _make_pingpong(ell, twist, A, B):
    lam = math.exp(ell)
    et = math.exp(-twist)
    s = (-et, 1.0)
    As = (-lam * et, lam)
    sL = (-lam * et, -et)
    sR = (1.0, lam)

    def cr(iv):
        return 0.5 * (iv[0] + iv[1]), 0.5 * (iv[1] - iv[0])

    table = [(As, False), (s, True), (sR, True), (sL, True)]
    centers = np.array([cr(iv)[0] for iv, _ in table])
    radii = np.array([cr(iv)[1] for iv, _ in table])
    inside = np.array([f for _, f in table])
    mats = np.array([A.as_array(), A.inverse().as_array(), B.as_array(), B.inverse().as_array()])
    verts = np.array([-lam * et, -et, 1.0, lam])
    pp = PingPong(ell, twist, mats, centers, radii, inside, verts)
    pp.cusp_maps = _cusp_maps(A, B, verts)
    return pp


def _cusp_maps(A, B, verts):
    Ai, Bi = A.inverse(), B.inverse()
    word = [A, B, Ai, Bi]
    comms = []
    for k in range(4):
        w = word[k:] + word[:k]
        P = w[0] @ w[1] @ w[2] @ w[3]
        comms += [P, P.inverse()]
    maps = []
    for v in verts:
        for P in comms:
            a, b, c, d = P.a, P.b, P.c, P.d
            if abs(c * v * v + (d - a) * v - b) < 1e-8 * max(1.0, v * v) * max(1.0, abs(c)):
                # sigma(z) = -1/(z - v); conjugated translation length t
                sig = np.array([[0.0, -1.0], [1.0, -v]])
                conj = sig @ P.as_array() @ np.linalg.inv(sig)
                t = conj[0, 1] / conj[1, 1]
                maps.append(np.diag([1.0 / abs(t), 1.0]) @ sig)
                break
    return maps


# ---------------------------------------------------------------------------
# groups


def commutator_trace(A, B):
    """tr(A B A^-1 B^-1) on SL(2) lifts; independent of the sign choices."""
    a, b = A.as_array(), B.as_array()
    c = a @ b @ np.linalg.inv(a) @ np.linalg.inv(b)
    return float(c[0, 0] + c[1, 1])


def markov_commutator_trace(A, B):
    """tr[A,B] = trA^2 + trB^2 + trAB^2 - trA trB trAB - 2."""
    a, b = A.as_array(), B.as_array()
    x, y, z = np.trace(a), np.trace(b), np.trace(a @ b)
    return float(x * x + y * y + z * z - x * y * z - 2.0)


@dataclass
class FuchsianGroup:
    kind: str
    generators: list
    geodesics: dict          # name -> GeodesicLine
    primitives: dict         # name -> MoebiusMap translating along the geodesic
    length: Optional[float] = None
    twist: float = 0.0
    pingpong: Optional[PingPong] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def gen_array(self):
        gs = []
        for g in self.generators:
            gs += [g.as_array(), g.inverse().as_array()]
        return np.array(gs)

    def frame(self):
        """Geodesics of a pants decomposition: alpha alone for a punctured torus."""
        if self.pingpong is not None:
            return ["alpha"]
        return list(self.geodesics)


def _elliptic_infinite_order(M, max_order=128):
    if hyp2.classify(M) != "elliptic":
        return False
    ang = 2.0 * math.acos(min(1.0, abs(M.trace) / 2.0))
    for n in range(1, max_order + 1):
        k = n * ang / (2 * math.pi)
        if abs(k - round(k)) < 1e-9:
            return False
    return True


def build(spec: GroupSpec) -> FuchsianGroup:
    if spec.kind == "cyclic-hyperbolic":
        A = MoebiusMap.diag(spec.length)
        return FuchsianGroup(spec.kind, [A], {"core": IMAGINARY_AXIS}, {"core": A}, spec.length)
    if spec.kind == "cyclic-parabolic":
        return FuchsianGroup(spec.kind, [MoebiusMap.translation(1.0)], {}, {})
    if spec.kind == "punctured-torus":
        ell, tau = spec.length, spec.twist
        A = MoebiusMap.diag(ell)
        B = punctured_torus_b0(ell) @ MoebiusMap.diag(tau)
        ct = commutator_trace(A, B)
        if abs(ct + 2.0) > 1e-9 * max(1.0, abs(ct)) and abs(ct + 2.0) > 1e-9:
            raise InvalidSpec(f"commutator trace {ct} is not -2")
        pp = _make_pingpong(ell, tau, A, B)
        geo = {"alpha": IMAGINARY_AXIS, "beta": hyp2.axis(B)}
        return FuchsianGroup(spec.kind, [A, B], geo, {"alpha": A, "beta": B}, ell, tau, pp)
    gens = list(spec.generators)
    keys = set()
    for g in gens:
        k = g.key()
        if k in keys or g.inverse().key() in keys:
            raise InvalidSpec("generators are not pairwise distinct")
        keys.add(k)
    words = list(gens)
    for g in gens:
        for h in gens:
            words += [g @ h, g @ h.inverse()]
    for w in words:
        if _elliptic_infinite_order(w):
            raise InvalidSpec("elliptic element of infinite order: group is not discrete")
    geo, prim = {}, {}
    for i, g in enumerate(gens):
        if hyp2.classify(g) == "hyperbolic":
            geo[f"g{i}"] = hyp2.axis(g)
            prim[f"g{i}"] = g
    G = FuchsianGroup("explicit", gens, geo, prim)
    # recognize the generator pair of a punctured torus in standard position
    if len(gens) == 2 and abs(gens[0].b) < 1e-14 and abs(gens[0].c) < 1e-14 and gens[0].a > 1:
        A, B = gens
        ell = hyp2.translation_length(A)
        b0 = punctured_torus_b0(ell)
        t = b0.inverse() @ B
        if abs(t.b) < 1e-9 and abs(t.c) < 1e-9:
            tau = 2.0 * math.log(t.a)
            G.pingpong = _make_pingpong(ell, tau, A, B)
            G.geodesics = {"alpha": IMAGINARY_AXIS, "beta": hyp2.axis(B)}
            G.primitives = {"alpha": A, "beta": B}
            G.length, G.twist = ell, tau
    return G


# ---------------------------------------------------------------------------
# vectorized helpers on (n,2,2) arrays


def _inv(P):
    out = np.empty_like(P)
    out[:, 0, 0] = P[:, 1, 1]
    out[:, 1, 1] = P[:, 0, 0]
    out[:, 0, 1] = -P[:, 0, 1]
    out[:, 1, 0] = -P[:, 1, 0]
    return out


def _act(P, z):
    return (P[:, 0, 0] * z + P[:, 0, 1]) / (P[:, 1, 0] * z + P[:, 1, 1])


def _renorm(P):
    det = P[:, 0, 0] * P[:, 1, 1] - P[:, 0, 1] * P[:, 1, 0]
    return P / np.sqrt(det)[:, None, None]


def _sign_normalize(P):
    tr = P[:, 0, 0] + P[:, 1, 1]
    flat = P.reshape(len(P), 4)
    first = flat[np.arange(len(P)), np.argmax(np.abs(flat) > 0, axis=1)]
    sgn = np.where((tr < 0) | ((tr == 0) & (first < 0)), -1.0, 1.0)
    return P * sgn[:, None, None]


def dedup(P, digits=10):
    """Remove projective duplicates, keeping first occurrences in order."""
    if len(P) == 0:
        return P
    Q = _sign_normalize(P)
    keys = np.round(Q.reshape(len(Q), 4), digits) + 0.0
    _, idx = np.unique(keys, axis=0, return_index=True)
    return Q[np.sort(idx)]


def _point_halfplane_dist(z, pp, g):
    """Distance from z to the half-planes H_g; g may be an index array."""
    c, r = pp.centers[g], pp.radii[g]
    d2 = np.abs(z - c) ** 2 - r ** 2
    inreg = (d2 < 0) == pp.inside[g]
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.arcsinh(np.abs(d2) / (2.0 * r * np.imag(z)))
    return np.where(inreg, 0.0, d)


def _line_halfplane_dist(p, q, pp, g):
    """Distance from geodesics (p, q) (homogeneous, (n,2)) to half-planes H_g."""
    c, r = pp.centers[g], pp.radii[g]
    x1, x2 = c - r, c + r
    one = np.ones_like(x1)
    u, crossing = hyp2.line_line(np.stack([x1, one], -1), np.stack([x2, one], -1), p, q)

    def side(v):
        n2 = v[..., 0] ** 2 + v[..., 1] ** 2
        return (v[..., 0] - x1 * v[..., 1]) * (v[..., 0] - x2 * v[..., 1]) / n2

    sp, sq = side(p), side(q)
    t = np.where(np.abs(sp) >= np.abs(sq), sp, sq)
    inreg = (t < 0) == pp.inside[g]
    d = hyp2._arccosh(u)
    return np.where(crossing | inreg, 0.0, d)


ALPHA_P = np.array([0.0, 1.0])
ALPHA_Q = np.array([1.0, 0.0])


def _nested_bfs(pp, prune, accept, first=None, budget=DEFAULT_BUDGET, record_words=False,
                n_roots=1):
    """Breadth-first walk of reduced words with nested-region pruning.

    prune(Pinv, g, tag) -> bool mask of children to keep, where the child
    region is P H_g and g is an array of letters; accept(E, g, tag) -> bool
    mask of words E = P g to report.  Several independent searches (tags
    0..n_roots-1) share one walk so per-level overhead is paid once.
    Returns (elements, last letters, B-parity, tags, words or None).
    """
    P = np.broadcast_to(np.eye(2), (n_roots, 2, 2)).copy()
    last = np.full(n_roots, -1)
    par = np.zeros(n_roots, dtype=int)
    tag = np.arange(n_roots)
    words = [""] * n_roots if record_words else None
    out_E, out_last, out_par, out_tag, out_words = [], [], [], [], []
    visited = 0
    letters = np.arange(4)
    root = np.ones(4, dtype=bool) if first is None else np.isin(letters, first)
    while len(P):
        if last[0] == -1:
            idx, g = np.nonzero(np.broadcast_to(root, (len(P), 4)))
        else:
            idx, g = np.nonzero(letters[None, :] != INV[last][:, None])
        keep = prune(_inv(P)[idx], g, tag[idx])
        idx, g = idx[keep], g[keep]
        if not idx.size:
            break
        E = _renorm(P[idx] @ pp.mats[g])
        pg = par[idx] + (g >= 2)
        tg = tag[idx]
        acc = accept(E, g, tg)
        if acc.any():
            out_E.append(E[acc])
            out_last.append(g[acc])
            out_par.append(pg[acc] % 2)
            out_tag.append(tg[acc])
            if record_words:
                out_words += [words[i] + LETTERS[k] for i, k in zip(idx[acc], g[acc])]
        if record_words:
            words = [words[i] + LETTERS[k] for i, k in zip(idx, g)]
        P, last, par, tag = E, g, pg, tg
        visited += idx.size
        if visited > budget:
            raise BudgetExceeded(visited, budget)
    if out_E:
        return (np.concatenate(out_E), np.concatenate(out_last), np.concatenate(out_par),
                np.concatenate(out_tag), (out_words if record_words else None))
    return (np.zeros((0, 2, 2)), np.zeros(0, int), np.zeros(0, int), np.zeros(0, int),
            ([] if record_words else None))


def lifts_near_many(pp, centers, cuts, budget=DEFAULT_BUDGET):
    """lifts_near for several (center, cut) pairs in one shared walk.

    Returns a list of (V, parity) per center, identity first in each.
    """
    centers = np.asarray(centers, dtype=complex)
    cuts = np.asarray(cuts, dtype=float)

    def prune(Pinv, g, tag):
        return _point_halfplane_dist(_act(Pinv, centers[tag]), pp, g) <= cuts[tag]

    def accept(E, g, tag):
        d = hyp2.point_line_distance(centers[tag], E @ ALPHA_P, E @ ALPHA_Q)
        return (g >= 2) & (d <= cuts[tag])

    E, _, par, tag, _ = _nested_bfs(pp, prune, accept, budget=budget, n_roots=len(centers))
    order = np.argsort(tag, kind="stable")
    E, par, tag = E[order], par[order], tag[order]
    bounds = np.searchsorted(tag, np.arange(len(centers) + 1))
    out = []
    for i in range(len(centers)):
        sl = slice(bounds[i], bounds[i + 1])
        out.append((np.concatenate([np.eye(2)[None], E[sl]]), np.concatenate([[0], par[sl]])))
    return out


def lifts_near(pp, center, cut, budget=DEFAULT_BUDGET):
    """Words v (not ending in A^{+-1}) with d(center, v alpha) <= cut.

    Returns (v matrices including the identity first, B-parity).
    """
    return lifts_near_many(pp, [complex(center)], [cut], budget)[0]


def alpha_double_cosets(pp, L, budget=DEFAULT_BUDGET, record_words=False):
    """Representatives of <A>\\G/<A> other than the identity class with
    d(alpha, v alpha) <= L, as reduced words starting and ending in B^{+-1}."""
    coshL = math.cosh(L)

    def prune(Pinv, g, tag):
        p = Pinv @ ALPHA_P
        q = Pinv @ ALPHA_Q
        return _line_halfplane_dist(p, q, pp, g) <= L

    def accept(E, g, tag):
        u, _ = hyp2.line_line(ALPHA_P, ALPHA_Q, E @ ALPHA_P, E @ ALPHA_Q)
        return (g >= 2) & (u <= coshL)

    E, _, par, _, words = _nested_bfs(pp, prune, accept, first=[2, 3], budget=budget,
                                   record_words=record_words)
    u, cr = hyp2.line_line(ALPHA_P, ALPHA_Q, E @ ALPHA_P, E @ ALPHA_Q)
    return E, u, cr, par, words


def _ball_nested(pp, z0, R, budget):
    w, M = pp.reduce(np.array([z0]))
    p = complex(w[0])
    M = M[0]

    def prune(Pinv, g, tag):
        return _point_halfplane_dist(_act(Pinv, p), pp, g) <= R

    def accept(E, g, tag):
        return hyp2.dist(p, _act(E, p)) <= R

    E, _, _, _, _ = _nested_bfs(pp, prune, accept, budget=budget)
    E = np.concatenate([np.eye(2)[None], E])
    # elements for z0 = M^{-1} p are M^{-1} E M
    Mi = np.linalg.inv(M)
    return _renorm(Mi @ E @ M)


def _ball_generic(gens, z0, R, budget):
    """Spec BFS: expand words, prune when the orbit point exceeds R + max
    generator displacement."""
    disp = max(float(hyp2.dist(z0, _act(g[None], z0)[0])) for g in gens)
    keys = set()
    found = [np.eye(2)]
    frontier = np.eye(2)[None]
    keys.add(tuple(np.round(np.eye(2).ravel(), 10) + 0.0))
    count = 1
    while len(frontier):
        cand = (frontier[:, None] @ gens[None]).reshape(-1, 2, 2)
        cand = _sign_normalize(_renorm(cand))
        d = hyp2.dist(z0, _act(cand, z0))
        keep = d <= R + disp
        cand, d = cand[keep], d[keep]
        new = []
        for M, dd in zip(cand, d):
            k = tuple(np.round(M.ravel(), 10) + 0.0)
            if k in keys:
                continue
            keys.add(k)
            new.append(M)
            if dd <= R:
                found.append(M)
            count += 1
            if count > budget:
                raise BudgetExceeded(count, budget)
        frontier = np.array(new) if new else np.zeros((0, 2, 2))
    return np.array(found)


@dataclass
class OrbitEnumeration:
    cutoff: float
    mats: np.ndarray
    basepoint: complex
    truncation_bound: float
    kappa: float

    @property
    def elements(self):
        return [MoebiusMap.from_array(m) for m in self.mats]

    def __len__(self):
        return len(self.mats)


def injectivity_radius(G, z, R=None):
    """Half the least displacement of z by non-identity elements."""
    z = complex(z)
    if G.kind == "cyclic-hyperbolic":
        return 0.5 * float(hyp2.dist(z, G.generators[0](z)))
    if G.kind == "cyclic-parabolic":
        return 0.5 * float(hyp2.dist(z, z + 1))
    R = R if R is not None else 2.0
    while True:
        mats = _ball_mats(G, z, R, DEFAULT_BUDGET)
        d = hyp2.dist(z, _act(mats, z))
        nontriv = ~np.all(np.isclose(_sign_normalize(mats), np.eye(2), atol=1e-12), axis=(1, 2))
        d = d[nontriv]
        if d.size:
            return 0.5 * float(d.min())
        R *= 2.0


def _cyclic_ball(G, z0, R):
    # displacement of g^k grows monotonically in |k| for cyclic groups
    g = G.generators[0].as_array()
    out = [np.eye(2)]
    gk = np.eye(2)
    while True:
        gk = gk @ g
        hits = [m for m in (gk, np.linalg.inv(gk)) if hyp2.dist(z0, _act(m[None], z0)[0]) <= R]
        if not hits:
            break
        out += hits
    return _sign_normalize(np.array(out))


def _ball_mats(G, z0, R, budget):
    if G.kind in ("cyclic-hyperbolic", "cyclic-parabolic"):
        return _cyclic_ball(G, z0, R)
    if G.pingpong is not None:
        return _sign_normalize(_ball_nested(G.pingpong, z0, R, budget))
    return _ball_generic(G.gen_array, z0, R, budget)


def kappa(G, z0=Z0):
    from .beltrami import mean_value_constant
    return mean_value_constant() / injectivity_radius(G, z0)


def enumerate_ball(G, R, budget=DEFAULT_BUDGET, basepoint=Z0):
    if not R > 0:
        raise ValueError("cutoff must be positive")
    z0 = complex(basepoint)
    mats = dedup(_ball_mats(G, z0, R, budget))
    if len(mats) > budget:
        raise BudgetExceeded(len(mats), budget)
    k = kappa(G, z0)
    return OrbitEnumeration(R, mats, z0, k * math.exp(-R), k)


def enumerate_ball_generic(G, R, budget=DEFAULT_BUDGET, basepoint=Z0):
    """The plain word-expansion BFS regardless of group kind (oracle path)."""
    z0 = complex(basepoint)
    return dedup(_ball_generic(G.gen_array, z0, R, budget))


def _normal_chart(G, name):
    if name not in G.geodesics:
        raise KeyError(f"geodesic {name!r} not designated in group")
    N = G.geodesics[name].normalizer
    A = G.primitives[name]
    conjA = hyp2.conjugate(A, N)
    if conjA.a < 1:  # orient so the primitive expands
        conjA = conjA.inverse()
    return N, conjA


def coset_reps(G, name, R, budget=DEFAULT_BUDGET):
    """Representatives of <alpha>\\G in the chart where alpha is iR+.

    Each ball element is left-multiplied by the primitive power that puts the
    image of z0 in the annulus 1 <= |z| < e^l.  Identity first.
    """
    N, A = _normal_chart(G, name)
    lam = A.a / A.d
    ell = math.log(lam)
    Na = N.as_array()
    Ni = np.linalg.inv(Na)
    mats = enumerate_ball(G, R, budget).mats
    mats = _renorm(Na[None] @ mats @ Ni[None])
    w = _act(mats, Z0)
    k = np.floor(np.log(np.abs(w)) / ell + 1e-12)
    scale = np.exp(-k * ell / 2.0)
    mats = mats.copy()
    mats[:, 0, :] *= scale[:, None]
    mats[:, 1, :] /= scale[:, None]
    ident = np.all(np.isclose(_sign_normalize(mats), np.eye(2), atol=1e-9), axis=(1, 2))
    mats = np.concatenate([np.eye(2)[None], mats[~ident]])
    return [MoebiusMap.from_array(m) for m in dedup(mats)]


@dataclass
class DoubleCosetEnumeration:
    alpha: str
    beta: str
    reps: list               # MoebiusMap in the alpha chart
    u: np.ndarray
    crossing: np.ndarray
    min_connecting_length: float
    identity_class: bool
    parity: Optional[np.ndarray] = None
    words: Optional[list] = None
    cutoff: float = 0.0


def _lift_key(p, q, ell, digits=8):
    """Canonical position of the lift with endpoints p, q modulo z -> e^l z."""
    ends = []
    for e in (p, q):
        ends.append(math.inf if e == math.inf else e)
    if math.inf in ends:
        other = ends[1] if ends[0] == math.inf else ends[0]
        g = abs(other)
    else:
        g = math.sqrt(abs(ends[0] * ends[1]))
    k = math.floor(math.log(g) / ell + 1e-9)
    sc = math.exp(-k * ell)
    out = []
    for e in ends:
        out.append(math.inf if e == math.inf else round(e * sc, digits) + 0.0)
    return tuple(sorted(out, key=lambda v: (v == math.inf, v)))


def double_coset_reps(G, alpha, beta, R, budget=DEFAULT_BUDGET, record_words=False):
    """Representatives of <alpha>\\G/<beta> with cosh-distance u between
    alpha (as iR+) and the corresponding lift of beta, sorted by u."""
    if G.kind in ("cyclic-hyperbolic", "cyclic-parabolic"):
        return DoubleCosetEnumeration(alpha, beta, [], np.zeros(0), np.zeros(0, bool),
                                      math.inf, alpha == beta, cutoff=R)
    if G.pingpong is not None and alpha == beta == "alpha":
        key = ("dc", round(R, 12), record_words)
        if key not in G._cache:
            G._cache[key] = alpha_double_cosets(G.pingpong, R, budget, record_words)
        E, u, cr, par, words = G._cache[key]
        order = np.argsort(u, kind="stable")
        reps = [MoebiusMap.from_array(m) for m in E[order]]
        mcl = float(hyp2._arccosh(u[order[0]])) if len(order) else math.inf
        return DoubleCosetEnumeration(alpha, beta, reps, u[order], cr[order], mcl, True,
                                      par[order], [words[i] for i in order] if words else None, R)
    return _double_cosets_generic(G, alpha, beta, R, budget)


def _double_cosets_generic(G, alpha, beta, R, budget):
    N, A = _normal_chart(G, alpha)
    ell = math.log(A.a / A.d)
    Gb = G.geodesics[beta]
    bp = hyp2.apply_boundary(N, Gb.hp)
    bq = hyp2.apply_boundary(N, Gb.hq)
    Na = N.as_array()
    Ni = np.linalg.inv(Na)
    mats = _renorm(Na[None] @ enumerate_ball(G, R, budget).mats @ Ni[None])
    seen = {}
    ident = False
    for m in mats:
        p, q = m @ bp, m @ bq
        pe, qe = hyp2.dehomogenize(p), hyp2.dehomogenize(q)
        # lifts of alpha itself (powers of the primitive accumulate rounding)
        if {pe, qe} <= {0.0, math.inf} or (abs(p[0]) < 1e-9 * abs(p[1]) and abs(q[1]) < 1e-9 * abs(q[0])) \
                or (abs(q[0]) < 1e-9 * abs(q[1]) and abs(p[1]) < 1e-9 * abs(p[0])):
            ident = True
            continue
        key = _lift_key(pe, qe, ell)
        if key in seen:
            continue
        u, cr = hyp2.line_line(ALPHA_P, ALPHA_Q, p, q)
        seen[key] = (m, float(u), bool(cr))
    items = sorted(seen.values(), key=lambda t: t[1])
    u = np.array([t[1] for t in items])
    cr = np.array([t[2] for t in items], dtype=bool)
    nc = u[~cr]
    mcl = float(hyp2._arccosh(nc.min())) if nc.size else math.inf
    return DoubleCosetEnumeration(alpha, beta, [MoebiusMap.from_array(t[0]) for t in items], u, cr, mcl,
                                  ident and alpha == beta, cutoff=R)


@dataclass
class SystoleResult:
    value: float
    certified: bool
    element: MoebiusMap


def systole(G, R, budget=DEFAULT_BUDGET):
    if G.kind == "cyclic-hyperbolic":
        val = G.length
        if not R > 2 * val:
            raise CutoffInsufficient(f"cutoff {R} does not exceed twice the systole {val}")
        return SystoleResult(val, True, G.generators[0])
    mats = enumerate_ball(G, R, budget).mats
    tr = np.abs(mats[:, 0, 0] + mats[:, 1, 1])
    hyp = tr > 2.0 + hyp2.TAU_PAR
    if not hyp.any():
        raise CutoffInsufficient("no hyperbolic element in the ball")
    i = np.argmin(np.where(hyp, tr, np.inf))
    val = float(2.0 * hyp2._arccosh(tr[i] / 2.0))
    if not R > 2 * val:
        raise CutoffInsufficient(f"cutoff {R} does not exceed twice the systole {val}")
    return SystoleResult(val, True, MoebiusMap.from_array(mats[i]))


def dirichlet_membership(G, z, center=Z0, R=None, budget=DEFAULT_BUDGET):
    """True iff d(z, center) <= d(z, A center) for all enumerated A != id."""
    center = complex(center)
    z = np.asarray(z, dtype=complex)
    if R is None:
        R = 2.0 * float(np.max(hyp2.dist(z, center))) + 1e-9
    key = ("ball", center, round(R, 12))
    if key not in G._cache:
        mats = enumerate_ball(G, R, budget, center).mats
        nontriv = ~np.all(np.isclose(mats, np.eye(2), atol=1e-12), axis=(1, 2))
        G._cache[key] = _act(mats[nontriv], center)
    orbit = G._cache[key]
    d0 = hyp2.dist(z, center)
    zz = np.atleast_1d(z)
    res = np.ones(zz.shape, dtype=bool)
    for i in range(0, len(orbit), 4096):
        o = orbit[i:i + 4096]
        dd = hyp2.dist(zz[:, None], o[None, :])
        res &= np.all(np.atleast_1d(d0)[:, None] <= dd + 1e-12, axis=1)
    return res if np.ndim(z) else bool(res[0])
