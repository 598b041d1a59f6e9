"""Upper half-plane geometry and PSL(2,R) primitives.

Boundary points are handled in homogeneous coordinates (x, 1) with infinity
as (1, 0), so geodesics through infinity need no special casing.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

TAU_PAR = 1e-9
DET_TOL = 1e-12


class NotHyperbolic(ValueError):
    pass


class CoincidentLines(ValueError):
    pass


def _normalize(a, b, c, d):
    det = a * d - b * c
    if det <= 0:
        raise ValueError("matrix must have positive determinant")
    s = math.sqrt(det)
    a, b, c, d = a / s, b / s, c / s, d / s
    tr = a + d
    flip = tr < 0 or (tr == 0 and next(v for v in (a, b, c, d) if v != 0) < 0)
    if flip:
        a, b, c, d = -a, -b, -c, -d
    return a, b, c, d


@dataclass(frozen=True, init=False)
class MoebiusMap:
    """Determinant-one real 2x2 matrix acting on H, sign normalized."""
    a: float
    b: float
    c: float
    d: float

    def __init__(self, a, b, c, d):
        a, b, c, d = _normalize(float(a), float(b), float(c), float(d))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_array(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def diag(cls, t):
        """z -> e^t z, the hyperbolic element of translation length t on iR+."""
        return cls(math.exp(t / 2), 0.0, 0.0, math.exp(-t / 2))

    @classmethod
    def translation(cls, t):
        return cls(1.0, t, 0.0, 1.0)

    @classmethod
    def rotation(cls, phi, center=1j):
        """Elliptic element rotating by angle phi about center."""
        c2, s2 = math.cos(phi / 2), math.sin(phi / 2)
        k = cls(c2, s2, -s2, c2)
        x, y = center.real, center.imag
        n = cls(math.sqrt(y), x / math.sqrt(y), 0.0, 1 / math.sqrt(y))
        return n @ k @ n.inverse()

    def as_array(self):
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def trace(self):
        return self.a + self.d

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def inverse(self):
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other):
        if not isinstance(other, MoebiusMap):
            return NotImplemented
        return MoebiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __pow__(self, n):
        out = MoebiusMap.identity()
        base = self if n >= 0 else self.inverse()
        for _ in range(abs(int(n))):
            out = out @ base
        return out

    def __call__(self, z):
        return apply(self, z)

    def key(self, digits=10):
        """Projective dedup key (entries rounded after sign normalization)."""
        return tuple(round(v, digits) + 0.0 for v in (self.a, self.b, self.c, self.d))

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return 1.0 / (self.c * z + self.d) ** 2


@dataclass(frozen=True)
class HPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (self.y > 0) or not math.isfinite(self.x) or not math.isfinite(self.y):
            raise ValueError(f"not a point of H: ({self.x}, {self.y})")

    @property
    def z(self):
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z):
        return cls(float(np.real(z)), float(np.imag(z)))


def as_complex(z):
    if isinstance(z, HPoint):
        return z.z
    return np.asarray(z, dtype=complex) if np.ndim(z) else complex(z)


def apply(M, z):
    """Apply a MoebiusMap (or a (2,2) array) to points of H."""
    z = as_complex(z)
    if isinstance(M, MoebiusMap):
        a, b, c, d = M.a, M.b, M.c, M.d
    else:
        (a, b), (c, d) = np.asarray(M)
    return (a * z + b) / (c * z + d)


def apply_boundary(M, u):
    """Image of a homogeneous boundary point (u0, u1) under M."""
    m = M.as_array() if isinstance(M, MoebiusMap) else np.asarray(M)
    return m @ np.asarray(u, dtype=float)


def homogeneous(x):
    if x == math.inf or x == -math.inf:
        return np.array([1.0, 0.0])
    return np.array([float(x), 1.0])


def dehomogenize(u, tol=1e-300):
    u0, u1 = float(u[0]), float(u[1])
    if abs(u1) <= tol * max(1.0, abs(u0)) or abs(u1) < tol:
        return math.inf
    return u0 / u1


def _hdet(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _arccosh(x):
    return np.log(x + np.sqrt(np.maximum(x * x - 1.0, 0.0)))


def dist(z, w):
    """Hyperbolic distance on H, vectorized."""
    z, w = as_complex(z), as_complex(w)
    y1, y2 = np.imag(z), np.imag(w)
    return 2.0 * np.arcsinh(np.abs(z - w) / (2.0 * np.sqrt(y1 * y2)))


def dist_to_imaginary_axis(z):
    """d(iR+, z) = log(csc t + |cot t|), t = arg z."""
    z = as_complex(z)
    return np.arcsinh(np.abs(np.real(z)) / np.imag(z))


def fermi(z):
    """(rho, s) with z = e^rho e^{i theta}, s = log tan(theta/2) = -asinh(x/y)."""
    z = as_complex(z)
    return np.log(np.abs(z)), -np.arcsinh(np.real(z) / np.imag(z))


def from_fermi(rho, s):
    theta = 2.0 * np.arctan(np.exp(s))
    return np.exp(rho) * np.exp(1j * theta)


def point_line_distance(z, p, q):
    """Distance from z to the geodesic with homogeneous endpoints p, q.

    sinh d = |Re((z p1 - p0) conj(z q1 - q0))| / (Im z |det(p, q)|).
    """
    z = as_complex(z)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    num = np.abs(np.real((z * p[..., 1] - p[..., 0]) * np.conj(z * q[..., 1] - q[..., 0])))
    return np.arcsinh(num / (np.imag(z) * np.abs(_hdet(p, q))))


def line_line(p, q, r, s):
    """Relative position of geodesics (p, q) and (r, s), homogeneous endpoints.

    Returns (cosh distance, crossing flag); cosh distance is 1 for crossing or
    asymptotic lines.  Vectorized over leading axes.
    """
    num1, den1 = _hdet(r, p), _hdet(r, q)
    num2, den2 = _hdet(s, p), _hdet(s, q)
    # images of r, s in the chart sending p -> 0, q -> oo
    t1 = num1 * den2
    t2 = num2 * den1
    crossing = t1 * t2 < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.abs(t1 + t2) / np.abs(t1 - t2)
    u = np.where(crossing | ~np.isfinite(u), 1.0, np.maximum(u, 1.0))
    return u, crossing


def classify(M, tol=TAU_PAR):
    """identity, elliptic, parabolic or hyperbolic by trace."""
    m = M.as_array() if isinstance(M, MoebiusMap) else np.asarray(M)
    if np.allclose(m, np.eye(2), atol=1e-12) or np.allclose(m, -np.eye(2), atol=1e-12):
        return "identity"
    tr = abs(m[0, 0] + m[1, 1])
    if abs(tr - 2.0) <= tol:
        return "parabolic"
    return "hyperbolic" if tr > 2.0 else "elliptic"


def translation_length(M):
    if classify(M) != "hyperbolic":
        raise NotHyperbolic(f"trace {M.trace!r} does not exceed 2")
    return float(2.0 * _arccosh(abs(M.trace) / 2.0))


@dataclass(frozen=True)
class GeodesicLine:
    """Complete geodesic; normalizer sends endpoints (p, q) to (0, oo)."""
    p: float
    q: float
    normalizer: MoebiusMap

    @property
    def hp(self):
        return homogeneous(self.p)

    @property
    def hq(self):
        return homogeneous(self.q)

    def endpoints(self):
        return (self.p, self.q)


def line_from_endpoints(p, q):
    if p == q:
        raise CoincidentLines("degenerate line")
    if q == math.inf:
        n = MoebiusMap(1.0, -p, 0.0, 1.0)
    elif p == math.inf:
        n = MoebiusMap(0.0, -1.0, 1.0, -q)
    elif p > q:
        s = math.sqrt(p - q)
        n = MoebiusMap(1 / s, -p / s, 1 / s, -q / s)
    else:
        s = math.sqrt(q - p)
        n = MoebiusMap(-1 / s, p / s, 1 / s, -q / s)
    return GeodesicLine(float(p), float(q), n)


IMAGINARY_AXIS = GeodesicLine(0.0, math.inf, MoebiusMap.identity())


def fixed_points(M):
    """(repelling, attracting) boundary fixed points of a hyperbolic M."""
    a, b, c, d = M.a, M.b, M.c, M.d
    if abs(c) < 1e-300:
        x = b / (d - a)
        return (x, math.inf) if a > d else (math.inf, x)
    disc = math.sqrt(max((d - a) ** 2 + 4 * b * c, 0.0))
    r1 = (a - d + disc) / (2 * c)
    r2 = (a - d - disc) / (2 * c)
    # attracting fixed point has |c x + d| > 1
    if abs(c * r1 + d) > abs(c * r2 + d):
        return r2, r1
    return r1, r2


def axis(M):
    if classify(M) != "hyperbolic":
        raise NotHyperbolic("axis requires a hyperbolic element")
    rep, att = fixed_points(M)
    return line_from_endpoints(rep, att)


def axis_distance(G1, G2):
    """(distance, crossing) between geodesics, computed in G1's normal chart."""
    n = G1.normalizer
    r = apply_boundary(n, G2.hp)
    s = apply_boundary(n, G2.hq)
    zero, inf = np.array([0.0, 1.0]), np.array([1.0, 0.0])
    tol = 1e-12
    rn, sn = r / np.linalg.norm(r), s / np.linalg.norm(s)
    ends = [abs(_hdet(rn, zero)) < tol or abs(_hdet(rn, inf)) < tol,
            abs(_hdet(sn, zero)) < tol or abs(_hdet(sn, inf)) < tol]
    if all(ends):
        raise CoincidentLines("lines coincide")
    if any(ends):
        return 0.0, False
    u, crossing = line_line(zero, inf, r, s)
    if crossing:
        return 0.0, True
    return float(_arccosh(u)), False


def conjugate(M, N):
    """N M N^{-1}."""
    return N @ M @ N.inverse()


def exp_map(z, r, phi):
    """Point at distance r from z in direction phi (angle from vertical)."""
    z = as_complex(z)
    # geodesic from i in direction phi: rotate the vertical ray by phi about i
    t = np.tanh(np.asarray(r) / 2.0)
    w = t * np.exp(1j * np.asarray(phi))  # disk model point
    zi = 1j * (1 + w) / (1 - w)
    x, y = np.real(z), np.imag(z)
    return x + y * zi
