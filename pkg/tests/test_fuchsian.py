import math

import numpy as np
import pytest

from wpgeom import fuchsian, hyp2
from wpgeom.fuchsian import GroupSpec, InvalidSpec, build
from wpgeom.hyp2 import MoebiusMap


def torus(ell, twist=0.0):
    return build(GroupSpec("punctured-torus", ell, twist))


def cyclic(ell):
    return build(GroupSpec("cyclic-hyperbolic", ell))


def keyset(mats, digits=8):
    return {tuple(np.round(fuchsian._sign_normalize(np.asarray(m)[None])[0].ravel(), digits) + 0.0) for m in mats}


def is_alpha_power(M, tol=1e-8):
    return abs(M.b) < tol and abs(M.c) < tol


# build ------------------------------------------------------------------

def test_cyclic_build():
    G = cyclic(0.2)
    assert len(G.generators) == 1
    assert hyp2.translation_length(G.generators[0]) == pytest.approx(0.2, abs=1e-14)
    assert G.geodesics["core"] is hyp2.IMAGINARY_AXIS


def test_parabolic_build():
    G = build(GroupSpec("cyclic-parabolic"))
    assert hyp2.classify(G.generators[0]) == "parabolic"


@pytest.mark.parametrize("ell,twist", [(1.0, 0.0), (0.2, 0.0), (0.5, 0.3), (2.0, -1.0)])
def test_torus_commutator_trace(ell, twist):
    G = torus(ell, twist)
    A, B = G.generators
    # independent oracle: Fricke trace identity from the three traces
    a, b = A.as_array(), B.as_array()
    x, y, z = np.trace(a), np.trace(b), np.trace(a @ b)
    oracle = x * x + y * y + z * z - x * y * z - 2
    assert oracle == pytest.approx(-2, abs=1e-9)
    assert fuchsian.commutator_trace(A, B) == pytest.approx(-2, abs=1e-9)
    assert hyp2.translation_length(A) == pytest.approx(ell, abs=1e-12)


def test_explicit_round_trip():
    G = torus(1.0)
    E = build(GroupSpec("explicit", generators=tuple(G.generators)))
    assert set(E.geodesics) == set(G.geodesics)
    for k in G.geodesics:
        assert E.geodesics[k].endpoints() == pytest.approx(G.geodesics[k].endpoints())
    assert E.length == pytest.approx(1.0)


def test_invalid_specs():
    with pytest.raises(InvalidSpec):
        GroupSpec("cyclic-hyperbolic", -1.0)
    with pytest.raises(InvalidSpec):
        GroupSpec("punctured-torus", 0.0)
    with pytest.raises(InvalidSpec):
        GroupSpec("sphere", 1.0)
    # rotation by an irrational angle is elliptic of infinite order
    R = MoebiusMap.rotation(1.0)
    with pytest.raises(InvalidSpec):
        build(GroupSpec("explicit", generators=(R, MoebiusMap.diag(1.0))))
    with pytest.raises(InvalidSpec):
        build(GroupSpec("explicit", generators=(MoebiusMap.diag(1.0), MoebiusMap.diag(1.0))))


def test_parse_spec_text():
    s = fuchsian.parse_spec_text("kind = punctured-torus\nlength = 0.2  # comment\ntwist = 0.1\n")
    assert (s.kind, s.length, s.twist) == ("punctured-torus", 0.2, 0.1)
    s = fuchsian.parse_spec_text("kind = explicit\ngenerators = 2,0,0,0.5; 1,1,0,1\n")
    assert len(s.generators) == 2
    for text, line in [("kind = cyclic-hyperbolic\nlength = x\n", 2),
                       ("kind = cyclic-hyperbolic\ncolour = red\n", 2),
                       ("kind = explicit\ngenerators = 2,0,0,1\n", 2),
                       ("kind = cyclic-hyperbolic\nkind = cyclic-parabolic\n", 2),
                       ("nonsense\n", 1)]:
        with pytest.raises(InvalidSpec) as e:
            fuchsian.parse_spec_text(text)
        assert e.value.line == line


# enumerate_ball ---------------------------------------------------------

def test_cyclic_ball_count():
    E = fuchsian.enumerate_ball(cyclic(0.5), 2.0)
    assert len(E) == 9
    tl = sorted(round(math.log(abs(m[0, 0] / m[1, 1])) / 0.5) for m in E.mats)
    assert tl == list(range(-4, 5))


def test_parabolic_ball_count():
    E = fuchsian.enumerate_ball(build(GroupSpec("cyclic-parabolic")), 2.0)
    # dist(i, i+k) = arccosh(1 + k^2/2)
    oracle = [k for k in range(-50, 51) if math.acosh(1 + k * k / 2) <= 2.0]
    assert len(E) == len(oracle) == 5


def dfs_ball(G, z0, R):
    """Depth-first enumeration over reduced words, independent of the library BFS."""
    gens = [g.as_array() for g in G.generators]
    gens = gens + [np.linalg.inv(g) for g in gens]
    inv = {0: 2, 1: 3, 2: 0, 3: 1}
    slack = max(float(hyp2.dist(z0, fuchsian._act(g[None], z0)[0])) for g in gens)
    found = {}

    def rec(m, last, depth):
        w = (m[0, 0] * z0 + m[0, 1]) / (m[1, 0] * z0 + m[1, 1])
        d = float(hyp2.dist(z0, w))
        if d > R + 2 * slack:
            return
        if d <= R:
            found[tuple(np.round(fuchsian._sign_normalize(m[None])[0].ravel(), 8) + 0.0)] = m
        for i, g in enumerate(gens):
            if last is not None and inv[i] == last:
                continue
            rec(m @ g, i, depth + 1)

    rec(np.eye(2), None, 0)
    return found


def test_torus_ball_matches_dfs():
    G = torus(1.0)
    E = fuchsian.enumerate_ball(G, 6.0)
    oracle = dfs_ball(G, 1j, 6.0)
    assert len(E) == len(oracle)
    assert keyset(E.mats) == set(oracle)
    assert all(hyp2.dist(1j, M(1j)) <= 6.0 + 1e-12 for M in E.elements)
    assert len(keyset(E.mats)) == len(E)


def test_ball_conjugation_invariant():
    G = torus(1.0, 0.2)
    C = MoebiusMap(1.3, 0.4, 0.2, (1 + 0.4 * 0.2) / 1.3)
    gens = tuple(C @ g @ C.inverse() for g in G.generators)
    H = build(GroupSpec("explicit", generators=gens))
    n1 = len(fuchsian.enumerate_ball(G, 5.0))
    n2 = len(fuchsian.enumerate_ball(H, 5.0, basepoint=C(1j)))
    assert n1 == n2


def test_truncation_bound():
    E = fuchsian.enumerate_ball(torus(0.5), 3.0)
    assert E.truncation_bound == pytest.approx(E.kappa * math.exp(-3.0))
    assert E.kappa > 0


def test_budget_exceeded():
    with pytest.raises(fuchsian.BudgetExceeded) as e:
        fuchsian.enumerate_ball(torus(1.0), 6.0, budget=10)
    assert e.value.count > 10


# cosets -----------------------------------------------------------------

def test_cyclic_cosets():
    reps = fuchsian.coset_reps(cyclic(0.3), "core", 4.0)
    assert len(reps) == 1 and reps[0].key() == MoebiusMap.identity().key()


def test_torus_cosets_distinct_and_monotone():
    G = torus(0.5)
    reps = fuchsian.coset_reps(G, "alpha", 3.0)
    assert reps[0].key() == MoebiusMap.identity().key()
    for i, P in enumerate(reps):
        for Q in reps[i + 1:]:
            assert not is_alpha_power(P @ Q.inverse())
    big = fuchsian.coset_reps(G, "alpha", 6.0)
    assert {r.key() for r in reps} <= {r.key() for r in big}


def test_coset_completeness():
    G = torus(0.5)
    R = 4.0
    reps = fuchsian.coset_reps(G, "alpha", R)
    for M in fuchsian.enumerate_ball(G, R - 0.5).elements:
        assert any(is_alpha_power(M @ c.inverse(), 1e-7) for c in reps)


def test_cyclic_double_cosets_empty():
    D = fuchsian.double_coset_reps(cyclic(0.3), "core", "core", 5.0)
    assert len(D.reps) == 0 and D.identity_class


def brute_u_values(G, R):
    """cosh distances from iR+ to its images under ball elements, axis powers removed."""
    u = []
    for M in fuchsian.enumerate_ball(G, R).elements:
        if is_alpha_power(M):
            continue
        ends = (M.b / M.d if M.d else math.inf, M.a / M.c if M.c else math.inf)
        d, cr = hyp2.axis_distance(hyp2.IMAGINARY_AXIS, hyp2.line_from_endpoints(*ends))
        assert not cr
        u.append(math.cosh(d))
    return np.unique(np.round(u, 8))


def test_torus_double_cosets():
    G = torus(1.0)
    D = fuchsian.double_coset_reps(G, "alpha", "alpha", 6.0)
    assert len(D.reps) > 0
    assert np.all(D.u > 1) and not D.crossing.any()
    assert np.all(np.diff(D.u) >= 0)
    assert D.min_connecting_length == pytest.approx(math.acosh(D.u[0]))
    # the smallest distinct u values agree with a brute-force scan of the ball
    lib = np.unique(np.round(D.u, 8))
    assert lib[:3] == pytest.approx(brute_u_values(G, 6.0)[:3], rel=1e-8)


def test_double_cosets_conjugation_invariant():
    G = torus(1.0, 0.3)
    C = MoebiusMap(1.3, 0.4, 0.2, (1 + 0.4 * 0.2) / 1.3)
    H = build(GroupSpec("explicit", generators=tuple(C @ g @ C.inverse() for g in G.generators)))
    u1 = fuchsian.double_coset_reps(G, "alpha", "alpha", 5.0).u
    u2 = fuchsian.double_coset_reps(H, "g0", "g0", 7.0).u
    assert u2[:3] == pytest.approx(u1[:3], rel=1e-8)


def test_double_coset_continuity():
    h = 1e-3
    u0 = fuchsian.double_coset_reps(torus(0.5), "alpha", "alpha", 5.0).u[0]
    u1 = fuchsian.double_coset_reps(torus(0.5 + h), "alpha", "alpha", 5.0).u[0]
    assert abs(u1 - u0) / u0 <= 10 * h / 0.5


# systole, injectivity, dirichlet ---------------------------------------

def test_systole():
    assert fuchsian.systole(cyclic(0.3), 2.0).value == 0.3
    S = fuchsian.systole(torus(0.2), 3.0)
    assert S.certified and S.value == pytest.approx(0.2, abs=1e-10)
    # exhaustive oracle over all enumerated hyperbolic elements
    mats = fuchsian.enumerate_ball(torus(0.2), 3.0).mats
    tr = np.abs(mats[:, 0, 0] + mats[:, 1, 1])
    tr = tr[tr > 2 + 1e-9]
    assert S.value == pytest.approx(2 * np.arccosh(tr.min() / 2), abs=1e-10)
    with pytest.raises(fuchsian.CutoffInsufficient):
        fuchsian.systole(torus(0.2), 0.3)


def test_systole_continuity():
    h = 1e-3
    s0 = fuchsian.systole(torus(1.0), 4.0).value
    s1 = fuchsian.systole(torus(1.0 + h), 4.0).value
    assert abs(s1 - s0) / s0 <= 10 * h


def test_injectivity_radius_cyclic():
    G = cyclic(0.2)
    # displacement of i*e^{rho}... at the core it is half the length
    assert fuchsian.injectivity_radius(G, 1j) == pytest.approx(0.1, abs=1e-12)


def test_dirichlet_cyclic():
    ell = 0.4
    G = cyclic(ell)
    rng = np.random.default_rng(0)
    r = np.exp(rng.uniform(-ell, ell, 400))
    th = rng.uniform(0.3, math.pi - 0.3, 400)
    z = r * np.exp(1j * th)
    inside = fuchsian.dirichlet_membership(G, z, R=8.0)
    # bisectors between i and e^{+-l} i are the circles |z| = e^{+-l/2}
    expect = np.abs(np.log(r)) <= ell / 2
    margin = np.abs(np.abs(np.log(r)) - ell / 2) > 1e-9
    assert np.array_equal(inside[margin], expect[margin])
    assert fuchsian.dirichlet_membership(G, 1j)


def test_dirichlet_orbit_exclusion():
    G = torus(1.0)
    z = np.array([1j, 1.05j + 0.1, 0.9j - 0.05])
    assert fuchsian.dirichlet_membership(G, z, R=6.0).all()
    for M in fuchsian.enumerate_ball(G, 3.0).elements[1:]:
        if M.key() == MoebiusMap.identity().key():
            continue
        assert not fuchsian.dirichlet_membership(G, M(z), R=6.0).any()


def test_dirichlet_area():
    G = torus(1.0)
    rho = 4.5
    rng = np.random.default_rng(1)
    n = 40_000
    r = rng.uniform(0, rho, n)
    phi = rng.uniform(0, 2 * math.pi, n)
    # hyperbolic polar coordinates about i
    z = hyp2.exp_map(1j, r, phi)
    inside = fuchsian.dirichlet_membership(G, z, R=2 * rho)
    area = 2 * math.pi * rho * np.mean(inside * np.sinh(r))
    assert area == pytest.approx(2 * math.pi, rel=0.05)
