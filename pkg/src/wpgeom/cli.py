"""Command-line experiments: build groups, pairings, norms, Delta checks,
curvature, flats, length sweeps and order fits.

Exit status 0 on pass, 2 on invalid input, 3 on a failed gate.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .fuchsian import (BudgetExceeded, CutoffInsufficient, CutoffTooSmall, GroupSpec, InvalidSpec,
                       build, kappa, parse_spec_file)

EXIT_OK, EXIT_INVALID, EXIT_GATE = 0, 2, 3
DEFAULT_SWEEP = tuple(float(x) for x in np.geomspace(0.4, 0.025, 5))


class DegenerateFit(ValueError):
    """A zero remainder: the expansion is exact at that length (order +inf)."""
    order = math.inf


class GateFailure(RuntimeError):
    pass


def fit_order(samples):
    """Least-squares slope of log|remainder| against log l."""
    pts = [(float(l), float(r)) for l, r in samples]
    if len(pts) < 3:
        raise ValueError("at least 3 samples are needed")
    ls = np.array([p[0] for p in pts])
    rs = np.abs(np.array([p[1] for p in pts]))
    if np.any(ls <= 0) or len(np.unique(ls)) != len(ls):
        raise ValueError("lengths must be positive and distinct")
    if np.any(rs == 0):
        raise DegenerateFit("zero remainder: exact")
    slope, _ = np.polyfit(np.log(ls), np.log(rs), 1)
    return float(slope)


@dataclass
class ExpansionReport:
    quantity: str
    leading: str
    samples: list
    order: float
    threshold: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.order >= self.threshold

    def line(self):
        o = "exact" if math.isinf(self.order) else f"{self.order:.3f}"
        return f"{self.quantity}: leading {self.leading}, order {o} (need >= {self.threshold}) " + (
            "PASS" if self.passed else "FAIL")


def expansion_report(quantity, leading, samples, threshold):
    try:
        order = fit_order([(l, r) for l, r in samples])
    except DegenerateFit:
        order = math.inf
    return ExpansionReport(quantity, leading, list(samples), order, threshold)


# ---------------------------------------------------------------------------
# sweeps

SWEEP_QUANTITIES = {
    # name: (leading tag, threshold)
    "pairing": ("(2/pi) l", 3.5),
    "coefficient": ("2/pi", 2.5),
    "gram": ("1/(4 pi)", 2.5),
    "integral": ("3 l / pi^3", 2.5),
    "curvature": ("-3/(pi l)", 0.5),
    "delta": ("a^2 sin^2", 1.5),
}


def sweep_point(ell, twist=0.0, quantities=tuple(SWEEP_QUANTITIES), cutoff=None):
    """Values and remainders at one length of a punctured-torus sweep."""
    from .curvature import collar_delta, curvature_integral_mode0, holomorphic_curvature, tensor_from_integrals
    from .pairing import gram_matrix, pairing_series

    G = build(GroupSpec("punctured-torus", ell, twist))
    P = pairing_series(G, "alpha", "alpha", cutoff)
    out = {"ell": ell}
    two = 2.0 / math.pi
    out["pairing"] = (P.value, two * ell, P.error)
    out["coefficient"] = (P.value / ell, two, P.error / ell)
    g = gram_matrix(G, ["alpha"], cutoff)
    out["gram"] = (g.entries[0, 0], 1.0 / (4 * math.pi), g.errors[0, 0])
    if {"integral", "curvature"} & set(quantities):
        I = curvature_integral_mode0(G, "alpha")
        out["integral"] = (I.value, 3 * ell / math.pi ** 3, I.error)
        T = tensor_from_integrals(["alpha"], {"alpha": ell}, np.array(I.value).reshape(1, 1, 1, 1), g.entries)
        K = holomorphic_curvature(T, [1.0])
        out["curvature"] = (K, -3.0 / (math.pi * ell), abs(K) * I.error / abs(I.value))
    if "delta" in quantities:
        chk = collar_delta(G, "alpha")
        out["delta"] = (chk.sup_remainder, 0.0, 0.0)
    return {k: v for k, v in out.items() if k == "ell" or k in quantities}


def run_sweep(grid, twist=0.0, quantities=tuple(SWEEP_QUANTITIES), cutoff=None, jobs=None):
    """sweep_point over the grid, concurrently when several CPUs are available;
    results come back in grid order."""
    jobs = min(len(grid), os.cpu_count() or 1) if jobs is None else jobs
    args = [(l, twist, tuple(quantities), cutoff) for l in grid]
    if jobs <= 1:
        return [sweep_point(*a) for a in args]
    with ProcessPoolExecutor(jobs) as ex:
        return list(ex.map(sweep_point, *zip(*args)))


def sweep_reports(points, quantities=tuple(SWEEP_QUANTITIES)):
    reps = []
    for q in quantities:
        tag, thr = SWEEP_QUANTITIES[q]
        reps.append(expansion_report(q, tag, [(p["ell"], abs(p[q][0] - p[q][1])) for p in points], thr))
    return reps


# ---------------------------------------------------------------------------
# output


def _meta_lines(args, G=None, extra=None):
    lines = [f"wpgeom {__version__} numpy {np.__version__} scipy {scipy.__version__}",
             f"command {args.command} spec={getattr(args, 'spec', None)}",
             f"cutoff={args.cutoff} samples={args.samples} seed={args.seed} tol={args.tol}"]
    if G is not None:
        lines.append(f"group kind={G.kind} length={G.length} twist={G.twist}")
        if G.kind in ("punctured-torus", "cyclic-hyperbolic"):
            lines.append(f"kappa={kappa(G)!r}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    return lines


def write_csv(path, meta, header, rows):
    buf = io.StringIO()
    for m in meta:
        buf.write(f"# {m}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    text = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _load_group(args):
    if args.spec is None:
        raise InvalidSpec("--spec is required")
    spec = parse_spec_file(args.spec)
    return spec, build(spec)


def _parse_grid(text, sweep=False):
    try:
        grid = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InvalidSpec(f"--grid: not a list of numbers: {text!r}") from None
    if any(not (g > 0) for g in grid):
        raise InvalidSpec("--grid: lengths must be positive")
    if sweep and (len(grid) < 5 or any(b >= a for a, b in zip(grid, grid[1:]))):
        raise InvalidSpec("--grid: sweeps need at least 5 strictly decreasing lengths")
    return grid


def _parse_complex_rows(text):
    rows = []
    for chunk in text.split(";"):
        if chunk.strip():
            rows.append([complex(t.strip().replace("i", "j")) for t in chunk.split(",")])
    return rows


def _parse_index_sets(text):
    return [[int(t) for t in chunk.split(",") if t.strip()] for chunk in text.split("|") if chunk.strip()]


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(args):
    spec, G = _load_group(args)
    rows = [["kind", G.kind], ["length", G.length], ["twist", G.twist], ["frame", " ".join(G.frame())]]
    write_csv(args.out, _meta_lines(args, G), ["field", "value"], rows)
    return EXIT_OK


def cmd_pairing(args):
    from .pairing import evaluator_for, pairing_quadrature, pairing_series

    spec, G = _load_group(args)
    frame = G.frame()
    method = "series" if args.method == "default" else args.method
    if method not in ("series", "quadrature", "both"):
        raise InvalidSpec("--method must be series, quadrature or both")
    samples = args.samples or 100_000
    rows, ok = [], True
    for i, a in enumerate(frame):
        for b in frame[i:]:
            s = q = None
            if method in ("series", "both"):
                s = pairing_series(G, a, b, args.cutoff)
                rows.append([a, b, "series", s.value, s.error])
            if method in ("quadrature", "both"):
                q = pairing_quadrature(G, evaluator_for(G, a), evaluator_for(G, b), samples, args.tol, args.seed)
                rows.append([a, b, "quadrature", q.value, q.error])
            if s is not None and q is not None and abs(q.value - s.value) > 3 * math.hypot(q.error, s.error):
                ok = False
                print(f"gate series-vs-quadrature failed for ({a},{b})", file=sys.stderr)
    write_csv(args.out, _meta_lines(args, G), ["alpha", "beta", "method", "value", "error"], rows)
    return EXIT_OK if ok else EXIT_GATE


def cmd_norms(args):
    from .pairing import norm_ratio

    spec, G = _load_group(args)
    frame = ["alpha1", "alpha2"] if G.pingpong is not None and args.method == "cover" else None
    r = norm_ratio(G, args.cutoff, frame=frame)
    target = math.sqrt(2.0 / (math.pi * G.length))
    tol = 0.1 if args.tol is None else args.tol
    rel = abs(r.ratio / target - 1.0)
    write_csv(args.out, _meta_lines(args, G), ["ell", "ratio", "sqrt(2/(pi l))", "relative_error", "argmax"],
              [[G.length, r.ratio, target, rel, r.argmax]])
    if rel > tol:
        print(f"gate norm-ratio failed: relative error {rel:.3g} > {tol}", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def cmd_delta(args):
    from .curvature import collar_delta

    spec, G = _load_group(args)
    chk = collar_delta(G, G.frame()[0])
    rows = [[t, m, r] for t, m, r in zip(chk.theta, chk.main, np.real(chk.remainder))]
    write_csv(args.out, _meta_lines(args, G, {"sup_remainder": repr(chk.sup_remainder)}),
              ["theta", "main", "remainder"], rows)
    return EXIT_OK


def cmd_curvature(args):
    from .curvature import (curvature_integral_collar, curvature_integral_full, curvature_integral_mode0,
                            holomorphic_curvature, main_coefficient_table, tensor_from_integrals)
    from .pairing import gram_matrix

    spec, G = _load_group(args)
    a = G.frame()[0]
    coeffs, lengths, _ = main_coefficient_table(G, [a], args.cutoff)
    ell = lengths[a]
    gram = gram_matrix(G, [a], args.cutoff).entries
    rows = []
    methods = [("collar-leading", curvature_integral_collar((a,) * 4, lengths, coeffs))]
    if G.kind != "explicit":
        methods.append(("collar-mode0", curvature_integral_mode0(G, a)))
    if args.samples:
        methods.append(("full-quadrature", curvature_integral_full(G, a, samples=args.samples, tol=args.tol,
                                                                    seed=args.seed)))
    for name, ci in methods:
        T = tensor_from_integrals([a], lengths, np.array(ci.value).reshape(1, 1, 1, 1), gram)
        K = holomorphic_curvature(T, [1.0])
        I = float(np.real(ci.value))
        rows.append([name, ell, I, 3 * ell / math.pi ** 3, I - 3 * ell / math.pi ** 3, ci.error,
                     float(T.entries.real.ravel()[0]), K, K * math.pi * ell])
    write_csv(args.out, _meta_lines(args, G),
              ["method", "ell", "I_aaaa", "leading", "remainder", "error", "R_diag", "K", "K_pi_l"], rows)
    return EXIT_OK


def cmd_flats(args):
    from .curvature import FlatsSubspace, classify_flat

    if not args.vectors:
        raise InvalidSpec("--vectors is required")
    V = _parse_complex_rows(args.vectors)
    n = len(V[0])
    sigma = [int(t) for t in args.sigma.split(",") if t.strip()] if args.sigma else []
    parts = _parse_index_sets(args.parts) if args.parts else []
    rep = classify_flat(FlatsSubspace(np.array(V), sigma, parts, n))
    text = "\n".join(rep.lines()) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args):
    twist = 0.0
    if args.spec is not None:
        spec = parse_spec_file(args.spec)
        if spec.kind != "punctured-torus":
            raise InvalidSpec("sweeps run on punctured-torus specs")
        twist = spec.twist
    grid = _parse_grid(args.grid, sweep=True) if args.grid else list(DEFAULT_SWEEP)
    qs = tuple(SWEEP_QUANTITIES) if args.quantity == "all" else (args.quantity,)
    pts = run_sweep(grid, twist, qs, args.cutoff, args.jobs)
    reps = sweep_reports(pts, qs)
    orders = {r.quantity: r for r in reps}
    rows = []
    for p in pts:
        for q in qs:
            v, lead, err = p[q]
            row = [p["ell"], q, v, lead, abs(v - lead), err]
            row.append(v * math.pi * p["ell"] if q == "curvature" else "")
            rows.append(row)
    meta = _meta_lines(args, extra={"twist": twist, "grid": ",".join(repr(g) for g in grid)})
    meta += [r.line() for r in reps]
    write_csv(args.out, meta, ["ell", "quantity", "value", "leading", "remainder", "error", "K_pi_l"], rows)
    for r in reps:
        print(r.line(), file=sys.stderr)
    return EXIT_OK if all(r.passed for r in orders.values()) else EXIT_GATE


def cmd_fit(args):
    if not args.input:
        raise InvalidSpec("fit needs an input CSV with columns ell and remainder")
    with open(args.input) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rd = csv.DictReader(lines)
    if rd.fieldnames is None or "ell" not in rd.fieldnames or "remainder" not in rd.fieldnames:
        raise InvalidSpec("input CSV needs columns ell and remainder")
    groups = {}
    for row in rd:
        groups.setdefault(row.get("quantity", "remainder"), []).append((float(row["ell"]), float(row["remainder"])))
    thr = args.tol
    ok = True
    rows = []
    for q, smp in groups.items():
        try:
            order = fit_order(smp)
        except DegenerateFit:
            order = math.inf
        passed = thr is None or order >= thr
        ok &= passed
        rows.append([q, len(smp), order, "" if thr is None else thr, "pass" if passed else "fail"])
    write_csv(args.out, _meta_lines(args, extra={"input": args.input}),
              ["quantity", "samples", "order", "threshold", "status"], rows)
    return EXIT_OK if ok else EXIT_GATE


COMMANDS = {"build": cmd_build, "pairing": cmd_pairing, "norms": cmd_norms, "delta": cmd_delta,
            "curvature": cmd_curvature, "flats": cmd_flats, "sweep": cmd_sweep, "fit": cmd_fit}


def parser():
    p = argparse.ArgumentParser(prog="wpgeom", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"wpgeom {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--spec", help="surface spec file (key = value lines)")
        s.add_argument("--cutoff", type=float, help="distance cutoff R for series")
        s.add_argument("--samples", type=int, default=0, help="Monte Carlo samples (0: skip quadrature)")
        s.add_argument("--grid", help="comma-separated lengths")
        s.add_argument("--tol", type=float, help="tolerance or threshold for the gate")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", help="output path (stdout when omitted)")
        s.add_argument("--method", default="default", help="pairing: series|quadrature|both; norms: 'cover' for the 2-curve frame")
        if name == "sweep":
            s.add_argument("--quantity", default="all", choices=["all", *SWEEP_QUANTITIES])
            s.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
        if name == "flats":
            s.add_argument("--vectors", help="rows of complex coefficients, e.g. '1,0;0,1j'")
            s.add_argument("--sigma", help="frame indices of pinched geodesics, e.g. '0,1'")
            s.add_argument("--parts", help="index sets of the other factors, e.g. '2,3|4'")
        if name == "fit":
            s.add_argument("input", nargs="?", help="CSV with ell and remainder columns")
    return p


def run(argv=None):
    """Parse arguments, run the subcommand and return the exit status."""
    p = parser()
    try:
        args = p.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    if args.samples is not None and args.samples < 0:
        print("error: --samples must be non-negative", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except (InvalidSpec, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as e:
        if type(e).__name__ in ("CutoffTooSmall", "CrossingAxes"):
            print(f"gate failure: {e}", file=sys.stderr)
            return EXIT_GATE
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, BudgetExceeded, CutoffInsufficient) as e:
        print(f"gate failure ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_GATE


def main():
    sys.exit(run())
