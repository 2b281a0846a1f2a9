"""Command-line front end: spectrum, green, heat, solve, converge, verify.

Every document carries "schema": 1, floats are printed with 17
significant digits, and field order is fixed, so output is
byte-identical for identical configuration and seed.  Exit codes:
0 success, 1 a verification check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import characters, green, mfe, spectral
from .padic import QuotientSpace, enumerate_points, format_point, parse_point

VERIFY_SPACES = [(2, 1, 4), (3, 1, 3), (3, 2, 2), (5, 1, 2), (2, 3, 3)]


# ---------------------------------------------------------------- output

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return "null"
    raise TypeError(f"unexpected scalar {value!r}")


def _json(value) -> str:
    if isinstance(value, dict):
        inner = ",".join(f'"{k}":{_json(v)}' for k, v in value.items())
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_json(v) for v in value) + "]"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, np.floating):
        return _fmt(float(value))
    return _fmt(value)


def _csv_rows(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rows[0].keys())
    for row in rows:
        writer.writerow([_fmt(v) if not isinstance(v, str) else v
                         for v in row.values()])
    return buf.getvalue()


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _space_tag(space: QuotientSpace) -> str:
    return f"p={space.p},m={space.m},d={space.d}"


# ---------------------------------------------------------------- checks

def _check(suite: str, space: str, name: str, value: float, tol: float | None,
           passed: bool) -> dict:
    return {"schema": 1, "suite": suite, "space": space, "check": name,
            "value": float(value), "tol": tol, "pass": bool(passed)}


def _suite_spectrum(space: QuotientSpace) -> list[dict]:
    tag = _space_tag(space)
    lm = spectral.build_level_matrices(space.p, space.m)
    lapl = spectral.build_laplacian(space)
    comparison = spectral.compare_spectra(
        spectral.analytic_spectrum(space, lm),
        spectral.numeric_spectrum(lapl), tol=1e-9)
    out = [_check("spectrum", tag, "analytic_vs_numeric",
                  comparison.max_deviation, 1e-9, comparison.passed)]
    numeric = spectral.numeric_spectrum(lapl)
    kernel_dim = int(np.sum(np.abs(numeric) < 1e-10))
    out.append(_check("spectrum", tag, "kernel_dimension", kernel_dim, None,
                      kernel_dim == 1))
    gap = spectral.spectral_gap(space, lm)
    out.append(_check("spectrum", tag, "spectral_gap", gap, None, gap > 0))
    row_sums = float(np.max(np.abs(lapl.A.sum(axis=1))))
    out.append(_check("spectrum", tag, "row_sums_zero", row_sums, 1e-12,
                      row_sums <= 1e-12))
    return out


def _suite_characters(space: QuotientSpace) -> list[dict]:
    tag = _space_tag(space)
    if space.p == 2:
        return []
    lm = spectral.build_level_matrices(space.p, space.m)
    basis = characters.eigenbasis(space, lm)
    vectors = np.array([vec for _, vec in basis])
    gram = vectors @ vectors.conj().T * space.p ** (-space.d)
    off = np.max(np.abs(gram - np.diag(np.diagonal(gram))))
    out = [_check("characters", tag, "orthogonality_offdiag", float(off),
                  1e-12, off <= 1e-12)]
    target = 1.0 - 1.0 / space.p
    diag_err = float(np.max(np.abs(np.diagonal(gram).real - target)))
    out.append(_check("characters", tag, "haar_norms", diag_err, 1e-12,
                      diag_err <= 1e-12))
    norms = np.sqrt(np.diagonal(gram).real)
    smin = float(np.linalg.svd(vectors / norms[:, None], compute_uv=False)[-1])
    out.append(_check("characters", tag, "completeness_smin", smin, None,
                      smin > 1e-8))
    points = enumerate_points(space)
    same_level = [x for x in points if x.level == points[0].level]
    worst = 0.0
    x = same_level[0]
    for y in same_level[:4]:
        for n in range(1, space.d + 1):
            total = characters.conductor_partial_sum(space, x, y, n)
            if x == y:
                expected = (space.p - 1) * space.p ** (n - 1)
            else:
                from .padic import distance_valuation
                expected = ((space.p - 1) * space.p ** (n - 1)
                            if distance_valuation(x, y, space) >= n else 0)
            worst = max(worst, abs(total - expected))
    out.append(_check("characters", tag, "second_orthogonality", worst, 1e-10,
                      worst <= 1e-10))
    return out


def _suite_green(space: QuotientSpace) -> list[dict]:
    tag = _space_tag(space)
    lm = spectral.build_level_matrices(space.p, space.m)
    y = enumerate_points(space)[0]
    report = green.verify_green(space, y, lm)
    out = [
        _check("green", tag, "per_level_constant_shape",
               report.max_shape_deviation, report.tol, report.shape_ok),
        _check("green", tag, "formula_solves_equation",
               report.max_equation_residual, report.tol, report.equation_ok),
    ]
    points = enumerate_points(space)
    columns = np.array([green.green_numeric(space, yy) for yy in points])
    asym = float(np.max(np.abs(columns - columns.T)))
    out.append(_check("green", tag, "numeric_symmetry", asym, 1e-10,
                      asym <= 1e-10))
    return out


def _suite_heat(space: QuotientSpace) -> list[dict]:
    tag = _space_tag(space)
    lm = spectral.build_level_matrices(space.p, space.m)
    y = enumerate_points(space)[0]
    report = green.verify_heat(space, y, lm, [0.1, 1.0, 10.0])
    out = [
        _check("heat", tag, "formula_vs_numeric", report.max_deviation,
               report.tol, report.max_deviation <= report.tol),
        _check("heat", tag, "zero_haar_mean", report.max_haar_mean,
               report.mean_tol, report.max_haar_mean <= report.mean_tol),
    ]
    sups = [float(np.max(np.abs(green.heat_numeric(t, space, y))))
            for t in (0.0, 0.5, 1.0, 2.0, 5.0)]
    monotone = all(b <= a * (1 + 1e-12) for a, b in zip(sups, sups[1:]))
    out.append(_check("heat", tag, "sup_norm_decay", sups[-1], None, monotone))
    return out


def _suite_mfe(space: QuotientSpace) -> list[dict]:
    tag = _space_tag(space)
    lm = spectral.build_level_matrices(space.p, space.m)
    thr = mfe.thresholds(space, lm)
    out = [
        _check("mfe", tag, "threshold_radial_fine", thr.radial_fine, None, True),
        _check("mfe", tag, "threshold_radial_coarse", thr.radial_coarse, None, True),
        _check("mfe", tag, "threshold_uniqueness", thr.uniqueness, None, True),
        _check("mfe", tag, "threshold_bound", thr.bound_const, None, True),
    ]
    rho = 0.9 * min(thr.radial_fine, thr.radial_coarse, thr.uniqueness)
    y = enumerate_points(space)[0]
    problem = mfe.MFEProblem(space=space, rho=rho, y=y)
    sol = mfe.solve_full(problem)
    out.append(_check("mfe", tag, "residual", sol.residual_inf, 1e-12,
                      sol.residual_inf <= 1e-12))
    report = mfe.validate_structure(sol, problem, thr)
    for name, outcome in report.checks.items():
        if outcome.passed is None:
            continue
        out.append(_check("mfe", tag, name, outcome.value, None, outcome.passed))
    radial = mfe.solve_radial(problem)
    agree = float(np.max(np.abs(radial.u - sol.u)))
    out.append(_check("mfe", tag, "radial_matches_full", agree, 1e-9,
                      agree <= 1e-9))
    ju = mfe.apply_J(sol.u)
    points = enumerate_points(space)
    mirrored = mfe.MFEProblem(space=space, rho=rho,
                              y=points[space.n_points - 1 - points.index(y)])
    jres = float(np.max(np.abs(mfe.residual(mirrored, ju))))
    out.append(_check("mfe", tag, "mirror_transport", jres, 1e-9, jres <= 1e-9))
    return out


SUITES = {
    "spectrum": _suite_spectrum,
    "characters": _suite_characters,
    "green": _suite_green,
    "heat": _suite_heat,
    "mfe": _suite_mfe,
}


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    spaces = [QuotientSpace(p, m, d) for p, m, d in VERIFY_SPACES]

    def run(space):
        result = []
        for name in names:
            result.extend(SUITES[name](space))
        return result

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            per_space = list(pool.map(run, spaces))
    else:
        per_space = [run(space) for space in spaces]
    checks = [c for chunk in per_space for c in chunk]

    if args.format == "csv":
        rows = [{"suite": c["suite"], "space": c["space"], "check": c["check"],
                 "value": c["value"], "tol": c["tol"] if c["tol"] is not None else "",
                 "pass": c["pass"]} for c in checks]
        _emit(_csv_rows(rows), args.output)
    else:
        _emit("".join(_json(c) + "\n" for c in checks), args.output)
    return 0 if all(c["pass"] for c in checks) else 1


# ----------------------------------------------------------- subcommands

def _provenance_str(entry) -> str:
    if entry.provenance[0] == "R":
        return f"R[{entry.provenance[1]}]"
    _, n, level = entry.provenance
    return f"n={n},l={level}"


def cmd_spectrum(args) -> int:
    space = QuotientSpace(args.p, args.m, args.d)
    lm = spectral.build_level_matrices(args.p, args.m)
    analytic = spectral.analytic_spectrum(space, lm)
    numeric = spectral.numeric_spectrum(spectral.build_laplacian(space))
    comparison = spectral.compare_spectra(analytic, numeric, tol=args.tol)
    if args.format == "csv":
        rows = [{"eig": e.eigenvalue, "mult": e.multiplicity,
                 "provenance": _provenance_str(e)} for e in analytic]
        _emit(_csv_rows(rows), args.output)
    else:
        doc = {
            "schema": 1,
            "space": {"p": args.p, "m": args.m, "d": args.d},
            "analytic": [{"eig": e.eigenvalue, "mult": e.multiplicity,
                          "provenance": _provenance_str(e)} for e in analytic],
            "numeric": [float(v) for v in numeric],
            "max_deviation": comparison.max_deviation,
            "pass": comparison.passed,
        }
        _emit(_json(doc) + "\n", args.output)
    return 0 if comparison.passed else 1


def _class_rows(space, y, lm, value_fn):
    """One row per orbit class of the source: shells carry their distance
    valuation M, off-level classes carry their level."""
    part = mfe.orbit_partition(space, y)
    points = enumerate_points(space)
    rows = []
    for label in part.labels:
        idx = part.classes[label]
        if not idx:
            continue
        kind, v = label
        if kind == "shell" and v == space.d - 1:
            continue  # the source itself: formula is off-diagonal only
        x = points[idx[0]]
        name = f"M={v + 1}" if kind == "shell" else f"level={v}"
        M = v + 1 if kind == "shell" else None
        rows.append((name, M, x, idx))
    return rows


def cmd_green(args) -> int:
    space = QuotientSpace(args.p, args.m, args.d)
    lm = spectral.build_level_matrices(args.p, args.m)
    y = parse_point(args.y, space)
    numeric = green.green_numeric(space, y)
    points = enumerate_points(space)
    if args.x:
        x = parse_point(args.x, space)
        value = green.green_formula(x, y, space, lm)
        doc = {"schema": 1, "space": {"p": args.p, "m": args.m, "d": args.d},
               "y": format_point(y), "x": format_point(x),
               "formula": value, "numeric": float(numeric[points.index(x)])}
        _emit(_json(doc) + "\n", args.output)
        return 0
    rows = []
    for name, M, x, idx in _class_rows(space, y, lm, None):
        formula = green.green_formula(x, y, space, lm)
        num = float(numeric[idx[0]])
        rows.append({"class": name, "M": M, "formula": formula,
                     "numeric": num, "diff": formula - num})
    if args.format == "csv":
        _emit(_csv_rows(rows), args.output)
    else:
        doc = {"schema": 1, "space": {"p": args.p, "m": args.m, "d": args.d},
               "y": format_point(y), "shells": rows}
        _emit(_json(doc) + "\n", args.output)
    return 0


def cmd_heat(args) -> int:
    space = QuotientSpace(args.p, args.m, args.d)
    lm = spectral.build_level_matrices(args.p, args.m)
    y = parse_point(args.y, space)
    times = args.t or [1.0]
    points = enumerate_points(space)
    rows = []
    for t in times:
        numeric = green.heat_numeric(t, space, y)
        for name, M, x, idx in _class_rows(space, y, lm, None):
            formula = green.heat_formula(t, x, y, space, lm)
            num = float(numeric[idx[0]])
            rows.append({"t": t, "class": name, "M": M, "formula": formula,
                         "numeric": num, "diff": formula - num})
    if args.format == "csv":
        _emit(_csv_rows(rows), args.output)
    else:
        doc = {"schema": 1, "space": {"p": args.p, "m": args.m, "d": args.d},
               "y": format_point(y), "table": rows}
        _emit(_json(doc) + "\n", args.output)
    return 0


def cmd_solve(args) -> int:
    space = QuotientSpace(args.p, args.m, args.d)
    lm = spectral.build_level_matrices(args.p, args.m)
    y = parse_point(args.y, space)
    problem = mfe.MFEProblem(space=space, rho=args.rho, y=y)
    thr = mfe.thresholds(space, lm)
    if args.radial:
        sol = mfe.solve_radial(problem, tol=args.tol)
    else:
        sol = mfe.solve_full(problem, init=args.init, tol=args.tol)
    report = mfe.validate_structure(sol, problem, thr)
    points = enumerate_points(space)
    doc = {
        "schema": 1,
        "space": {"p": args.p, "m": args.m, "d": args.d},
        "rho": args.rho,
        "y": format_point(y),
        "radial": bool(args.radial),
        "u": {format_point(x): float(sol.u[i]) for i, x in enumerate(points)},
        "residual": sol.residual_inf,
        "iterations": sol.iterations,
        "mass": sol.mass(space),
        "validation": {name: {"pass": c.passed, "value": c.value}
                       for name, c in report.checks.items()},
        "thresholds": {"radial_fine": thr.radial_fine,
                       "radial_coarse": thr.radial_coarse,
                       "uniqueness": thr.uniqueness,
                       "bound_const": thr.bound_const},
    }
    if sol.orbit_values is not None:
        doc["orbit_values"] = {f"{k[0]}[{k[1]}]": v
                               for k, v in sol.orbit_values.items()}
    if args.starts:
        probe = mfe.uniqueness_probe(problem, args.starts, args.seed,
                                     threads=args.threads)
        doc["probe"] = {
            "starts": probe.n_starts,
            "seed": probe.seed,
            "clusters": probe.n_clusters,
            "cluster_sizes": [c["count"] for c in probe.clusters],
            "divergences": len(probe.divergences),
        }
    if args.format == "csv":
        rows = [{"point": format_point(x), "u": float(sol.u[i])}
                for i, x in enumerate(points)]
        _emit(_csv_rows(rows), args.output)
    else:
        _emit(_json(doc) + "\n", args.output)
    return 0


def cmd_converge(args) -> int:
    space = QuotientSpace(args.p, args.m, args.d_min)
    y = parse_point(args.y, space)
    study = mfe.convergence_study(args.p, args.m, args.rho,
                                  (y.level, y.digits),
                                  range(args.d_min, args.d_max + 1))
    depth_rows = [{"d": row.d, "mass_error": row.mass_error,
                   **{f"{k[0]}[{k[1]}]": v for k, v in row.orbit_values.items()}}
                  for row in study.rows]
    if args.format == "csv":
        rows = []
        for row in study.rows:
            for lab, v in row.orbit_values.items():
                rows.append({"d": row.d, "orbit": f"{lab[0]}[{lab[1]}]",
                             "value": v})
        _emit(_csv_rows(rows), args.output)
    else:
        doc = {
            "schema": 1,
            "p": args.p, "m": args.m, "rho": args.rho,
            "y": format_point(y),
            "depths": depth_rows,
            "sup_diffs": study.sup_diffs,
            "source_gaps": [list(g) for g in study.source_gaps],
            "strictly_decreasing": study.strictly_decreasing,
        }
        _emit(_json(doc) + "\n", args.output)
    return 0


# -------------------------------------------------------------- parsing

def _add_space_args(sub, with_d=True):
    sub.add_argument("--p", type=int, required=True, help="prime base")
    sub.add_argument("--m", type=int, required=True, help="levels in the fundamental domain")
    if with_d:
        sub.add_argument("--d", type=int, required=True, help="digit truncation depth")


def _add_io_args(sub):
    sub.add_argument("--format", choices=["json", "csv"], default="json")
    sub.add_argument("--output", default=None, help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tatelab",
        description="Spectra, Green's functions, heat kernels, and mean field"
                    " equations on finite quotients of the p-adic Tate curve.")
    default_threads = int(os.environ.get("TATELAB_THREADS", "1"))
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("spectrum", help="analytic vs numeric spectrum")
    _add_space_args(sp)
    sp.add_argument("--tol", type=float, default=1e-9)
    _add_io_args(sp)
    sp.set_defaults(fn=cmd_spectrum)

    gr = sub.add_parser("green", help="Green's function shell table")
    _add_space_args(gr)
    gr.add_argument("--y", required=True, help='source point "l:b0,b1,..."')
    gr.add_argument("--x", default=None, help="optional single evaluation point")
    _add_io_args(gr)
    gr.set_defaults(fn=cmd_green)

    ht = sub.add_parser("heat", help="heat kernel shell table")
    _add_space_args(ht)
    ht.add_argument("--y", required=True)
    ht.add_argument("--x", default=None)
    ht.add_argument("--t", type=float, action="append",
                    help="time (repeatable, default 1.0)")
    _add_io_args(ht)
    ht.set_defaults(fn=cmd_heat)

    so = sub.add_parser("solve", help="solve the mean field equation")
    _add_space_args(so)
    so.add_argument("--rho", type=float, required=True)
    so.add_argument("--y", required=True)
    so.add_argument("--radial", action="store_true")
    so.add_argument("--init", choices=["zero", "green"], default="zero")
    so.add_argument("--starts", type=int, default=0,
                    help="also run a seeded multi-start uniqueness probe")
    so.add_argument("--seed", type=int, default=0)
    so.add_argument("--tol", type=float, default=1e-12)
    so.add_argument("--threads", type=int, default=default_threads)
    _add_io_args(so)
    so.set_defaults(fn=cmd_solve)

    cv = sub.add_parser("converge", help="shell convergence across depths")
    _add_space_args(cv, with_d=False)
    cv.add_argument("--rho", type=float, required=True)
    cv.add_argument("--y", required=True,
                    help="source at the smallest depth; digits zero-extend")
    cv.add_argument("--d-min", type=int, required=True)
    cv.add_argument("--d-max", type=int, required=True)
    _add_io_args(cv)
    cv.set_defaults(fn=cmd_converge)

    ve = sub.add_parser("verify", help="run the invariant suites")
    ve.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    ve.add_argument("--threads", type=int, default=default_threads)
    _add_io_args(ve)
    ve.set_defaults(fn=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
