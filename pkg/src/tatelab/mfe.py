"""The discrete mean field equation A u + rho e^u = rho p^d e_y.

solve_full runs a damped Newton iteration on the full point grid;
solve_radial solves the reduced system in the m + d orbit unknowns (the
off-level values plus the distance shells around the source) and lifts
the result, certifying it against the full equation.  The structural
facts about solutions (upper bounds, the strict minimum at the source,
radial symmetry below the small-rho thresholds, shell monotonicity and
gap decay, solution transport under the symmetry permutations,
uniqueness below the spectral-gap threshold, and stability of the shell
values as the truncation depth grows) are all checkable through
validate_structure, uniqueness_probe, and convergence_study.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._linalg import NearDegenerateError, ldl_solve
from .green import green_numeric
from .padic import (
    QuotientPoint,
    QuotientSpace,
    enumerate_points,
    primitive_root_mod_power,
    validate_point,
)
from .spectral import LevelMatrices, build_laplacian, decomposition

__all__ = [
    "MFEProblem", "MFESolution", "OrbitPartition", "Thresholds",
    "NewtonDivergenceError", "NearDegenerateError",
    "solve_full", "solve_radial", "orbit_partition", "thresholds",
    "validate_structure", "apply_J", "apply_sigma_k",
    "uniqueness_probe", "convergence_study", "residual",
]


@dataclass(frozen=True)
class MFEProblem:
    space: QuotientSpace
    rho: float
    y: QuotientPoint

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        validate_point(self.y, self.space)


@dataclass
class MFESolution:
    u: np.ndarray
    residual_inf: float
    iterations: int
    orbit_values: dict | None = None   # orbit label -> value, radial solves

    def mass(self, space: QuotientSpace) -> float:
        """sum_i e^{u_i}; equals p^d for an exact solution."""
        return float(np.sum(np.exp(self.u)))


class NewtonDivergenceError(RuntimeError):
    """Newton failed to converge; carries the last iterate as data."""

    def __init__(self, message: str, residual: float, iterations: int,
                 u: np.ndarray):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.u = u


def residual(problem: MFEProblem, u: np.ndarray) -> np.ndarray:
    """A u + rho e^u - rho p^d e_y, evaluated on the full grid."""
    lapl, _, _ = decomposition(problem.space)
    iy = lapl.points.index(problem.y)
    F = lapl.A @ u + problem.rho * np.exp(u)
    F[iy] -= problem.rho * problem.space.p ** problem.space.d
    return F


def _newton(F, J, u0: np.ndarray, tol: float, max_iter: int,
            armijo: float = 1e-4, max_halvings: int = 40):
    """Damped Newton: LDL^T steps with a halving line search on ||F||_inf.

    When the plain Newton direction stalls (the line search finds no
    decrease, or the factorization hits a near-zero pivot, both of which
    happen when a wild start wanders near a fold of the linearization)
    one Levenberg step on the least-squares merit is taken instead; the
    iteration returns to plain Newton immediately after.  A start only
    counts as divergent when the rescue cannot decrease ||F||_2 either.
    """
    u = np.array(u0, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        fu = F(u)
    norm = float(np.max(np.abs(fu)))
    for iteration in range(1, max_iter + 1):
        if norm <= tol:
            return u, norm, iteration - 1
        trial = f_trial = None
        degenerate = False
        try:
            step = ldl_solve(J(u), -fu)
        except NearDegenerateError:
            degenerate = True
        else:
            lam = 1.0
            for _ in range(max_halvings):
                cand = u + lam * step
                with np.errstate(over="ignore", invalid="ignore"):
                    f_cand = F(cand)
                cand_norm = float(np.max(np.abs(f_cand)))
                if np.isfinite(cand_norm) and cand_norm <= (1.0 - armijo * lam) * norm:
                    trial, f_trial, trial_norm = cand, f_cand, cand_norm
                    break
                lam *= 0.5
        if trial is None:
            trial, f_trial = _levenberg_rescue(F, J, u, fu, degenerate, iteration)
            trial_norm = float(np.max(np.abs(f_trial)))
        u, fu, norm = trial, f_trial, trial_norm
    if norm <= tol:
        return u, norm, max_iter
    raise NewtonDivergenceError(
        f"no convergence after {max_iter} iterations",
        residual=norm, iterations=max_iter, u=u)


def _levenberg_rescue(F, J, u, fu, degenerate: bool, iteration: int):
    """One (J^2 + mu I)^{-1} J F step decreasing ||F||_2, mu escalating."""
    Ju = J(u)
    grad = Ju @ fu
    fsq = float(np.dot(fu, fu))
    mu = 1e-3 * max(1.0, float(np.max(np.abs(np.diagonal(Ju))))) ** 2
    eye = np.eye(len(u))
    for _ in range(60):
        try:
            step = ldl_solve(Ju @ Ju + mu * eye, -grad)
        except NearDegenerateError:
            mu *= 10.0
            continue
        cand = u + step
        with np.errstate(over="ignore", invalid="ignore"):
            f_cand = F(cand)
        cand_sq = float(np.dot(f_cand, f_cand))
        if np.isfinite(cand_sq) and cand_sq < fsq:
            return cand, f_cand
        mu *= 10.0
    norm = float(np.max(np.abs(fu)))
    if degenerate:
        raise NearDegenerateError("near-degenerate linearization")
    raise NewtonDivergenceError("line search stalled", residual=norm,
                                iterations=iteration, u=u)


def solve_full(problem: MFEProblem, init="zero", tol: float = 1e-12,
               max_iter: int = 200) -> MFESolution:
    """Damped Newton on the full grid.

    init is a vector, or the preset "zero" (the origin) or "green"
    (rho times the zero-mean Green column at y, nearly exact for small
    rho).  The returned residual is re-evaluated independently of the
    iteration.
    """
    space = problem.space
    lapl, _, _ = decomposition(space)
    iy = lapl.points.index(problem.y)
    rhs = np.zeros(space.n_points)
    rhs[iy] = problem.rho * space.p ** space.d

    if isinstance(init, str):
        if init == "zero":
            u0 = np.zeros(space.n_points)
        elif init == "green":
            u0 = problem.rho * green_numeric(space, problem.y)
        else:
            raise ValueError(f"unknown init preset {init!r}")
    else:
        u0 = np.asarray(init, dtype=float)
        if u0.shape != (space.n_points,):
            raise ValueError("init vector has wrong length")

    def F(u):
        return lapl.A @ u + problem.rho * np.exp(u) - rhs

    def J(u):
        return lapl.A + problem.rho * np.diag(np.exp(u))

    u, _, iterations = _newton(F, J, u0, tol, max_iter)
    res = float(np.max(np.abs(residual(problem, u))))
    return MFESolution(u=u, residual_inf=res, iterations=iterations)


@dataclass
class OrbitPartition:
    """The orbits of the solution under the source-fixing symmetries.

    Off-level classes ("level", k) for k != y.level, and at the source
    level the shells ("shell", s): s is the length of the common unit
    digit prefix with y minus one, so s = -1 means the leading digits
    already differ and s = d - 1 is the source itself.
    """

    space: QuotientSpace
    y: QuotientPoint
    labels: list[tuple]
    classes: dict[tuple, list[int]]

    def sizes(self) -> dict[tuple, int]:
        return {lab: len(self.classes[lab]) for lab in self.labels}


def orbit_partition(space: QuotientSpace, y: QuotientPoint) -> OrbitPartition:
    validate_point(y, space)
    points = enumerate_points(space)
    labels: list[tuple] = [("level", k) for k in range(space.m) if k != y.level]
    labels += [("shell", s) for s in range(-1, space.d)]
    classes: dict[tuple, list[int]] = {lab: [] for lab in labels}
    for i, x in enumerate(points):
        if x.level != y.level:
            classes[("level", x.level)].append(i)
            continue
        prefix = 0
        while prefix < space.d and x.digits[prefix] == y.digits[prefix]:
            prefix += 1
        classes[("shell", prefix - 1)].append(i)
    _check_orbit_sizes(space, classes)
    return OrbitPartition(space=space, y=y, labels=labels, classes=classes)


def _check_orbit_sizes(space: QuotientSpace, classes: dict) -> None:
    p, d = space.p, space.d
    for lab, idx in classes.items():
        kind, v = lab
        if kind == "level":
            expected = (p - 1) * p ** (d - 1)
        elif v == -1:
            expected = (p - 2) * p ** (d - 1)
        elif v == d - 1:
            expected = 1
        else:
            expected = (p - 1) * p ** (d - 2 - v)
        assert len(idx) == expected, f"orbit {lab} has size {len(idx)}"
    total = sum(len(i) for i in classes.values())
    assert total == space.n_points


def _shell_count(p: int, d: int, s: int) -> int:
    if s == -1:
        return (p - 2) * p ** (d - 1)
    if s == d - 1:
        return 1
    return (p - 1) * p ** (d - 2 - s)


def reduced_system(space: QuotientSpace, level: int):
    """The orbit-aggregated matrix B_red for a source at the given level.

    Row i lists, for one representative point of orbit i, the summed
    B-weights into each orbit (shell-coupled coefficients of the reduced
    equation).  Entries are exact Fractions; labels order the unknowns as
    off-levels ascending then shells s = -1 .. d-1.
    """
    p, m, d = space.p, space.m, space.d
    labels: list[tuple] = [("level", k) for k in range(m) if k != level]
    labels += [("shell", s) for s in range(-1, d)]
    pos = {lab: j for j, lab in enumerate(labels)}
    n = len(labels)
    e_l = Fraction(p) ** (-level) + Fraction(p) ** (level + 1 - m)
    B = [[Fraction(0)] * n for _ in range(n)]

    for k in range(m):
        if k == level:
            continue
        row = B[pos[("level", k)]]
        for k2 in range(m):
            if k2 == level or k2 == k:
                continue
            row[pos[("level", k2)]] = \
                (p - 1) * Fraction(p) ** (d - 1) * Fraction(p) ** (-abs(k - k2))
        for s in range(-1, d):
            row[pos[("shell", s)]] = \
                Fraction(p) ** (-abs(k - level)) * _shell_count(p, d, s)
        row[pos[("level", k)]] = Fraction(p) ** (d - 1) * (
            Fraction(p) ** (-k) + Fraction(p) ** (k + 1 - m) - 2)

    for s in range(-1, d - 1):
        row = B[pos[("shell", s)]]
        for k in range(m):
            if k != level:
                row[pos[("level", k)]] = \
                    (p - 1) * Fraction(p) ** (d - 1) * Fraction(p) ** (-abs(k - level))
        for s2 in range(-1, s):
            row[pos[("shell", s2)]] = \
                _shell_count(p, d, s2) * Fraction(p) ** (2 * (s2 + 1))
        for s2 in range(s + 1, d - 1):
            row[pos[("shell", s2)]] = \
                (p - 1) * Fraction(p) ** (d - 2 - s2) * Fraction(p) ** (2 * (s + 1))
        row[pos[("shell", d - 1)]] = Fraction(p) ** (2 * (s + 1))
        delta = 1 if s == -1 else 0
        row[pos[("shell", s)]] = -(2 * Fraction(p) ** (s + 1) + delta - e_l) \
            * Fraction(p) ** (d - 1)

    row = B[pos[("shell", d - 1)]]
    for k in range(m):
        if k != level:
            row[pos[("level", k)]] = \
                (p - 1) * Fraction(p) ** (d - 1) * Fraction(p) ** (-abs(k - level))
    for s2 in range(-1, d - 1):
        row[pos[("shell", s2)]] = _shell_count(p, d, s2) * Fraction(p) ** (2 * (s2 + 1))
    row[pos[("shell", d - 1)]] = -(Fraction(p) ** (2 * d - 1) - e_l * Fraction(p) ** (d - 1))

    sizes = [_shell_count(p, d, lab[1]) if lab[0] == "shell"
             else (p - 1) * p ** (d - 1) for lab in labels]
    return labels, sizes, B


def solve_radial(problem: MFEProblem, tol: float = 1e-12,
                 max_iter: int = 200) -> MFESolution:
    """Newton on the reduced orbit system, lifted and certified.

    The reduced equations aggregate the exact Laplacian weights over the
    orbit partition; size-weighting makes the reduced Jacobian symmetric
    so the same LDL^T Newton applies.  The lifted vector must satisfy the
    full equation to the same tolerance, which certifies the reduction
    independently of any radial-symmetry theorem.
    """
    space = problem.space
    p, d = space.p, space.d
    labels, sizes, B_exact = reduced_system(space, problem.y.level)
    n = len(labels)
    B = np.array([[float(v) for v in row] for row in B_exact])
    size_arr = np.array(sizes, dtype=float)
    source = labels.index(("shell", d - 1))
    empty = size_arr == 0.0

    scale = float(p) ** (-d)
    rhs = np.zeros(n)
    rhs[source] = problem.rho * p ** d

    def F_weighted(z):
        f = scale * (B @ z) + problem.rho * np.exp(z) - rhs
        f = size_arr * f
        f[empty] = z[empty]  # pin empty orbits (p = 2 has no s = -1 points)
        return f

    def J_weighted(z):
        J = size_arr[:, None] * (scale * B + problem.rho * np.diag(np.exp(z)))
        if empty.any():
            J[empty, :] = 0.0
            J[:, empty] = 0.0
            J[empty, empty] = 1.0
        return J

    z0 = np.zeros(n)
    z, _, iterations = _newton(F_weighted, J_weighted, z0, tol, max_iter)

    reduced_res = scale * (B @ z) + problem.rho * np.exp(z) - rhs
    reduced_norm = float(np.max(np.abs(reduced_res[~empty])))

    part = orbit_partition(space, problem.y)
    u = np.zeros(space.n_points)
    for j, lab in enumerate(labels):
        u[part.classes[lab]] = z[j]
    full_res = float(np.max(np.abs(residual(problem, u))))
    if full_res > 10 * tol:
        if reduced_norm <= tol:
            raise RuntimeError(
                f"reduction inconsistent: reduced residual {reduced_norm:.3e}"
                f" but lifted residual {full_res:.3e}")
        raise NewtonDivergenceError("radial solve did not certify",
                                    residual=full_res, iterations=iterations, u=u)
    orbit_values = {lab: float(z[j]) for j, lab in enumerate(labels)
                    if not empty[j]}
    return MFESolution(u=u, residual_inf=full_res, iterations=iterations,
                       orbit_values=orbit_values)


@dataclass(frozen=True)
class Thresholds:
    """The four rho thresholds of the structure and uniqueness theory."""

    radial_fine: float     # shells collapse digit by digit
    radial_coarse: float   # refined via the universal bound
    uniqueness: float      # spectral gap beats rho p/(p-2)
    bound_const: float     # universal upper bound on u


def thresholds(space: QuotientSpace, lm: LevelMatrices) -> Thresholds:
    p, m = space.p, space.m
    fine = Fraction(p) ** (-space.d) - Fraction(p) ** (-space.d - m)
    if p == 2:
        coarse = (1 - Fraction(2) ** (-m)) / 4
    else:
        coarse = Fraction(p - 2, p) * (1 - Fraction(p) ** (-m))
    if m == 1:
        gap_factor = 1.0  # delta_{m,1} (1 + lambda_1) - lambda_1 == 1
    else:
        gap_factor = -lm.lambda1
    if p == 2:
        uniq = 0.125 * gap_factor
        bound = 4.0
    else:
        uniq = (1 - 2 / p) * (1 - 1 / p) * gap_factor
        bound = math.log(p / (p - 2))
    return Thresholds(radial_fine=float(fine), radial_coarse=float(coarse),
                      uniqueness=float(uniq), bound_const=bound)


@dataclass
class CheckOutcome:
    passed: bool | None       # None when the check does not apply
    value: float
    note: str = ""


@dataclass
class StructureReport:
    checks: dict[str, CheckOutcome]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values() if c.passed is not None)


def validate_structure(solution: MFESolution, problem: MFEProblem,
                       thr: Thresholds, orbit_tol: float = 1e-9) -> StructureReport:
    """Check every structural statement against a solved vector.

    (a) u <= d ln p, strict except for (p, m) = (2, 1);
    (b) the source is the unique argmin;
    (c) the universal bound ln(p/(p-2)) (p >= 3) or 4 (p = 2);
    (d) per-orbit spread below orbit_tol when rho is under a radial
        threshold;
    (e) shell values strictly decreasing toward the source;
    (f) successive shell gaps nonincreasing outward.
    """
    space = problem.space
    p, m, d = space.p, space.m, space.d
    u = solution.u
    points = enumerate_points(space)
    iy = points.index(problem.y)
    checks: dict[str, CheckOutcome] = {}

    cap = d * math.log(p)
    max_u = float(np.max(u))
    if (p, m) == (2, 1):
        ok = max_u <= cap + 1e-12
        note = "equality admitted for (p, m) = (2, 1)"
    else:
        ok = max_u < cap
        note = ""
    checks["upper_bound"] = CheckOutcome(ok, max_u - cap, note)

    others = np.delete(u, iy)
    gap = float(np.min(others) - u[iy])
    checks["unique_argmin"] = CheckOutcome(bool(np.argmin(u) == iy and gap > 0), gap)

    checks["universal_bound"] = CheckOutcome(max_u < thr.bound_const,
                                             max_u - thr.bound_const)

    part = orbit_partition(space, problem.y)
    radial_applies = problem.rho <= max(thr.radial_fine, thr.radial_coarse)
    spread = 0.0
    for lab in part.labels:
        idx = part.classes[lab]
        if len(idx) > 1:
            spread = max(spread, float(np.max(u[idx]) - np.min(u[idx])))
    checks["radial"] = CheckOutcome(spread <= orbit_tol if radial_applies else None,
                                    spread,
                                    "" if radial_applies else "rho above radial thresholds")

    shell_vals = []
    for s in range(-1, d):
        idx = part.classes[("shell", s)]
        if idx:
            shell_vals.append((s, float(np.mean(u[idx]))))
    mono = all(shell_vals[i][1] > shell_vals[i + 1][1]
               for i in range(len(shell_vals) - 1))
    worst_step = min((shell_vals[i][1] - shell_vals[i + 1][1]
                      for i in range(len(shell_vals) - 1)), default=float("inf"))
    checks["shell_monotone"] = CheckOutcome(mono if radial_applies else None,
                                            worst_step)

    gaps = [shell_vals[i][1] - shell_vals[i + 1][1]
            for i in range(len(shell_vals) - 1)]
    nonincreasing = all(gaps[i + 1] <= gaps[i] + 1e-12 for i in range(len(gaps) - 1))
    worst_jump = max((gaps[i + 1] - gaps[i] for i in range(len(gaps) - 1)),
                     default=0.0)
    checks["shell_gaps"] = CheckOutcome(
        nonincreasing if (radial_applies and len(gaps) > 1) else None, worst_jump)

    mass = solution.mass(space)
    expected = float(p ** d)
    checks["mass"] = CheckOutcome(abs(mass - expected) <= 1e-10 * expected,
                                  mass - expected)

    return StructureReport(checks=checks)


def apply_J(u: np.ndarray) -> np.ndarray:
    """The order-reversing permutation: digit complement at flipped level,
    an involution commuting with the Laplacian."""
    return np.asarray(u)[::-1].copy()


def _sigma_permutation(space: QuotientSpace, k: int) -> np.ndarray:
    """perm with (sigma u)[i] = u[perm[i]]: multiply the unit part of each
    level-k point by the inverse of the fixed multiplicative generator."""
    if not 0 <= k < space.m:
        raise IndexError(f"level {k} outside [0, {space.m - 1}]")
    p, d = space.p, space.d
    pd = p ** d
    g = primitive_root_mod_power(p, d)
    g_inv = pow(g, -1, pd) if pd > 1 else 0
    points = enumerate_points(space)
    index = {x: i for i, x in enumerate(points)}
    perm = np.arange(space.n_points)
    for i, x in enumerate(points):
        if x.level != k:
            continue
        w = x.unit_part(p) * g_inv % pd
        digits = []
        for _ in range(d):
            digits.append(w % p)
            w //= p
        perm[i] = index[QuotientPoint(k, tuple(digits))]
    return perm


def apply_sigma_k(u: np.ndarray, k: int, space: QuotientSpace) -> np.ndarray:
    """Cyclic shift of the level-k block: multiplication of the unit parts
    by the fixed generator of (Z/p^d)^*.

    This is the shift that makes the within-level block circulant; in the
    lexicographic point order it acts as the corresponding permutation.
    For p = 2 the unit group is not cyclic and multiplication by 3 is
    used; it is still a Laplacian-commuting isometry.
    """
    perm = _sigma_permutation(space, k)
    return np.asarray(u)[perm].copy()


@dataclass
class ProbeReport:
    n_starts: int
    seed: int
    rho: float
    clusters: list[dict]          # {"representative", "count", "starts"}
    divergences: list[dict]       # {"start", "residual", "iterations"}

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


def uniqueness_probe(problem: MFEProblem, n_starts: int, seed: int,
                     box: tuple[float, float] = (-5.0, 5.0),
                     cluster_tol: float = 1e-8,
                     threads: int = 1) -> ProbeReport:
    """Multi-start probe: Newton from seeded uniform starts, clustered by
    sup-distance.  Below the uniqueness threshold one cluster is expected;
    divergences are recorded as data, never raised."""
    if n_starts < 2:
        raise ValueError("n_starts must be >= 2")
    rng = np.random.default_rng(seed)
    n = problem.space.n_points
    starts = rng.uniform(box[0], box[1], size=(n_starts, n))

    def run(i):
        try:
            return i, solve_full(problem, init=starts[i]), None
        except (NewtonDivergenceError, NearDegenerateError) as exc:
            return i, None, exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, range(n_starts)))
    else:
        outcomes = [run(i) for i in range(n_starts)]

    clusters: list[dict] = []
    divergences: list[dict] = []
    for i, sol, exc in outcomes:
        if sol is None:
            detail = {"start": i}
            if isinstance(exc, NewtonDivergenceError):
                detail["residual"] = exc.residual
                detail["iterations"] = exc.iterations
            else:
                detail["residual"] = float("nan")
                detail["iterations"] = 0
            divergences.append(detail)
            continue
        for cluster in clusters:
            if np.max(np.abs(sol.u - cluster["representative"])) <= cluster_tol:
                cluster["count"] += 1
                cluster["starts"].append(i)
                break
        else:
            clusters.append({"representative": sol.u, "count": 1, "starts": [i]})
    return ProbeReport(n_starts=n_starts, seed=seed, rho=problem.rho,
                       clusters=clusters, divergences=divergences)


@dataclass
class ConvergenceRow:
    d: int
    mass_error: float
    orbit_values: dict


@dataclass
class ConvergenceStudy:
    p: int
    m: int
    rho: float
    rows: list[ConvergenceRow]
    sup_diffs: list[float]        # per consecutive depth pair, shared labels
    source_gaps: list[tuple[float, float]]  # vs shells d-1 and d at depth d+1

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.sup_diffs, self.sup_diffs[1:]))


def convergence_study(p: int, m: int, rho: float, y_spec: tuple[int, tuple[int, ...]],
                      d_range: range | list[int],
                      tol: float = 1e-12) -> ConvergenceStudy:
    """Solve radially at each depth and track the shell values.

    The source lifts across depths by zero-extending its digits.  Shell s
    at depth d is matched with shell s at depth d + 1 for s <= d - 2; the
    depth-d source shell has no stable partner and its gaps against the
    two refining shells are reported separately.  The Haar mass of e^u is
    checked to be 1 at every depth.
    """
    level, base_digits = y_spec
    depths = sorted(d_range)
    rows = []
    solutions: dict[int, dict] = {}
    for d in depths:
        space = QuotientSpace(p, m, d)
        digits = tuple(base_digits) + (0,) * (d - len(base_digits))
        if len(digits) != d:
            raise ValueError("y digits longer than depth")
        y = QuotientPoint(level, digits)
        problem = MFEProblem(space=space, rho=rho, y=y)
        sol = solve_radial(problem, tol=tol)
        mass_error = abs(sol.mass(space) * p ** (-d) - 1.0)
        rows.append(ConvergenceRow(d=d, mass_error=mass_error,
                                   orbit_values=sol.orbit_values))
        solutions[d] = sol.orbit_values

    sup_diffs = []
    source_gaps = []
    for d1, d2 in zip(depths, depths[1:]):
        v1, v2 = solutions[d1], solutions[d2]
        shared = [lab for lab in v1
                  if lab in v2 and not (lab[0] == "shell" and lab[1] == d1 - 1)]
        sup_diffs.append(max(abs(v1[lab] - v2[lab]) for lab in shared))
        src = v1[("shell", d1 - 1)]
        source_gaps.append((abs(src - v2[("shell", d1 - 1)]),
                            abs(src - v2.get(("shell", d1), src))))
    return ConvergenceStudy(p=p, m=m, rho=rho, rows=rows,
                            sup_diffs=sup_diffs, source_gaps=source_gaps)
