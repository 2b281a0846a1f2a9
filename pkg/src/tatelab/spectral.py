"""Level matrices, the discrete Laplacian, and its spectrum.

The m x m level matrix P has entries p^{-|i-j|}; R = (1 - 1/p)(P - diag(P 1))
governs the radial (level-combination) eigenfunctions.  The full Laplacian
A = p^{-d} B is assembled in exact rationals from the kernel weights and
converted to floating point once.  The analytic spectrum comes from the
closed-form eigenvalues lambda_{n,l}; the numeric spectrum from a cyclic
Jacobi eigensolver, which serves as the oracle for every spectral claim.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .padic import (
    QuotientPoint,
    QuotientSpace,
    enumerate_points,
    kernel_weight,
)
from .characters import analytic_eigenvalue


def jacobi_eigh(A: np.ndarray, tol_factor: float = 1e-14,
                max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Sweeps all (i, j) pairs in a fixed order, rotating away each
    off-diagonal entry, until the off-diagonal Frobenius norm drops below
    tol_factor times the Frobenius norm of the input.  Returns
    (eigenvalues, eigenvector columns), unsorted.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return np.diagonal(A).copy(), V
    norm = np.linalg.norm(A)
    if norm == 0.0:
        return np.zeros(n), V
    target = tol_factor * norm
    for _ in range(max_sweeps):
        off = _off_norm(A)
        if off <= target:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                aij = A[i, j]
                if aij == 0.0:
                    continue
                diff = A[j, j] - A[i, i]
                if abs(diff) * 1e-36 > abs(aij):
                    t = aij / diff
                else:
                    theta = diff / (2.0 * aij)
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                row_i = A[i, :].copy()
                row_j = A[j, :].copy()
                A[i, :] = c * row_i - s * row_j
                A[j, :] = s * row_i + c * row_j
                col_i = A[:, i].copy()
                col_j = A[:, j].copy()
                A[:, i] = c * col_i - s * col_j
                A[:, j] = s * col_i + c * col_j
                A[i, j] = 0.0
                A[j, i] = 0.0
                vcol_i = V[:, i].copy()
                vcol_j = V[:, j].copy()
                V[:, i] = c * vcol_i - s * vcol_j
                V[:, j] = s * vcol_i + c * vcol_j
    else:
        off = _off_norm(A)
        if off > target:
            raise RuntimeError(f"Jacobi did not converge: off-norm {off:.3e}")
    return np.diagonal(A).copy(), V


def _off_norm(A: np.ndarray) -> float:
    # direct Frobenius norm of the off-diagonal part; the textbook
    # ||A||_F^2 - ||diag||_F^2 form cancels catastrophically near convergence
    off = A - np.diag(np.diagonal(A))
    return float(np.linalg.norm(off))


@dataclass
class LevelMatrices:
    """The m x m level-coupling matrices and their eigendecomposition."""

    p: int
    m: int
    P_exact: list[list[Fraction]]
    R_exact: list[list[Fraction]]
    s: list[Fraction]            # row sums of P
    P: np.ndarray
    L: np.ndarray                # L = diag(P 1) - P
    R: np.ndarray
    Q: np.ndarray                # orthonormal eigenvectors of R, col 0 constant
    lambda0: np.ndarray          # eigenvalues of R, descending, lambda0[0] = 0
    lambda1: float | None        # largest nonzero eigenvalue of P - diag(P 1)


def build_level_matrices(p: int, m: int) -> LevelMatrices:
    """Build P, L, R exactly, then diagonalize R with cyclic Jacobi."""
    P_exact = [[Fraction(p) ** (-abs(i - j)) for j in range(m)] for i in range(m)]
    s = [sum(row, Fraction(0)) for row in P_exact]
    for j in range(m):
        closed = Fraction(1 + p - Fraction(p) ** (-j) - Fraction(p) ** (j + 1 - m),
                          p - 1)
        assert s[j] == closed, "row sum disagrees with closed form"
    scale = 1 - Fraction(1, p)
    negL_exact = [[P_exact[i][j] - (s[i] if i == j else 0) for j in range(m)]
                  for i in range(m)]
    R_exact = [[scale * negL_exact[i][j] for j in range(m)] for i in range(m)]
    for i in range(m):
        assert sum(R_exact[i], Fraction(0)) == 0, "R rows must sum to zero"
        for j in range(m):
            assert R_exact[i][j] == R_exact[j][i]

    P_f = np.array([[float(v) for v in row] for row in P_exact])
    negL = np.array([[float(v) for v in row] for row in negL_exact])
    R_f = np.array([[float(v) for v in row] for row in R_exact])

    eigvals, eigvecs = jacobi_eigh(R_f, tol_factor=1e-15)
    order = np.argsort(-eigvals)
    lambda0 = eigvals[order]
    Q = eigvecs[:, order]
    assert abs(lambda0[0]) < 1e-13, "R must have a zero eigenvalue"
    lambda0[0] = 0.0
    if Q[0, 0] < 0:
        Q[:, 0] = -Q[:, 0]
    lambda1 = float(lambda0[1] / float(scale)) if m > 1 else None
    return LevelMatrices(p=p, m=m, P_exact=P_exact, R_exact=R_exact, s=s,
                         P=P_f, L=-negL, R=R_f, Q=Q, lambda0=lambda0,
                         lambda1=lambda1)


@dataclass
class LaplacianMatrix:
    """The n_points x n_points Laplacian A = p^{-d} B in float, with the
    exact diagonal of B retained for structural checks."""

    space: QuotientSpace
    points: list[QuotientPoint]
    A: np.ndarray
    B_diag_exact: list[Fraction] = field(repr=False, default_factory=list)


def build_laplacian(space: QuotientSpace, cap: int = 20000) -> LaplacianMatrix:
    """Assemble A exactly and convert to float once.

    Off-diagonal B entries are the kernel weights; the diagonal is the
    negated row sum, checked against the closed form
    p^{2d-1} - (|x|_p + p^{1-m} |x|_p^{-1}) p^{d-1}.  Cross-level blocks
    must be the constant p^{-|i-j|}.
    """
    n = space.n_points
    if n > cap:
        raise ValueError(f"space has {n} points, exceeding cap {cap};"
                         f" pass cap>={n} to force assembly")
    p, m, d = space.p, space.m, space.d
    points = enumerate_points(space)
    atom = Fraction(1, p ** d)
    B = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            w = kernel_weight(points[i], points[j], space)
            if points[i].level != points[j].level:
                assert w == Fraction(p) ** (-abs(points[i].level - points[j].level)), \
                    "cross-level blocks must be constant"
            B[i][j] = w
            B[j][i] = w
    diag_exact = []
    A = np.zeros((n, n))
    for i in range(n):
        row_sum = sum(B[i], Fraction(0))
        B[i][i] = -row_sum
        li = points[i].level
        closed = Fraction(p) ** (2 * d - 1) - (
            Fraction(p) ** (-li) + Fraction(p) ** (1 - m + li)) * Fraction(p) ** (d - 1)
        assert row_sum == closed, "diagonal disagrees with closed form"
        diag_exact.append(B[i][i])
        for j in range(n):
            A[i, j] = float(B[i][j] * atom)
    return LaplacianMatrix(space=space, points=points, A=A,
                           B_diag_exact=diag_exact)


def circulant_block(space: QuotientSpace) -> np.ndarray:
    """The matrix T: the within-level block of B minus its all-ones part
    (zero diagonal, kernel_weight - 1 off diagonal).  Identical for every
    level; circulant when the units are ordered multiplicatively."""
    sub = QuotientSpace(space.p, 1, space.d)
    points = enumerate_points(sub)
    n = len(points)
    T = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                T[i, j] = float(kernel_weight(points[i], points[j], sub)) - 1.0
    return T


@dataclass(frozen=True)
class SpectrumEntry:
    eigenvalue: float
    multiplicity: int
    provenance: tuple


def analytic_spectrum(space: QuotientSpace,
                      lm: LevelMatrices) -> list[SpectrumEntry]:
    """The closed-form spectrum of A with multiplicities.

    lambda_{0,k} from R (multiplicity 1 each) plus lambda_{n,l} for each
    level l and conductor n in [1, d] with multiplicity p-2 (n = 1,
    absent for p = 2) or (p-1)^2 p^{n-2} (n >= 2).
    """
    p, m, d = space.p, space.m, space.d
    entries = [SpectrumEntry(float(lm.lambda0[k]), 1, ("R", k))
               for k in range(m)]
    for level in range(m):
        for n in range(1, d + 1):
            mult = p - 2 if n == 1 else (p - 1) ** 2 * p ** (n - 2)
            if mult == 0:
                continue
            entries.append(SpectrumEntry(analytic_eigenvalue(p, m, n, level),
                                         mult, ("conductor", n, level)))
    total = sum(e.multiplicity for e in entries)
    assert total == space.n_points, \
        f"multiplicities sum to {total}, expected {space.n_points}"
    return entries


def numeric_spectrum(A: np.ndarray | LaplacianMatrix) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi, sorted descending."""
    mat = A.A if isinstance(A, LaplacianMatrix) else np.asarray(A, dtype=float)
    asym = np.max(np.abs(mat - mat.T)) if mat.size else 0.0
    if asym > 1e-12:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    eigvals, _ = jacobi_eigh(mat, tol_factor=1e-13)
    return np.sort(eigvals)[::-1]


@dataclass
class SpectrumComparison:
    passed: bool
    max_deviation: float
    tol: float
    multiplicity_mismatch: bool = False
    analytic_total: int = 0
    numeric_total: int = 0
    pairs: list[tuple[float, float]] = field(default_factory=list, repr=False)

    @property
    def worst_pair(self) -> tuple[float, float] | None:
        if not self.pairs:
            return None
        return max(self.pairs, key=lambda ab: abs(ab[0] - ab[1]))


def compare_spectra(analytic: list[SpectrumEntry], numeric: np.ndarray,
                    tol: float = 1e-9) -> SpectrumComparison:
    """Greedy multiset matching of both spectra after sorting."""
    flat = sorted((e.eigenvalue for e in analytic for _ in range(e.multiplicity)),
                  reverse=True)
    num = sorted(numeric, reverse=True)
    if len(flat) != len(num):
        return SpectrumComparison(passed=False, max_deviation=float("inf"),
                                  tol=tol, multiplicity_mismatch=True,
                                  analytic_total=len(flat), numeric_total=len(num))
    pairs = list(zip(flat, [float(v) for v in num]))
    max_dev = max((abs(a - b) for a, b in pairs), default=0.0)
    return SpectrumComparison(passed=max_dev <= tol, max_deviation=max_dev,
                              tol=tol, analytic_total=len(flat),
                              numeric_total=len(num), pairs=pairs)


def spectral_gap(space: QuotientSpace, lm: LevelMatrices) -> float:
    """Smallest nonzero eigenvalue of -A: 1 - 1/p for m = 1, otherwise
    -(1 - 1/p) lambda_1 with lambda_1 from the level matrix.

    Cross-checked against the minimum over the analytic spectrum.  For
    (p, m) = (2, 1) the branch value is not attained by A itself (the
    conductor-1 multiplicity p - 2 vanishes), so the cross-check is
    skipped there and the branch value returned as the defined gap.
    """
    p, m = space.p, space.m
    if m == 1:
        gap = 1.0 - 1.0 / p
    else:
        gap = -(1.0 - 1.0 / p) * lm.lambda1
    if not (p == 2 and m == 1):
        entries = analytic_spectrum(space, lm)
        nonzero = [-e.eigenvalue for e in entries if abs(e.eigenvalue) > 1e-12]
        spectrum_gap = min(nonzero)
        assert abs(spectrum_gap - gap) <= 1e-12, \
            f"gap branch {gap} disagrees with spectrum minimum {spectrum_gap}"
    return gap


_laplacian_cache: dict[tuple[int, int, int], LaplacianMatrix] = {}
_eigen_cache: dict[tuple[int, int, int], tuple] = {}
_cache_lock = threading.Lock()


def laplacian(space: QuotientSpace) -> LaplacianMatrix:
    """Cached assembled Laplacian for a space, shared read-only."""
    key = (space.p, space.m, space.d)
    with _cache_lock:
        hit = _laplacian_cache.get(key)
    if hit is not None:
        return hit
    lapl = build_laplacian(space)
    with _cache_lock:
        _laplacian_cache[key] = lapl
    return lapl


def decomposition(space: QuotientSpace) -> tuple[LaplacianMatrix, np.ndarray, np.ndarray]:
    """Cached (laplacian, eigenvalues, eigenvectors) for a space; the
    eigenpairs come from the cyclic Jacobi solver and are shared read-only."""
    key = (space.p, space.m, space.d)
    lapl = laplacian(space)
    with _cache_lock:
        hit = _eigen_cache.get(key)
    if hit is not None:
        return (lapl, *hit)
    eigvals, eigvecs = jacobi_eigh(lapl.A, tol_factor=1e-13)
    with _cache_lock:
        _eigen_cache[key] = (eigvals, eigvecs)
    return lapl, eigvals, eigvecs
