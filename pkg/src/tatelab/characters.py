"""Multiplicative characters of Z_p^* localized to the levels of X_{m,d}.

A character is indexed by (h, c, n): h twists the torsion part (Z/p)^*
through the discrete logarithm, and (c, n) twists the principal units
1 + p Z_p through the p-adic logarithm; n is the conductor.  Localizing
to a level l gives the eigenfunctions of the quotient Laplacian that are
supported on p^l Z_p^*.  Phases are kept as exact rationals mod 1; the
complex unit circle only enters at the final conversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .padic import (
    QuotientPoint,
    QuotientSpace,
    discrete_log,
    enumerate_points,
    fractional_part,
    padic_log_unit,
    validate_point,
)


@dataclass(frozen=True)
class Phase:
    """An exact angle: the point e^{2 pi i value} with value in [0, 1)."""

    value: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", self.value % 1)

    def __add__(self, other: "Phase") -> "Phase":
        return Phase(self.value + other.value)

    def as_complex(self) -> complex:
        angle = 2.0 * math.pi * float(self.value)
        return complex(math.cos(angle), math.sin(angle))


@dataclass(frozen=True)
class Character:
    """chi_{h,c,n} localized to a level: zero off p^level Z_p^*."""

    h: int
    c: int
    n: int
    level: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("conductor must be >= 1")
        if self.h < 0:
            raise ValueError("h must be >= 0")
        if self.c < 1:
            raise ValueError("c must be >= 1")


def characters_of_conductor(p: int, n: int) -> list[tuple[int, int]]:
    """The (h, c) labels of the characters with exact conductor n.

    n = 1: the p - 2 nontrivial characters of (Z/p)^*, c normalized to 1.
    n >= 2: h free in [0, p-2], c in [1, p^{n-1}] coprime to p, giving
    (p-1)^2 p^{n-2} characters; only c mod p^{n-1} matters.
    """
    if n == 1:
        return [(h, 1) for h in range(1, p - 1)]
    return [(h, c)
            for h in range(p - 1)
            for c in range(1, p ** (n - 1)) if c % p != 0]


def eval_character(chi: Character, x: QuotientPoint,
                   space: QuotientSpace) -> Phase | None:
    """Exact evaluation of the level-localized character at a point.

    Returns None (the value 0) off the character's level, otherwise the
    phase h ord(b_0) / (p-1) + {c ln(u / b_0) / p^n}_p of the unit part u.
    """
    p = space.p
    if p == 2:
        raise ValueError("characters unsupported for p = 2")
    if chi.n > space.d:
        raise ValueError("conductor exceeds truncation")
    validate_point(x, space)
    if x.level != chi.level:
        return None
    a0 = x.digits[0]
    phase = Fraction(chi.h * discrete_log(a0, p), p - 1)
    pn = p ** chi.n
    u = x.unit_part(p) * pow(a0, -1, pn) % pn
    digits = []
    uu = u
    for _ in range(chi.n):
        digits.append(uu % p)
        uu //= p
    log_u = padic_log_unit(digits, chi.n, p)
    phase += fractional_part(chi.c * log_u, pn)
    return Phase(phase)


def inner_product(f: np.ndarray, g: np.ndarray, space: QuotientSpace) -> complex:
    """Discrete Haar inner product sum_x f(x) conj(g(x)) p^{-d}."""
    if len(f) != len(g) or len(f) != space.n_points:
        raise ValueError("vectors must be indexed by enumerate_points order")
    return complex(np.sum(np.asarray(f) * np.conj(np.asarray(g)))
                   * space.p ** (-space.d))


@dataclass(frozen=True)
class BasisLabel:
    """Provenance of an eigenbasis vector and its analytic eigenvalue."""

    eigenvalue: float
    kind: str                    # "level_combo", "character", or "numeric"
    level: int | None = None     # support level (characters) or R index k
    n: int | None = None
    h: int | None = None
    c: int | None = None
    warning: str | None = None


def eigenbasis(space: QuotientSpace, lm) -> list[tuple[BasisLabel, np.ndarray]]:
    """The full analytic eigenbasis of the quotient Laplacian.

    m level-combination vectors built from the columns of Q (eigenvectors
    of the level matrix R), plus every localized character of conductor
    n <= d; in total exactly n_points vectors, each labeled with its
    eigenvalue.  For p = 2 the character construction is unavailable and
    the numeric eigenvectors are returned with a warning label.
    """
    p, m, d = space.p, space.m, space.d
    points = enumerate_points(space)

    if p == 2:
        from . import spectral

        lapl = spectral.build_laplacian(space)
        eigvals, eigvecs = spectral.jacobi_eigh(lapl.A)
        order = np.argsort(-eigvals)
        out = []
        for j in order:
            label = BasisLabel(eigenvalue=float(eigvals[j]), kind="numeric",
                               warning="p=2: no character basis, numeric eigenvectors")
            out.append((label, eigvecs[:, j].astype(complex)))
        return out

    basis: list[tuple[BasisLabel, np.ndarray]] = []
    levels = np.array([x.level for x in points])
    for k in range(m):
        vec = lm.Q[levels, k].astype(complex)
        basis.append((BasisLabel(eigenvalue=float(lm.lambda0[k]),
                                 kind="level_combo", level=k), vec))

    for level in range(m):
        for n in range(1, d + 1):
            lam = analytic_eigenvalue(p, m, n, level)
            for h, c in characters_of_conductor(p, n):
                chi = Character(h=h, c=c, n=n, level=level)
                vec = np.zeros(space.n_points, dtype=complex)
                for i, x in enumerate(points):
                    ph = eval_character(chi, x, space)
                    if ph is not None:
                        vec[i] = ph.as_complex()
                basis.append((BasisLabel(eigenvalue=lam, kind="character",
                                         level=level, n=n, h=h, c=c), vec))

    assert len(basis) == space.n_points
    return basis


def analytic_eigenvalue(p: int, m: int, n: int, level: int) -> float:
    """lambda_{n,l} = -p^{n-1} - p^{n-2} + (p^{-l} + p^{l+1-m}) / p."""
    lam = -Fraction(p) ** (n - 1) - Fraction(p) ** (n - 2) \
        + (Fraction(p) ** (-level) + Fraction(p) ** (level + 1 - m)) / p
    return float(lam)


def conductor_partial_sum(space: QuotientSpace, x: QuotientPoint,
                          y: QuotientPoint, n: int) -> complex:
    """sum over all characters of conductor <= n (trivial included) of
    phi(x) conj(phi(y)) at the common level of x and y.

    Equals (p-1) p^{n-1} when v_p(x/y - 1) >= n and 0 otherwise.
    """
    if x.level != y.level:
        raise ValueError("partial sums are defined at a common level")
    total = complex(1.0)  # trivial character
    for nn in range(1, n + 1):
        for h, c in characters_of_conductor(space.p, nn):
            chi = Character(h=h, c=c, n=nn, level=x.level)
            px = eval_character(chi, x, space)
            py = eval_character(chi, y, space)
            total += px.as_complex() * py.as_complex().conjugate()
    return total
