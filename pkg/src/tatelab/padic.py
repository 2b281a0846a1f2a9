"""Exact arithmetic on finite quotients of the p-adic Tate curve.

The space X(p, m, d) is the unit group of Q_p modulo p^m and modulo
1 + p^d Z_p.  Its points are p^l (b_0 + b_1 p + ... + b_{d-1} p^{d-1})
with level l in [0, m-1], leading digit b_0 in [1, p-1] and later
digits in [0, p-1].  Everything in this module is computed with
arbitrary-precision integers and `fractions.Fraction`; floating point
only enters downstream when matrices are assembled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

#: Sentinel for the valuation of zero (x - x).
INFINITE_VALUATION = math.inf


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class QuotientSpace:
    """Parameters (p, m, d) of the finite quotient X_{m,d}.

    p must be prime, m >= 1 counts the levels of the fundamental domain,
    d >= 1 is the digit truncation depth.
    """

    p: int
    m: int
    d: int

    def __post_init__(self) -> None:
        if not is_prime(self.p):
            raise ValueError(f"p = {self.p} is not prime")
        if self.m < 1:
            raise ValueError(f"m = {self.m} must be >= 1")
        if self.d < 1:
            raise ValueError(f"d = {self.d} must be >= 1")

    @property
    def n_points(self) -> int:
        return self.m * (self.p - 1) * self.p ** (self.d - 1)

    @property
    def atom_measure(self) -> Fraction:
        """Haar mass of a single point, p^{-d} independent of level."""
        return Fraction(1, self.p ** self.d)

    @property
    def volume(self) -> Fraction:
        """Total Haar volume m (1 - 1/p)."""
        return Fraction(self.m) * (1 - Fraction(1, self.p))


@dataclass(frozen=True)
class QuotientPoint:
    """A point p^level (b_0 + b_1 p + ...), stored as level plus digits."""

    level: int
    digits: tuple[int, ...]

    def unit_part(self, p: int) -> int:
        """The unit b_0 + b_1 p + ... + b_{d-1} p^{d-1} as an integer."""
        u = 0
        for b in reversed(self.digits):
            u = u * p + b
        return u

    def representative(self, p: int) -> int:
        """The canonical integer representative p^level * unit_part."""
        return p ** self.level * self.unit_part(p)

    def norm(self, p: int) -> Fraction:
        """|x|_p = p^{-level}."""
        return Fraction(1, p ** self.level)


def validate_point(x: QuotientPoint, space: QuotientSpace) -> None:
    p, m, d = space.p, space.m, space.d
    if not 0 <= x.level < m:
        raise ValueError(f"level {x.level} outside [0, {m - 1}]")
    if len(x.digits) != d:
        raise ValueError(f"expected {d} digits, got {len(x.digits)}")
    if not 1 <= x.digits[0] <= p - 1:
        raise ValueError(f"leading digit {x.digits[0]} outside [1, {p - 1}]")
    for b in x.digits[1:]:
        if not 0 <= b <= p - 1:
            raise ValueError(f"digit {b} outside [0, {p - 1}]")


def enumerate_points(space: QuotientSpace) -> list[QuotientPoint]:
    """All points of the space, lexicographic by (level, b_0, ..., b_{d-1}).

    This ordering is the index convention for every matrix downstream:
    row/column i of the Laplacian corresponds to the i-th point here.
    """
    p, m, d = space.p, space.m, space.d
    points = []
    for level in range(m):
        digits = [1] + [0] * (d - 1)
        while True:
            points.append(QuotientPoint(level, tuple(digits)))
            # odometer increment, least significant digit last
            i = d - 1
            while i >= 0:
                digits[i] += 1
                if digits[i] <= p - 1:
                    break
                digits[i] = 1 if i == 0 else 0
                i -= 1
            else:
                break
    assert len(points) == space.n_points
    return points


def point_index(space: QuotientSpace) -> dict[QuotientPoint, int]:
    return {x: i for i, x in enumerate(enumerate_points(space))}


def int_valuation(n: int, p: int) -> int | float:
    """v_p(n) for an integer n; infinity for n = 0."""
    if n == 0:
        return INFINITE_VALUATION
    n = abs(n)
    v = 0
    while n % p == 0:
        v += 1
        n //= p
    return v


def diff_valuation(x: QuotientPoint, y: QuotientPoint,
                   space: QuotientSpace) -> int | float:
    """v_p(x - y) on the canonical representatives; +inf iff x == y."""
    if x == y:
        return INFINITE_VALUATION
    p = space.p
    return int_valuation(x.representative(p) - y.representative(p), p)


def distance_valuation(x: QuotientPoint, y: QuotientPoint,
                       space: QuotientSpace) -> int:
    """M with d(x, y) = p^{-M}, where d(x,y) = |x-y|_p / max(|x|_p, |y|_p).

    M = v_p(x - y) - min(levels); zero whenever the levels differ.
    """
    if x == y:
        raise ValueError("distance undefined on diagonal")
    v = diff_valuation(x, y, space)
    return int(v) - min(x.level, y.level)


def kernel_weight(x: QuotientPoint, y: QuotientPoint,
                  space: QuotientSpace) -> Fraction:
    """The Laplacian weight |x|_p |y|_p / |x - y|_p^2, an exact power of p."""
    if x == y:
        raise ValueError("kernel weight undefined on diagonal")
    v = diff_valuation(x, y, space)
    exponent = 2 * int(v) - x.level - y.level
    return Fraction(space.p) ** exponent


def _log_series_cutoff(k: int, p: int) -> int:
    # smallest J such that v_p(t^j / j) >= j - floor(log_p j) >= k for all
    # j > J; the bound j - floor(log_p j) is nondecreasing in j
    j = 1
    while (j + 1) - _ilog(j + 1, p) < k:
        j += 1
    return j


def _ilog(n: int, p: int) -> int:
    v = 0
    while p ** (v + 1) <= n:
        v += 1
    return v


def padic_log_unit(u_digits: Sequence[int], k: int, p: int) -> int:
    """ln(u) mod p^k for a unit u = 1 + b_1 p + ... given by its digits.

    Evaluates the alternating series sum (-1)^{j+1} t^j / j with t = u - 1
    in exact rationals, truncated once all remaining terms have valuation
    >= k.  Requires p >= 3: for p = 2 the unit group 1 + 2 Z_2 is not
    isomorphic to Z_2 via the exponential and the series does not converge
    on all of it.
    """
    if p == 2:
        raise ValueError("dyadic log unsupported")
    if not is_prime(p):
        raise ValueError(f"p = {p} is not prime")
    if k < 1:
        raise ValueError("precision k must be >= 1")
    if k > len(u_digits):
        raise ValueError(f"precision {k} exceeds available digits {len(u_digits)}")
    if u_digits[0] != 1:
        raise ValueError("argument must be congruent to 1 mod p")
    pk = p ** k
    u = 0
    for b in reversed(u_digits[:k]):
        u = u * p + b
    t = (u - 1) % pk
    if t == 0:
        return 0
    total = Fraction(0)
    tj = 1
    for j in range(1, _log_series_cutoff(k, p) + 1):
        tj *= t
        term = Fraction(tj, j)
        total += term if j % 2 == 1 else -term
    # lowest-terms denominator is coprime to p because the sum has v_p >= 1
    result = total.numerator * pow(total.denominator, -1, pk) % pk
    assert result % p == 0, "p-adic log of a principal unit has valuation >= 1"
    return result


@lru_cache(maxsize=None)
def primitive_root(p: int) -> int:
    """Smallest primitive root mod p (deterministic choice)."""
    if p == 2:
        return 1
    order = p - 1
    factors = set()
    n, f = order, 2
    while f * f <= n:
        while n % f == 0:
            factors.add(f)
            n //= f
        f += 1
    if n > 1:
        factors.add(n)
    for g in range(2, p):
        if all(pow(g, order // q, p) != 1 for q in factors):
            return g
    raise ArithmeticError(f"no primitive root found for {p}")


@lru_cache(maxsize=None)
def _dlog_table(p: int) -> dict[int, int]:
    g = primitive_root(p)
    table = {}
    acc = 1
    for e in range(p - 1):
        table[acc] = e
        acc = acc * g % p
    return table


def discrete_log(a0: int, p: int) -> int:
    """ord(a0): the exponent with g^ord = a0 mod p, g the smallest
    primitive root.  For p = 2 the group is trivial and ord is 0."""
    if a0 % p == 0:
        raise ValueError(f"{a0} is not a unit mod {p}")
    if p == 2:
        return 0
    return _dlog_table(p)[a0 % p]


def fractional_part(num: int, den: int) -> Fraction:
    """The p-adic fractional part {num/den}_p in [0, 1), den a power of p."""
    if den < 1:
        raise ValueError("denominator must be a positive power of p")
    return Fraction(num % den, den)


def primitive_root_mod_power(p: int, k: int) -> int:
    """A generator of (Z/p^k)^* for odd p; the unit 3 for p = 2.

    For p = 2 the group is not cyclic (k >= 3) and 3 merely generates a
    large subgroup; multiplication by it is still an isometry of the
    quotient, which is all the symmetry lemmas need.
    """
    if p == 2:
        return 3 if k >= 2 else 1
    g = primitive_root(p)
    if pow(g, p - 1, p * p) == 1:
        g += p
    return g


def parse_point(text: str, space: QuotientSpace) -> QuotientPoint:
    """Parse the CLI point format "l:b0,b1,...,b_{d-1}"."""
    try:
        level_str, digit_str = text.split(":")
        level = int(level_str)
        digits = tuple(int(b) for b in digit_str.split(","))
    except ValueError as exc:
        raise ValueError(f"malformed point {text!r}, expected 'l:b0,b1,...'") from exc
    x = QuotientPoint(level, digits)
    validate_point(x, space)
    return x


def format_point(x: QuotientPoint) -> str:
    return f"{x.level}:" + ",".join(str(b) for b in x.digits)
