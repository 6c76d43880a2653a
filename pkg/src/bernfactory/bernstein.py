"""Exact polynomials in Bernstein form.

A degree-n polynomial is stored through its *scaled* coefficients
s_k = C(n,k) c_k, kept as integer numerators over one common denominator.
In that representation

* degree elevation is convolution with a row of Pascal's triangle,
* multiplication is convolution,
* the sign of a Bernstein coefficient is the sign of its scaled numerator,

so every ring operation reduces to exact big-integer convolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ._exact import (
    binomial_row,
    ceil_div,
    common_denominator,
    convolve,
    horner_grid,
    power_enclosure,
    scaled_to_power,
)
from .errors import ArgumentError, DomainError, RangeViolation

Number = Fraction | int | str


def as_fraction(x: Number) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class DyadicRational:
    """mantissa / 2^exponent with the smallest possible exponent."""

    mantissa: int
    exponent: int

    def __post_init__(self):
        if self.exponent < 0:
            raise ArgumentError("dyadic exponent must be nonnegative")
        if self.exponent > 0 and self.mantissa % 2 == 0:
            raise ArgumentError("dyadic representation not reduced")

    @classmethod
    def from_fraction(cls, value: Number) -> "DyadicRational":
        value = as_fraction(value)
        den = value.denominator
        if den & (den - 1):
            raise ArgumentError(f"{value} is not dyadic")
        return cls(value.numerator, den.bit_length() - 1)

    def to_fraction(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.exponent)


class BernsteinPoly:
    """Immutable polynomial c_0..c_n in the degree-n Bernstein basis."""

    __slots__ = ("degree", "scaled", "den", "_mono", "_coeffs")

    def __init__(self, coeffs: Iterable[Number]):
        fr = [as_fraction(c) for c in coeffs]
        if not fr:
            raise ArgumentError("a Bernstein polynomial needs at least one coefficient")
        n = len(fr) - 1
        nums, den = common_denominator(fr)
        row = binomial_row(n)
        self._init(n, [a * b for a, b in zip(nums, row)], den)

    def _init(self, degree: int, scaled: Sequence[int], den: int) -> None:
        if den <= 0:
            raise ArgumentError("denominator must be positive")
        g = math.gcd(den, *scaled)
        if g > 1:
            scaled = [s // g for s in scaled]
            den //= g
        self.degree = degree
        self.scaled = tuple(scaled)
        self.den = den
        self._mono = None
        self._coeffs = None

    @classmethod
    def from_scaled(cls, degree: int, scaled: Sequence[int], den: int = 1) -> "BernsteinPoly":
        """Build from integers s_k with c_k = s_k / (den * C(n,k))."""
        if len(scaled) != degree + 1:
            raise ArgumentError(f"expected {degree + 1} scaled coefficients, got {len(scaled)}")
        obj = cls.__new__(cls)
        obj._init(degree, list(scaled), den)
        return obj

    @classmethod
    def constant(cls, c: Number, degree: int = 0) -> "BernsteinPoly":
        c = as_fraction(c)
        return cls.from_scaled(degree, [c.numerator * b for b in binomial_row(degree)], c.denominator)

    @classmethod
    def from_monomial(cls, coeffs: Sequence[Number], degree: int | None = None) -> "BernsteinPoly":
        """Convert Σ coeffs[i] x^i to Bernstein form of the given degree."""
        nums, den = common_denominator(coeffs)
        m = len(nums) - 1
        n = m if degree is None else degree
        if n < m:
            raise ArgumentError("degree below monomial degree")
        # x^i = x^i (x + (1-x))^(n-i) contributes C(n-i, k-i) to scaled index k
        scaled = [0] * (n + 1)
        for i, a in enumerate(nums):
            if a:
                for j, b in enumerate(binomial_row(n - i)):
                    scaled[i + j] += a * b
        return cls.from_scaled(n, scaled, den)

    @property
    def coeffs(self) -> tuple[Fraction, ...]:
        if self._coeffs is None:
            row = binomial_row(self.degree)
            self._coeffs = tuple(Fraction(s, self.den * b) for s, b in zip(self.scaled, row))
        return self._coeffs

    def scaled_fractions(self) -> list[Fraction]:
        return [Fraction(s, self.den) for s in self.scaled]

    def monomial(self) -> tuple[list[int], int]:
        """(a, d) with p(x) = Σ a[l] x^l / d; cached."""
        if self._mono is None:
            self._mono = (scaled_to_power(self.scaled), self.den)
        return self._mono

    def is_dyadic(self, level: int | None = None) -> bool:
        """Whether every scaled coefficient is a multiple of 2^-level."""
        level = self.degree if level is None else level
        return self.den & (self.den - 1) == 0 and self.den.bit_length() - 1 <= level

    def mantissas(self, level: int | None = None) -> list[int]:
        """Integers 2^level * C(n,k) * c_k; requires is_dyadic(level)."""
        level = self.degree if level is None else level
        if not self.is_dyadic(level):
            raise ArgumentError("polynomial is not dyadic at this level")
        shift = level - (self.den.bit_length() - 1)
        return [s << shift for s in self.scaled]

    def __call__(self, x: Number) -> Fraction:
        return evaluate(self, x)

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __neg__(self):
        return BernsteinPoly.from_scaled(self.degree, [-s for s in self.scaled], self.den)

    def __mul__(self, other):
        if isinstance(other, BernsteinPoly):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, BernsteinPoly):
            return NotImplemented
        return self.degree == other.degree and self.den == other.den and self.scaled == other.scaled

    def __hash__(self):
        return hash((self.degree, self.den, self.scaled))

    def __repr__(self):
        if self.degree <= 6:
            return f"BernsteinPoly({[str(c) for c in self.coeffs]})"
        return f"BernsteinPoly(degree={self.degree})"


def _coerce(x) -> BernsteinPoly:
    return x if isinstance(x, BernsteinPoly) else BernsteinPoly.constant(x)


def _check_unit(x: Fraction) -> None:
    if not 0 <= x <= 1:
        raise DomainError(f"x = {x} outside [0, 1]")


def evaluate(p: BernsteinPoly, x: Number) -> Fraction:
    """Exact value Σ c_k C(n,k) x^k (1-x)^(n-k)."""
    x = as_fraction(x)
    _check_unit(x)
    n = p.degree
    a, c = x.numerator, x.denominator - x.numerator
    if n <= 64:
        total = sum(s * a**k * c ** (n - k) for k, s in enumerate(p.scaled))
        return Fraction(total, p.den * x.denominator**n)
    vals, den = evaluate_grid(p, x.denominator, [x.numerator])
    return Fraction(vals[0], den)


def evaluate_grid(p: BernsteinPoly, denominator: int, numerators: Sequence[int]) -> tuple[list[int], int]:
    """Exact values at the points i/denominator as integers over one denominator.

    Goes through the monomial form once, then runs integer Horner with
    small multipliers at every point.
    """
    mono, d = p.monomial()
    M = denominator
    for i in numerators:
        if not 0 <= i <= M:
            raise DomainError(f"x = {i}/{M} outside [0, 1]")
    return horner_grid(mono, M, numerators), d * M**p.degree


def derivative(p: BernsteinPoly) -> BernsteinPoly:
    """p' in degree n-1 Bernstein form (the zero polynomial of degree 0 for constants)."""
    n = p.degree
    if n == 0:
        return BernsteinPoly.from_scaled(0, [0], 1)
    s = p.scaled
    return BernsteinPoly.from_scaled(n - 1, [(k + 1) * s[k + 1] - (n - k) * s[k] for k in range(n)], p.den)


def to_float_values(p: BernsteinPoly, xs) -> "np.ndarray":
    """Floating-point de Casteljau evaluation; diagnostics only."""
    xs = np.asarray(xs, dtype=float)
    b = np.array([float(c) for c in p.coeffs])[:, None] * np.ones((1, xs.size))
    for _ in range(p.degree):
        b = (1 - xs) * b[:-1] + xs * b[1:]
    return b[0]


def elevate(p: BernsteinPoly, m: int) -> BernsteinPoly:
    if m < p.degree:
        raise ArgumentError(f"cannot elevate degree {p.degree} to {m}")
    if m == p.degree:
        return p
    return BernsteinPoly.from_scaled(m, convolve(p.scaled, binomial_row(m - p.degree)), p.den)


def _common(p: BernsteinPoly, q: BernsteinPoly):
    n = max(p.degree, q.degree)
    p, q = elevate(p, n), elevate(q, n)
    den = math.lcm(p.den, q.den)
    fp, fq = den // p.den, den // q.den
    return n, [s * fp for s in p.scaled], [s * fq for s in q.scaled], den


def add(p: BernsteinPoly, q: BernsteinPoly) -> BernsteinPoly:
    n, sp, sq, den = _common(p, q)
    return BernsteinPoly.from_scaled(n, [a + b for a, b in zip(sp, sq)], den)


def sub(p: BernsteinPoly, q: BernsteinPoly) -> BernsteinPoly:
    n, sp, sq, den = _common(p, q)
    return BernsteinPoly.from_scaled(n, [a - b for a, b in zip(sp, sq)], den)


def scale(p: BernsteinPoly, c: Number) -> BernsteinPoly:
    c = as_fraction(c)
    return BernsteinPoly.from_scaled(p.degree, [s * c.numerator for s in p.scaled], p.den * c.denominator)


def mul(p: BernsteinPoly, q: BernsteinPoly) -> BernsteinPoly:
    return BernsteinPoly.from_scaled(p.degree + q.degree, convolve(p.scaled, q.scaled), p.den * q.den)


def leq_order(q: BernsteinPoly, r: BernsteinPoly, n: int) -> bool:
    """True iff r - q has only nonnegative degree-n Bernstein coefficients."""
    if n < max(q.degree, r.degree):
        raise ArgumentError("order degree below operand degree")
    return all(s >= 0 for s in elevate(sub(r, q), n).scaled)


def bernstein_op(samples: Sequence[Number], n: int) -> BernsteinPoly:
    """B_n f from the samples f(k/n), k = 0..n."""
    if len(samples) != n + 1:
        raise ArgumentError(f"need {n + 1} samples for degree {n}, got {len(samples)}")
    return BernsteinPoly(samples)


def default_slack(level: int) -> Fraction:
    return Fraction(1, 1 << level) * 4


@dataclass(frozen=True)
class EnvelopePair:
    """Lower/upper polynomials g, h of a common degree (the level)."""

    level: int
    lower: BernsteinPoly
    upper: BernsteinPoly
    kind: str = "raw"

    def __post_init__(self):
        if self.lower.degree != self.level or self.upper.degree != self.level:
            raise ArgumentError("envelope polynomials must have the level as degree")
        if self.kind not in ("raw", "filled-in", "dyadic"):
            raise ArgumentError(f"unknown envelope kind {self.kind!r}")

    def gap(self) -> BernsteinPoly:
        return sub(self.upper, self.lower)

    def is_dyadic(self) -> bool:
        return self.lower.is_dyadic(self.level) and self.upper.is_dyadic(self.level)


def round_dyadic(env: EnvelopePair, slack: Number | None = None) -> EnvelopePair:
    """Round g down and h up to multiples of 2^-n in scaled form, after moving each by slack."""
    n = env.level
    slack = default_slack(n) if slack is None else as_fraction(slack)
    if slack < 0:
        raise ArgumentError("slack must be nonnegative")
    row = binomial_row(n)
    unit = 1 << n
    lo, hi = [], []
    for k in range(n + 1):
        # C(n,k)(a - slack) and C(n,k)(b + slack) over the lcm denominator
        a = Fraction(env.lower.scaled[k], env.lower.den) - slack * row[k]
        b = Fraction(env.upper.scaled[k], env.upper.den) + slack * row[k]
        ma = (a.numerator * unit) // a.denominator
        mb = ceil_div(b.numerator * unit, b.denominator)
        if ma < 0:
            raise RangeViolation(f"rounded lower coefficient negative at level {n}, k={k}")
        if mb > row[k] * unit:
            raise RangeViolation(f"rounded upper coefficient above 1 at level {n}, k={k}")
        lo.append(ma)
        hi.append(mb)
    return EnvelopePair(
        n,
        BernsteinPoly.from_scaled(n, lo, unit),
        BernsteinPoly.from_scaled(n, hi, unit),
        "dyadic",
    )


def delta_n(x: Number, n: int, bits: int = 64) -> tuple[Fraction, Fraction]:
    """Rational enclosure of max(sqrt(x(1-x)/n), 1/n) of width at most 2^-bits."""
    x = as_fraction(x)
    _check_unit(x)
    if n < 1:
        raise ArgumentError("n must be positive")
    v = x * (1 - x) / n
    floor_val = Fraction(1, n)
    if v <= floor_val * floor_val:
        return floor_val, floor_val
    rn, rd = math.isqrt(v.numerator), math.isqrt(v.denominator)
    if rn * rn == v.numerator and rd * rd == v.denominator:
        root = Fraction(rn, rd)
        return root, root
    lo, hi = power_enclosure(v, Fraction(1, 2), bits)
    scale_ = 1 << bits
    return max(Fraction(lo, scale_), floor_val), max(Fraction(hi, scale_), floor_val)


def poly_to_json(p: BernsteinPoly, dyadic: bool = False) -> dict:
    out = {
        "degree": p.degree,
        "coeffs": [f"{c.numerator}/{c.denominator}" for c in p.coeffs],
    }
    if dyadic:
        out["exponent"] = p.degree
        out["mantissas"] = [str(m) for m in p.mantissas()]
    return out


def poly_from_json(obj: dict) -> BernsteinPoly:
    try:
        n = int(obj["degree"])
        if "mantissas" in obj:
            e = int(obj["exponent"])
            p = BernsteinPoly.from_scaled(n, [int(m) for m in obj["mantissas"]], 1 << e)
            if "coeffs" in obj and len(obj["coeffs"]) != n + 1:
                raise ArgumentError("coefficient count disagrees with degree")
            return p
        coeffs = [Fraction(c) for c in obj["coeffs"]]
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ArgumentError(f"malformed polynomial record: {exc}") from exc
    if len(coeffs) != n + 1:
        raise ArgumentError("coefficient count disagrees with degree")
    return BernsteinPoly(coeffs)
