"""Central moments, correction polynomials and the Lorentz operator Q_{n,r}.

Both T_nj and τ_j are computed once symbolically in (x, n) and then
specialised to a numeric n.  A symbolic polynomial is a dict mapping
(power of x, power of n) to a Fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from ._exact import binomial_row, lcm_all
from .bernstein import BernsteinPoly, as_fraction, derivative, evaluate_grid, to_float_values
from .errors import ArgumentError, PrecisionError

BiPoly = dict[tuple[int, int], Fraction]


def _bi_add(p: BiPoly, q: BiPoly, c: Fraction = Fraction(1)) -> BiPoly:
    out = dict(p)
    for key, v in q.items():
        out[key] = out.get(key, 0) + c * v
        if out[key] == 0:
            del out[key]
    return out


def _bi_mul(p: BiPoly, q: BiPoly) -> BiPoly:
    out: BiPoly = {}
    for (i1, e1), v1 in p.items():
        for (i2, e2), v2 in q.items():
            key = (i1 + i2, e1 + e2)
            out[key] = out.get(key, 0) + v1 * v2
    return {k: v for k, v in out.items() if v != 0}


def _bi_dx(p: BiPoly) -> BiPoly:
    return {(i - 1, e): i * v for (i, e), v in p.items() if i > 0}


_X_ONE_MINUS_X: BiPoly = {(1, 0): Fraction(1), (2, 0): Fraction(-1)}


@lru_cache(maxsize=None)
def moment_symbolic(j: int) -> BiPoly:
    """T_nj as a polynomial in (x, n) via T_{j+1} = x(1-x)(T_j' + n j T_{j-1})."""
    if j < 0:
        raise ArgumentError("moment order must be nonnegative")
    if j == 0:
        return {(0, 0): Fraction(1)}
    if j == 1:
        return {}
    prev, prev2 = moment_symbolic(j - 1), moment_symbolic(j - 2)
    inner = _bi_add(_bi_dx(prev), {(i, e + 1): (j - 1) * v for (i, e), v in prev2.items()})
    return _bi_mul(_X_ONE_MINUS_X, inner)


@lru_cache(maxsize=None)
def tau_symbolic(j: int) -> BiPoly:
    """τ_j(x, n) = -Σ_{l=2..j} T_nl τ_{j-l} / l!, with τ_0 = 1 and τ_1 = 0."""
    if j < 0:
        raise ArgumentError("order must be nonnegative")
    if j == 0:
        return {(0, 0): Fraction(1)}
    out: BiPoly = {}
    for l in range(2, j + 1):
        out = _bi_add(out, _bi_mul(moment_symbolic(l), tau_symbolic(j - l)), Fraction(-1, math.factorial(l)))
    return out


def _specialise(p: BiPoly, n: Fraction) -> tuple[Fraction, ...]:
    deg = max((i for i, _ in p), default=0)
    out = [Fraction(0)] * (deg + 1)
    for (i, e), v in p.items():
        out[i] += v * n**e
    return tuple(out)


def degree_in_x(p: BiPoly) -> int:
    return max((i for i, _ in p), default=-1)


def degree_in_n(p: BiPoly) -> int:
    return max((e for _, e in p), default=-1)


@dataclass(frozen=True)
class MomentPoly:
    """T_nj(x) = Σ_k (k - n x)^j p_nk(x) with monomial coefficients in x."""

    n: int
    j: int
    coeffs: tuple[Fraction, ...]

    def __call__(self, x) -> Fraction:
        x = as_fraction(x)
        return sum((c * x**i for i, c in enumerate(self.coeffs)), Fraction(0))


@dataclass(frozen=True)
class TauPoly:
    j: int
    n: int
    coeffs: tuple[Fraction, ...]

    def __call__(self, x) -> Fraction:
        x = as_fraction(x)
        return sum((c * x**i for i, c in enumerate(self.coeffs)), Fraction(0))

    def bernstein(self, degree: int | None = None) -> BernsteinPoly:
        """τ_j in Bernstein form; degree defaults to j."""
        degree = self.j if degree is None else degree
        return BernsteinPoly.from_monomial(list(self.coeffs), degree=max(degree, len(self.coeffs) - 1))

    def homogeneous(self) -> list[Fraction]:
        """a_i with τ_j = Σ a_i x^i (1-x)^(j-i)."""
        return self.bernstein(self.j).scaled_fractions()


@lru_cache(maxsize=4096)
def moment_poly(n: int, j: int) -> MomentPoly:
    if n < 1:
        raise ArgumentError("n must be positive")
    return MomentPoly(n, j, _specialise(moment_symbolic(j), Fraction(n)))


@lru_cache(maxsize=4096)
def tau_poly(j: int, n: int) -> TauPoly:
    if n < 1:
        raise ArgumentError("n must be positive")
    return TauPoly(j, n, _specialise(tau_symbolic(j), Fraction(n)))


def moment_direct(n: int, j: int) -> tuple[Fraction, ...]:
    """Monomial coefficients of Σ_k (k - n x)^j C(n,k) x^k (1-x)^(n-k) by brute expansion."""
    total = [Fraction(0)] * (n + j + 1)
    row = binomial_row(n)
    for k in range(n + 1):
        # (k - n x)^j
        lin = [Fraction(1)]
        for _ in range(j):
            lin = _poly_mul(lin, [Fraction(k), Fraction(-n)])
        basis = [Fraction(0)] * k + [Fraction(1)]
        for _ in range(n - k):
            basis = _poly_mul(basis, [Fraction(1), Fraction(-1)])
        term = _poly_mul(lin, basis)
        for i, c in enumerate(term):
            total[i] += row[k] * c
    while len(total) > 1 and total[-1] == 0:
        total.pop()
    return tuple(total)


def _poly_mul(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


class DerivativeOracle(Protocol):
    """Values of f^(j) at rationals for j <= order."""

    order: int

    def interval(self, x: Fraction, j: int, bits: int) -> tuple[Fraction, Fraction]:
        ...

    def samples(self, n: int, j: int, bits: int) -> list[Fraction]:
        """f^(j)(k/n), k = 0..n: exact when the value has denominator at most 2^bits,
        otherwise within 2^-bits of the true value."""
        ...


def samples_from_intervals(oracle: DerivativeOracle, n: int, j: int, bits: int) -> list[Fraction]:
    """Generic sampling through interval refinement."""
    limit = 1 << bits
    out = []
    for k in range(n + 1):
        lo, hi = oracle.interval(Fraction(k, n), j, bits + 2)
        if lo == hi and lo.denominator <= limit:
            out.append(lo)
        else:
            if hi - lo > Fraction(1, limit):
                raise PrecisionError(f"oracle interval too wide at k={k}, j={j}")
            mid = (lo + hi) / 2
            out.append(Fraction(round(mid * limit), limit))
    return out


def _round_or_exact(value: Fraction, bits: int) -> Fraction:
    limit = 1 << bits
    if value.denominator <= limit:
        return value
    return Fraction(round(value * limit), limit)


class PolyOracle:
    """Exact derivative oracle of a stored polynomial."""

    def __init__(self, poly: BernsteinPoly, order: int):
        self.poly = poly
        self.order = order
        self._derivs = [poly]
        for _ in range(order):
            self._derivs.append(derivative(self._derivs[-1]))

    def interval(self, x, j, bits):
        v = self._derivs[j](x)
        return v, v

    def samples(self, n: int, j: int, bits: int) -> list[Fraction]:
        vals, den = evaluate_grid(self._derivs[j], n, range(n + 1))
        return [_round_or_exact(Fraction(v, den), bits) for v in vals]


class DifferenceOracle:
    """Derivatives of f - p for an oracle f and a stored polynomial p."""

    def __init__(self, target: DerivativeOracle, poly: BernsteinPoly):
        self.target = target
        self.order = target.order
        self.poly = PolyOracle(poly, target.order)

    def interval(self, x, j, bits):
        lo, hi = self.target.interval(x, j, bits)
        v, _ = self.poly.interval(x, j, bits)
        return lo - v, hi - v

    def samples(self, n, j, bits):
        f = self.target.samples(n, j, bits)
        p = self.poly.samples(n, j, bits)
        return [_round_or_exact(a - b, bits) for a, b in zip(f, p)]


def lorentz_apply(oracle: DerivativeOracle, n: int, r: int, bits: int = 64) -> BernsteinPoly:
    """Q_{n,r} f in degree n + r Bernstein form.

    Each coefficient function Σ_j f^(j)(k/n) n^-j τ_j(x, n) is a degree-r
    polynomial; writing it in degree-r Bernstein form and multiplying by
    p_nk gives the output through the product rule of scaled coefficients.
    The output is exact when the oracle samples are; otherwise every
    sample carries an error of at most 2^-bits.
    """
    if n < 1 or r < 0:
        raise ArgumentError("need n >= 1 and r >= 0")
    if oracle.order < r:
        raise ArgumentError(f"oracle supports derivatives to order {oracle.order}, need {r}")
    taus = [tau_poly(j, n).bernstein(r) for j in range(r + 1)]
    tau_den = lcm_all([t.den for t in taus])
    tau_int = [[s * (tau_den // t.den) for s in t.scaled] for t in taus]
    samples = [oracle.samples(n, j, bits) for j in range(r + 1)]
    sample_den = lcm_all([v.denominator for col in samples for v in col])
    s_int = [[v.numerator * (sample_den // v.denominator) for v in col] for col in samples]
    npow = [n ** (r - j) for j in range(r + 1)]
    row = binomial_row(n)
    out = [0] * (n + r + 1)
    for k in range(n + 1):
        for i in range(r + 1):
            w = 0
            for j in range(r + 1):
                t = tau_int[j][i]
                if t:
                    w += s_int[j][k] * npow[j] * t
            out[k + i] += row[k] * w
    return BernsteinPoly.from_scaled(n + r, out, sample_den * tau_den * n**r)


def _delta_float(xs: np.ndarray, n: int) -> np.ndarray:
    return np.maximum(np.sqrt(xs * (1 - xs) / n), 1.0 / n)


@dataclass
class CoefficientBoundRow:
    n: int
    j: int
    coefficient_ratio: float
    sup_ratio: float


def coefficient_bound_report(ns: Sequence[int], j: int, grid: int = 512) -> list[CoefficientBoundRow]:
    """max_i |a_i(n,j)| / n^i and sup_x |τ_j(x,n)| / (n Δ_n(x))^j over a sweep of n."""
    xs = np.linspace(0.0, 1.0, grid)
    rows = []
    for n in ns:
        tau = tau_poly(j, n)
        a = tau.homogeneous()
        coef = max(abs(float(c)) / float(n) ** i for i, c in enumerate(a))
        vals = np.polynomial.polynomial.polyval(xs, [float(c) for c in tau.coeffs])
        sup = float(np.max(np.abs(vals) / (n * _delta_float(xs, n)) ** j))
        rows.append(CoefficientBoundRow(n, j, coef, sup))
    return rows


def _float_derivative_values(p: BernsteinPoly, order: int, xs: np.ndarray) -> np.ndarray:
    for _ in range(order):
        p = derivative(p)
    return to_float_values(p, xs)


def simultaneous_approximation_ratio(
    oracle: DerivativeOracle, alpha: Fraction, n: int, r: int, j: int, grid: int = 512
) -> float:
    """sup_x |(Q_{n,r} f - f)^(j)(x)| / Δ_n(x)^(α - j) on a float grid."""
    xs = np.linspace(0.0, 1.0, grid)
    q = lorentz_apply(oracle, n, r)
    qv = _float_derivative_values(q, j, xs)
    fv = np.array([float(sum(oracle.interval(Fraction(x), j, 60)) / 2) for x in xs])
    return float(np.max(np.abs(qv - fv) / _delta_float(xs, n) ** (float(alpha) - j)))


def derivative_bound_ratio(oracle: DerivativeOracle, alpha: Fraction, n: int, r: int, grid: int = 512) -> float:
    """sup_x |(Q_{n,r} f)^(r+1)(x)| Δ_n(x)^(r+1-α) on a float grid."""
    xs = np.linspace(0.0, 1.0, grid)
    q = lorentz_apply(oracle, n, r)
    qv = _float_derivative_values(q, r + 1, xs)
    return float(np.max(np.abs(qv) * _delta_float(xs, n) ** (r + 1 - float(alpha))))
