"""A target approximable from the Bernstein-positive cone at rate n^(-α/2)
whose Hölder-α seminorm nevertheless diverges.

Building blocks are periodised Gaussians

    f_{h,m}(x) = h Σ_k exp(-π m (x - k h/√m)^2)
               = Σ_l exp(-π l^2 / h^2) cos(2π l x √m / h),

summed over m = 2^j with weights (log2 m)^-2 and h_m chosen so that
exp(-π/h_m^2) (log2 m)^-2 = m^(-α/2).  Everything here is high-precision
floating point (mpmath); the construction is a demonstration, not a
certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
from mpmath import mpf

from .bernstein import as_fraction
from .errors import ArgumentError, EmptyConstructionError, PrecisionError
from .target import SeminormEstimate

DEFAULT_DPS = 30
_MAX_TERMS = 10**6


def taylor_exp_neg_sq(degree: int) -> list[Fraction]:
    """Monomial coefficients of the degree-2n Taylor polynomial of exp(-x^2)."""
    if degree < 2 or degree % 2:
        raise ArgumentError("degree must be a positive even number")
    out = [Fraction(0)] * (degree + 1)
    for k in range(degree // 2 + 1):
        out[2 * k] = Fraction((-1) ** k, math.factorial(k))
    return out


def _poly_eval(coeffs, z):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def taylor_disc_error(n: int, samples: int = 64, dps: int = DEFAULT_DPS) -> float:
    """max |exp(-z^2) - P_2n(z)| over sample points of the circle |z| = √n/e."""
    coeffs = taylor_exp_neg_sq(2 * n)
    with mpmath.workdps(dps + n):
        mc = [mpf(c.numerator) / c.denominator for c in coeffs]
        radius = mpmath.sqrt(n) / mpmath.e
        worst = mpf(0)
        for i in range(samples):
            z = radius * mpmath.expj(2 * mpmath.pi * i / samples)
            worst = max(worst, abs(mpmath.exp(-z * z) - _poly_eval(mc, z)))
        return float(worst)


def taylor_min_on_disc_diameter(n: int, points: int = 512) -> float:
    """Smallest value of P_2n on the real segment [-√n/e, √n/e]."""
    coeffs = taylor_exp_neg_sq(2 * n)
    with mpmath.workdps(DEFAULT_DPS + n):
        mc = [mpf(c.numerator) / c.denominator for c in coeffs]
        radius = mpmath.sqrt(n) / mpmath.e
        xs = [-radius + 2 * radius * i / (points - 1) for i in range(points)]
        return float(min(_poly_eval(mc, x) for x in xs))


def _check_hm(h, m) -> None:
    if not 0 < h < 1:
        raise ArgumentError("h must lie in (0, 1)")
    if m < 1:
        raise ArgumentError("m must be a positive integer")


def _tolerance(dps: int) -> mpf:
    return mpf(10) ** (-dps - 3)


def theta_fourier(h, m: int, x, dps: int = DEFAULT_DPS) -> mpf:
    """Σ_l exp(-π l^2/h^2) cos(2π l x √m/h), truncated once the tail bound is below 10^-dps."""
    _check_hm(h, m)
    extra = len(str(m)) // 2 + 5
    with mpmath.workdps(dps + extra):
        h, x = mpf(h), mpf(x)
        q = mpmath.exp(-mpmath.pi / (h * h))
        freq = 2 * mpmath.pi * x * mpmath.sqrt(m) / h
        tol = _tolerance(dps)
        total = mpf(1)
        for l in range(1, _MAX_TERMS):
            # remaining terms are bounded by 2 q^((l+1)^2) / (1 - q)
            total += 2 * q ** (l * l) * mpmath.cos(l * freq)
            if 2 * q ** ((l + 1) ** 2) / (1 - q) < tol:
                return +total
    raise PrecisionError("Fourier series did not reach the requested precision")


def theta_spatial(h, m: int, x, dps: int = DEFAULT_DPS) -> mpf:
    """h Σ_k exp(-π h^2 (k - x√m/h)^2), summed outward from the peak."""
    _check_hm(h, m)
    extra = len(str(m)) // 2 + 5
    with mpmath.workdps(dps + extra):
        h, x = mpf(h), mpf(x)
        c = x * mpmath.sqrt(m) / h
        base = int(mpmath.floor(c))
        a = mpmath.pi * h * h
        tol = _tolerance(dps)
        total = mpf(0)
        for j in range(_MAX_TERMS):
            for k in {base - j, base + 1 + j}:
                total += mpmath.exp(-a * (k - c) ** 2)
            # every omitted term sits at distance >= j + 1 from the peak
            if 2 * mpmath.exp(-a * (j + 1) ** 2) / (1 - mpmath.exp(-2 * a * (j + 1))) < tol:
                return h * total
    raise PrecisionError("spatial sum did not reach the requested precision")


def theta_target(h, m: int, x, precision: int = DEFAULT_DPS, cross_check: bool = True) -> mpf:
    """f_{h,m}(x) from the Fourier side, optionally verified against the spatial sum."""
    value = theta_fourier(h, m, x, precision)
    if cross_check:
        other = theta_spatial(h, m, x, precision)
        if abs(value - other) > mpf(10) ** (-precision + 2):
            raise PrecisionError(f"representations disagree by {mpmath.nstr(abs(value - other), 5)}")
    return value


@dataclass(frozen=True)
class ShiftedGaussianMixture:
    h: mpf
    m: int

    def __post_init__(self):
        _check_hm(self.h, self.m)

    def __call__(self, x, dps: int = DEFAULT_DPS) -> mpf:
        return theta_fourier(self.h, self.m, x, dps)

    def spatial(self, x, dps: int = DEFAULT_DPS) -> mpf:
        return theta_spatial(self.h, self.m, x, dps)

    def deviation_bound(self) -> mpf:
        return 4 * mpmath.exp(-mpmath.pi / (mpf(self.h) ** 2))

    def atoms(self, radius=2) -> list[mpf]:
        step = mpf(self.h) / mpmath.sqrt(self.m)
        kmax = int(mpmath.floor(radius / step))
        return [k * step for k in range(-kmax, kmax + 1)]


def _log2_int(m: int) -> int:
    if m < 1 or m & (m - 1):
        raise ArgumentError(f"{m} is not a power of 2")
    return m.bit_length() - 1


def _schedule_denominator(alpha, j: int) -> mpf:
    return mpf(alpha) / 2 * j * mpmath.log(2) - 2 * mpmath.log(j)


def schedule_h(alpha, m: int) -> mpf | None:
    """h_m = sqrt(π / ((α/2) ln m - 2 ln log2 m)), or None when that is not in (0, 1)."""
    j = _log2_int(m)
    if j < 2:
        return None
    with mpmath.workdps(DEFAULT_DPS + 10):
        den = _schedule_denominator(_alpha_mpf(alpha), j)
        if den <= mpmath.pi:
            return None
        return mpmath.sqrt(mpmath.pi / den)


def _alpha_mpf(alpha) -> mpf:
    a = as_fraction(alpha)
    return mpf(a.numerator) / a.denominator


def m0(alpha, max_log: int = 1 << 20) -> int:
    """Smallest power of 2 (at least 4) with a well-defined h_m in (0, 1)."""
    a = as_fraction(alpha)
    if not 0 < a < 1:
        raise ArgumentError("alpha must lie in (0, 1)")
    for j in range(2, max_log):
        if schedule_h(a, 1 << j) is not None:
            return 1 << j
    raise EmptyConstructionError("no admissible scale below the search limit")


@dataclass
class Counterexample:
    alpha: Fraction
    m_max: int
    scales: list[int]
    h: dict[int, mpf]
    dps: int = DEFAULT_DPS

    def weight(self, m: int) -> Fraction:
        return Fraction(1, _log2_int(m) ** 2)

    def component(self, m: int) -> ShiftedGaussianMixture:
        return ShiftedGaussianMixture(self.h[m], m)

    def __call__(self, x) -> mpf:
        with mpmath.workdps(self.dps):
            return sum(
                (_frac(self.weight(m)) * theta_fourier(self.h[m], m, x, self.dps) for m in self.scales), mpf(0)
            )

    def approximant(self, n: int, x) -> mpf:
        """g_n: components with m <= n kept, the rest replaced by their mean value 1."""
        with mpmath.workdps(self.dps):
            total = mpf(0)
            for m in self.scales:
                w = _frac(self.weight(m))
                total += w * theta_fourier(self.h[m], m, x, self.dps) if m <= n else w
            return total

    def tail_deviation(self, n: int, x) -> mpf:
        """f - g_n, summed directly so nothing cancels."""
        with mpmath.workdps(self.dps):
            return sum(
                (_frac(self.weight(m)) * (theta_fourier(self.h[m], m, x, self.dps) - 1) for m in self.scales if m > n),
                mpf(0),
            )

    def sup_norm(self, points: int = 1024) -> mpf:
        return max(abs(self(x)) for x in _sym_grid(points))

    def probe(self, m: int) -> mpf:
        return self.h[m] / (2 * mpmath.sqrt(m))


def _frac(x: Fraction) -> mpf:
    return mpf(x.numerator) / x.denominator


def _sym_grid(points: int) -> list[mpf]:
    return [mpf(-1) + mpf(2) * i / (points - 1) for i in range(points)]


def build_counterexample(alpha, m_max: int, dps: int = DEFAULT_DPS) -> Counterexample:
    a = as_fraction(alpha)
    if not 0 < a < 1:
        raise ArgumentError("alpha must lie in (0, 1)")
    top = _log2_int(m_max)
    start = m0(a)
    if m_max < start:
        raise EmptyConstructionError(
            f"m_max = 2^{top} is below the first admissible scale m0 = 2^{_log2_int(start)}"
        )
    scales = [1 << j for j in range(_log2_int(start), top + 1)]
    return Counterexample(a, m_max, scales, {m: schedule_h(a, m) for m in scales}, dps)


def schedule_identity_error(cx: Counterexample) -> float:
    """max over scales of |exp(-π/h_m^2) (log2 m)^-2 - m^(-α/2)| relative to m^(-α/2)."""
    worst = mpf(0)
    with mpmath.workdps(cx.dps):
        a = _alpha_mpf(cx.alpha)
        for m in cx.scales:
            lhs = mpmath.exp(-mpmath.pi / cx.h[m] ** 2) / _log2_int(m) ** 2
            rhs = mpf(m) ** (-a / 2)
            worst = max(worst, abs(lhs - rhs) / rhs)
    return float(worst)


@dataclass
class RateRow:
    n: int
    sup_error: float
    lemma_bound: float
    scaled: float


def rate_sweep(cx: Counterexample, ns: Sequence[int] | None = None, points: int = 1024) -> list[RateRow]:
    """n^(α/2) sup |f - p_n| over a grid on [-1, 1] for a dyadic sweep of n.

    The Bernstein-positive p_n lies within 3 e^(-πn) sup|g_n| of g_n, so the
    reported error is the grid sup of |f - g_n| plus that bound.
    """
    ns = list(ns) if ns is not None else cx.scales[:-1]
    grid = _sym_grid(points)
    rows = []
    with mpmath.workdps(cx.dps):
        a = _alpha_mpf(cx.alpha)
        norm = sum((_frac(cx.weight(m)) for m in cx.scales), mpf(0)) * (1 + 4 * mpmath.exp(-mpmath.pi))
        for n in ns:
            sup = max(abs(cx.tail_deviation(n, x)) for x in grid)
            lemma = 3 * mpmath.exp(-mpmath.pi * n) * norm
            rows.append(RateRow(n, float(sup), float(lemma), float((sup + lemma) * mpf(n) ** (a / 2))))
    return rows


def rate_ratio(rows: Sequence[RateRow]) -> float:
    return rows[-1].scaled / rows[0].scaled


@dataclass
class DivergenceReport:
    estimate: SeminormEstimate
    scales: list[int]
    h: list[float]
    quotients: list[float]
    predicted: list[float]
    increasing: bool
    tilde_ratios: list[float] = field(default_factory=list)

    def growth(self) -> float:
        return self.quotients[-1] / self.quotients[0]


def probe_quotients(func: Callable, alpha, offsets: Sequence, center=0) -> list[float]:
    """|func(center) - func(center + t)| / t^α for each offset t."""
    a = float(as_fraction(alpha))
    base = func(center)
    return [float(abs(base - func(center + t)) / mpf(t) ** a) for t in offsets]


def delta_n_float(x: float, n: int) -> float:
    return max(math.sqrt(max(x * (1 - x), 0.0) / n), 1 / n)


def divergence_report(cx: Counterexample, alpha=None, scales: Sequence[int] | None = None, points: int = 257) -> DivergenceReport:
    """Hölder quotients of f at the probe pairs (0, h_m/(2√m)), with the predicted lower bound.

    Also records, for the x(1-x)-damped variant, sup over a grid in [0, 1] of
    |f~ - p~_n| / Δ_n(x)^α for each scale, which should stay bounded.
    """
    a = as_fraction(alpha) if alpha is not None else cx.alpha
    ms = list(scales) if scales is not None else cx.scales
    offsets = [cx.probe(m) for m in ms]
    quotients = probe_quotients(cx, a, offsets)
    with mpmath.workdps(cx.dps):
        am = _alpha_mpf(a)
        predicted = [float(mpf(2) ** (2 + am) * cx.h[m] ** (-am)) for m in ms]
    increasing = all(b > q for q, b in zip(quotients, quotients[1:]))
    xs = [i / (points - 1) for i in range(points)]
    tilde = []
    for n in ms[:-1]:
        worst = 0.0
        for x in xs:
            dev = abs(float(cx.tail_deviation(n, x))) * x * (1 - x)
            worst = max(worst, dev / delta_n_float(x, n) ** float(a))
        tilde.append(worst)
    estimate = SeminormEstimate([float(t) for t in offsets], quotients, "holder-probe", float(a))
    return DivergenceReport(estimate, ms, [float(cx.h[m]) for m in ms], quotients, predicted, increasing, tilde)


# Cone membership on an interval: B+_n[a, b] = {Σ c_k (x-a)^k (b-x)^(n-k) : c_k >= 0}.


def cone_coefficients(coeffs: Sequence, degree: int, a=-1, b=1) -> list:
    """c_k with Σ coeffs[i] x^i = Σ c_k (x-a)^k (b-x)^(degree-k).

    Works for Fractions (exactly) and for mpmath numbers alike.
    """
    if len(coeffs) - 1 > degree:
        raise ArgumentError("degree below polynomial degree")
    n = degree
    w = b - a
    coeffs = list(coeffs) + [0 * coeffs[0]] * (n + 1 - len(coeffs))
    # coefficients of p(a + w u) in u
    shifted = []
    for l in range(n + 1):
        acc = 0 * coeffs[0]
        apow = 1
        for i in range(l, n + 1):
            acc += coeffs[i] * math.comb(i, l) * apow
            apow *= a
        shifted.append(acc * w**l)
    out = []
    for k in range(n + 1):
        beta = sum((shifted[l] * math.comb(k, l) / math.comb(n, l) for l in range(k + 1)), 0 * coeffs[0])
        out.append(beta * math.comb(n, k) / w**n)
    return out


def poly_mul(p: Sequence, q: Sequence) -> list:
    out = [0 * p[0]] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        for j, y in enumerate(q):
            out[i + j] += x * y
    return out


@dataclass
class ConvolutionApproximant:
    """h Σ_{|t|<=2} P(√(πm)(x - t)) over the atoms t = k h/√m of f_{h,m}."""

    h: mpf
    m: int
    n: int
    degree: int
    coeffs: list
    cone: list
    prec: int

    def __call__(self, x) -> mpf:
        with mpmath.workprec(self.prec):
            return _poly_eval(self.coeffs, mpf(x))

    def min_coefficient_ratio(self) -> float:
        """Most negative cone coefficient relative to the largest one."""
        with mpmath.workprec(self.prec):
            scale = max(abs(c) for c in self.cone)
            return float(min(self.cone) / scale)

    def sup_error(self, points: int = 1024) -> float:
        g = ShiftedGaussianMixture(self.h, self.m)
        return max(float(abs(self(x) - g(x))) for x in _sym_grid(points))


def convolution_approximant(h, m: int, factor: int = 200) -> ConvolutionApproximant:
    """The Bernstein-positive approximant of f_{h,m} on [-1, 1] at degree factor * ceil(πm)."""
    _check_hm(h, m)
    n = math.ceil(math.pi * m)
    degree = factor * n
    half = degree // 2
    prec = 64 + 4 * degree
    with mpmath.workprec(prec):
        h = mpf(h)
        lam = mpmath.pi * m
        atoms = ShiftedGaussianMixture(h, m).atoms(2)
        # R_j: coefficients of P(√λ y) in y
        r = [mpf(0)] * (degree + 1)
        term = mpf(1)
        for k in range(half + 1):
            r[2 * k] = term
            term = -term * lam / (k + 1)
        moments = [h * sum(((-t) ** d for t in atoms), mpf(0)) for d in range(degree + 1)]
        coeffs = []
        for i in range(degree + 1):
            acc = mpf(0)
            for j in range(i, degree + 1, 1):
                if r[j]:
                    acc += r[j] * math.comb(j, i) * moments[j - i]
            coeffs.append(acc)
        cone = cone_coefficients(coeffs, degree, mpf(-1), mpf(1))
    return ConvolutionApproximant(h, m, n, degree, coeffs, cone, prec)
