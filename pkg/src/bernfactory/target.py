"""Target functions with certified derivative oracles, plus seminorm estimators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from ._exact import power_enclosure
from .bernstein import BernsteinPoly, as_fraction
from .errors import ArgumentError, ContractError
from .lorentz import samples_from_intervals

ANALYTIC_ORDER = 16


def _falling(a: Fraction, j: int) -> Fraction:
    out = Fraction(1)
    for i in range(j):
        out *= a - i
    return out


class PolynomialOracle:
    """Exact oracle for Σ c_i x^i with rational c_i."""

    def __init__(self, coeffs: Sequence, order: int = ANALYTIC_ORDER):
        self.coeffs = [as_fraction(c) for c in coeffs]
        self.order = order
        self._derivs = [self.coeffs]
        for _ in range(order):
            prev = self._derivs[-1]
            self._derivs.append([i * c for i, c in enumerate(prev)][1:] or [Fraction(0)])

    def value(self, x: Fraction, j: int = 0) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self._derivs[j]):
            acc = acc * x + c
        return acc

    def interval(self, x, j, bits):
        v = self.value(as_fraction(x), j)
        return v, v

    def samples(self, n, j, bits):
        return [self.value(Fraction(k, n), j) for k in range(n + 1)]

    def bernstein(self) -> BernsteinPoly:
        return BernsteinPoly.from_monomial(self.coeffs)


class PiecewisePowerOracle:
    """offset + scale * |x - center|^exponent with derivatives below the exponent."""

    def __init__(self, center, exponent, scale, offset):
        self.center = as_fraction(center)
        self.exponent = as_fraction(exponent)
        self.scale = as_fraction(scale)
        self.offset = as_fraction(offset)
        if self.exponent <= 0:
            raise ArgumentError("exponent must be positive")
        self.order = math.ceil(self.exponent) - 1

    def interval(self, x, j, bits):
        x = as_fraction(x)
        if j > self.order:
            raise ArgumentError(f"derivative order {j} exceeds {self.order}")
        base = self.offset if j == 0 else Fraction(0)
        t = x - self.center
        if t == 0:
            return base, base
        k = self.scale * _falling(self.exponent, j)
        if t < 0 and j % 2:
            k = -k
        if k == 0:
            return base, base
        extra = max(0, math.ceil(abs(k)).bit_length()) + 1
        lo, hi = power_enclosure(abs(t), self.exponent - j, bits + extra)
        unit = Fraction(1, 1 << (bits + extra))
        a, b = base + k * lo * unit, base + k * hi * unit
        return (a, b) if a <= b else (b, a)

    def samples(self, n, j, bits):
        return samples_from_intervals(self, n, j, bits)


@dataclass(frozen=True)
class TargetFunction:
    """f: [0,1] -> (0,1) with smoothness metadata.

    alpha is the Hölder exponent used for construction; smoothness is the
    largest admissible exponent (None for analytic targets).
    """

    identifier: str
    alpha: Fraction
    delta: Fraction
    oracle: object
    smoothness: Fraction | None = None
    description: str = ""
    polynomial: BernsteinPoly | None = field(default=None, compare=False)

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.smoothness is not None and self.alpha > self.smoothness:
            raise ArgumentError(f"{self.identifier} is only C^{self.smoothness}")
        if self.oracle.order < self.r:
            raise ArgumentError("oracle order below floor(alpha)")
        if self.delta <= 0:
            raise ArgumentError("range margin must be positive")

    @property
    def r(self) -> int:
        return math.floor(self.alpha)

    def with_alpha(self, alpha) -> "TargetFunction":
        return replace(self, alpha=as_fraction(alpha))

    def value_interval(self, x, bits: int = 64) -> tuple[Fraction, Fraction]:
        return self.oracle.interval(as_fraction(x), 0, bits)

    def __call__(self, x: float) -> float:
        lo, hi = self.value_interval(Fraction(x), 60)
        return float((lo + hi) / 2)


def check_alpha(alpha: Fraction) -> None:
    alpha = as_fraction(alpha)
    if alpha <= 0:
        raise ArgumentError("alpha must be positive")
    if alpha.denominator == 1:
        raise ArgumentError("integer alpha is not supported")


def hoelder_family(alpha, scale=Fraction(1, 4)) -> TargetFunction:
    alpha = as_fraction(alpha)
    oracle = PiecewisePowerOracle(Fraction(1, 2), alpha, scale, Fraction(1, 2))
    return TargetFunction(
        identifier=f"holder-{alpha}",
        alpha=alpha,
        delta=Fraction(1, 8),
        oracle=oracle,
        smoothness=alpha,
        description=f"1/2 + {scale}|p - 1/2|^{alpha}",
    )


def catalog() -> list[TargetFunction]:
    linear = PolynomialOracle([Fraction(2, 5), Fraction(1, 5)])
    cubic = PolynomialOracle([Fraction(3, 8), Fraction(3, 4), Fraction(-3, 2), Fraction(1)])
    return [
        TargetFunction("linear", Fraction(3, 2), Fraction(1, 8), linear, None, "(2 + p)/5", linear.bernstein()),
        TargetFunction("cubic", Fraction(3, 2), Fraction(1, 8), cubic, None, "1/2 + (p - 1/2)^3", cubic.bernstein()),
        hoelder_family(Fraction(1, 2)),
        hoelder_family(Fraction(3, 2)),
        hoelder_family(Fraction(5, 2)),
    ]


def get_target(identifier: str) -> TargetFunction:
    for t in catalog():
        if t.identifier == identifier:
            return t
    known = ", ".join(t.identifier for t in catalog())
    raise ArgumentError(f"unknown target {identifier!r}; known: {known}")


def _range_margin(lo: Fraction, hi: Fraction) -> Fraction:
    """Largest 2^-k with 2δ < lo and hi < 1 - 2δ."""
    for k in range(2, 64):
        d = Fraction(1, 1 << k)
        if 2 * d < lo and hi < 1 - 2 * d:
            return d
    raise ArgumentError("target range touches 0 or 1")


def piecewise_power(center, exponent, scale, offset, alpha=None) -> TargetFunction:
    oracle = PiecewisePowerOracle(center, exponent, scale, offset)
    plo, phi = power_enclosure(max(oracle.center, 1 - oracle.center), oracle.exponent, 40)
    ends = [oracle.offset + oracle.scale * Fraction(v, 1 << 40) for v in (plo, phi)]
    lo, hi = min(oracle.offset, *ends), max(oracle.offset, *ends)
    if not (0 < lo and hi < 1):
        raise ArgumentError("piecewise power leaves (0, 1) on [0, 1]")
    exponent = oracle.exponent
    alpha = as_fraction(alpha) if alpha is not None else exponent
    return TargetFunction(
        identifier=f"piecewise:{oracle.center}:{exponent}:{oracle.scale}:{oracle.offset}",
        alpha=alpha,
        delta=_range_margin(lo, hi),
        oracle=oracle,
        smoothness=exponent,
        description=f"{oracle.offset} + {oracle.scale}|p - {oracle.center}|^{exponent}",
    )


def load_piecewise_power(source: str | Path | dict) -> TargetFunction:
    """Read {center, exponent, scale, offset} from a dict or JSON file."""
    try:
        spec = source if isinstance(source, dict) else json.loads(Path(source).read_text())
        return piecewise_power(
            Fraction(str(spec["center"])),
            Fraction(str(spec["exponent"])),
            Fraction(str(spec["scale"])),
            Fraction(str(spec["offset"])),
            spec.get("alpha"),
        )
    except (OSError, KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, ArgumentError):
            raise
        raise ContractError(f"bad piecewise-power spec: {exc}") from exc


@dataclass
class SeminormEstimate:
    scales: list[float]
    values: list[float]
    kind: str
    exponent: float

    def ratio(self) -> float:
        return self.values[-1] / self.values[0] if self.values[0] else math.inf


def _oracle_of(f):
    return getattr(f, "oracle", f)


def _derivative_values(oracle, order: int, xs: Sequence[Fraction]) -> np.ndarray:
    vals = []
    for x in xs:
        lo, hi = oracle.interval(x, order, 64)
        vals.append(float((lo + hi) / 2))
    return np.array(vals)


def _grid(grid: int | Sequence) -> list[Fraction]:
    if isinstance(grid, int):
        return [Fraction(i, grid) for i in range(grid + 1)]
    return [as_fraction(x) for x in grid]


def holder_seminorm(f, alpha, scales: Sequence, grid: int | Sequence = 256) -> SeminormEstimate:
    """Per-scale sup of |f^(r)(x+h) - f^(r)(x)| / h^(α-r) over grid points x."""
    oracle = _oracle_of(f)
    alpha = as_fraction(alpha)
    r = math.ceil(alpha) - 1
    xs = _grid(grid)
    values = []
    for h in scales:
        h = as_fraction(h)
        left = [x for x in xs if x + h <= 1]
        if not left:
            values.append(0.0)
            continue
        a = _derivative_values(oracle, r, left)
        b = _derivative_values(oracle, r, [x + h for x in left])
        values.append(float(np.max(np.abs(b - a))) / float(h) ** float(alpha - r))
    return SeminormEstimate([float(h) for h in scales], values, "holder", float(alpha))


def zygmund_seminorm(f, scales: Sequence, grid: int | Sequence = 256, order: int = 0) -> SeminormEstimate:
    """Per-scale sup of |f^(r)(x+t) - 2 f^(r)(x) + f^(r)(x-t)| / t."""
    oracle = _oracle_of(f)
    xs = _grid(grid)
    values = []
    for t in scales:
        t = as_fraction(t)
        mid = [x for x in xs if 0 <= x - t and x + t <= 1]
        if not mid:
            values.append(0.0)
            continue
        a = _derivative_values(oracle, order, [x - t for x in mid])
        b = _derivative_values(oracle, order, mid)
        c = _derivative_values(oracle, order, [x + t for x in mid])
        values.append(float(np.max(np.abs(a - 2 * b + c))) / float(t))
    return SeminormEstimate([float(t) for t in scales], values, "zygmund", float(order + 1))
