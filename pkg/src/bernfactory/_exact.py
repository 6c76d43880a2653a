"""Big-integer helpers shared by the exact modules.

Everything here works on Python ints.  The heavy convolutions go through
gmpy2 (GMP's FFT multiplication) using Kronecker substitution, which is
orders of magnitude faster than schoolbook loops for degrees in the
thousands.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import gmpy2

_NAIVE_CUTOFF = 24


@lru_cache(maxsize=256)
def binomial_row(n: int) -> tuple[int, ...]:
    """Row n of Pascal's triangle via the multiplicative recurrence."""
    if n < 0:
        raise ValueError("negative degree")
    row = [1] * (n + 1)
    c = 1
    for k in range(1, n // 2 + 1):
        c = c * (n - k + 1) // k
        row[k] = c
        row[n - k] = c
    return tuple(row)


@lru_cache(maxsize=64)
def factorials(n: int) -> tuple[int, ...]:
    out = [1] * (n + 1)
    for i in range(1, n + 1):
        out[i] = out[i - 1] * i
    return tuple(out)


def _pack(values, width: int) -> int:
    nbytes = width // 8
    return int.from_bytes(b"".join(v.to_bytes(nbytes, "little") for v in values), "little")


def convolve(u, v) -> list[int]:
    """Exact linear convolution of two integer sequences."""
    u = list(u)
    v = list(v)
    if not u or not v:
        return []
    if min(len(u), len(v)) <= _NAIVE_CUTOFF:
        out = [0] * (len(u) + len(v) - 1)
        if len(u) < len(v):
            u, v = v, u
        for j, b in enumerate(v):
            if b:
                for i, a in enumerate(u):
                    out[i + j] += a * b
        return out
    mu = max(abs(a) for a in u)
    mv = max(abs(b) for b in v)
    if mu == 0 or mv == 0:
        return [0] * (len(u) + len(v) - 1)
    width = mu.bit_length() + mv.bit_length() + min(len(u), len(v)).bit_length() + 2
    width = (width + 7) // 8 * 8

    def packed(seq):
        pos = _pack((a if a > 0 else 0 for a in seq), width)
        neg = _pack((-a if a < 0 else 0 for a in seq), width)
        return gmpy2.mpz(pos) - gmpy2.mpz(neg)

    length = len(u) + len(v) - 1
    nbytes = width // 8
    half = b"\x00" * (nbytes - 1) + b"\x80"
    bias = int.from_bytes(half * length, "little")
    z = int(packed(u) * packed(v)) + bias
    raw = z.to_bytes(length * nbytes, "little")
    offset = 1 << (width - 1)
    return [
        int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "little") - offset
        for i in range(length)
    ]


def lcm_all(values) -> int:
    return math.lcm(*values) if values else 1


def common_denominator(fracs) -> tuple[list[int], int]:
    """Write a list of Fractions over one denominator."""
    fracs = [Fraction(f) for f in fracs]
    den = lcm_all([f.denominator for f in fracs])
    return [f.numerator * (den // f.denominator) for f in fracs], den


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def floor_root_ratio(num: int, den: int, k: int) -> int:
    """floor((num/den)^(1/k)) for num, den > 0."""
    q = num // den
    root, _ = gmpy2.iroot(gmpy2.mpz(q), k)
    r = int(root)
    while (r + 1) ** k * den <= num:
        r += 1
    while r > 0 and r**k * den > num:
        r -= 1
    return r


def power_enclosure(value: Fraction, exponent: Fraction, bits: int) -> tuple[int, int]:
    """Integers (lo, hi) with lo <= 2^bits * value^exponent <= hi and hi - lo <= 1.

    Works for value >= 0 and rational exponent p/q > 0 by taking an integer
    q-th root of the scaled p-th power.  lo == hi exactly when the scaled
    power is an integer.
    """
    if value < 0:
        raise ValueError("negative base")
    if value == 0:
        return 0, 0
    p, q = exponent.numerator, exponent.denominator
    if p <= 0:
        raise ValueError("exponent must be positive")
    base = value**p * (1 << (bits * q))
    lo = floor_root_ratio(base.numerator, base.denominator, q)
    hi = lo if lo**q * base.denominator == base.numerator else lo + 1
    return lo, hi


def round_nearest(value: Fraction, bits: int) -> int:
    """Nearest integer to value * 2^bits, halves rounded up."""
    scaled = value * (1 << bits)
    return (2 * scaled.numerator + scaled.denominator) // (2 * scaled.denominator)


@lru_cache(maxsize=256)
def signed_binomial_row(n: int) -> tuple[int, ...]:
    """Coefficients of (1 - x)^n."""
    return tuple(c if j % 2 == 0 else -c for j, c in enumerate(binomial_row(n)))


def scaled_to_power(scaled) -> list[int]:
    """Power-basis coefficients of Σ s_k x^k (1-x)^(n-k).

    Splits the index range in half and recombines with (1-x)^m factors,
    so intermediate entries stay close to the size of the inputs.
    """
    scaled = list(scaled)

    def rec(lo: int, hi: int) -> list[int]:
        if hi - lo < 32:
            out = [0] * (hi - lo + 1)
            for k in range(lo, hi + 1):
                s = scaled[k]
                if s:
                    for j, b in enumerate(signed_binomial_row(hi - k)):
                        out[k - lo + j] += s * b
            return out
        mid = (lo + hi) // 2
        left = convolve(rec(lo, mid), signed_binomial_row(hi - mid))
        right = rec(mid + 1, hi)
        shift = mid + 1 - lo
        for j, c in enumerate(right):
            left[shift + j] += c
        return left

    return rec(0, len(scaled) - 1)


def horner_grid(coeffs, denominator: int, numerators) -> list[int]:
    """Σ a_l i^l M^(n-l) for each i, i.e. M^n times the polynomial at i/M."""
    weighted = []
    power = gmpy2.mpz(1)
    for a in reversed(coeffs):
        weighted.append(gmpy2.mpz(a) * power)
        power *= denominator
    out = []
    for i in numerators:
        v = gmpy2.mpz(0)
        for w in weighted:
            v = v * i + w
        out.append(int(v))
    return out


def horner_enclosure(coeffs, denominator: int, numerators, precision: int) -> list[int]:
    """Fixed-point Horner at the points i/M.

    Returns v_i with v_i <= 2^precision * Σ a_l (i/M)^l < v_i + n, where n
    is the degree: every floor loses less than one unit and earlier losses
    are damped by the factor i/M <= 1.
    """
    shifted = [gmpy2.mpz(a) << precision for a in reversed(coeffs)]
    out = []
    for i in numerators:
        if i == 0:
            out.append(int(shifted[-1]))
            continue
        if i == denominator:
            out.append(int(sum(shifted)))
            continue
        v = shifted[0]
        for w in shifted[1:]:
            v = (v * i) // denominator + w
        out.append(int(v))
    return out
