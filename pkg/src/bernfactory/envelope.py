"""Consistent envelope ladders g_n <= f <= h_n along n = n0 b^m.

The ladder is built by iterated Lorentz corrections

    f_{n0} = Q_{n0,r} f,     f_n = f_{n/b} + Q_{n,r}(f - f_{n/b}),

widened by a multiple of the Bernstein image of
phi_n(x) = θ n^-α + (x(1-x)/n)^(α/2).  Every claimed property is certified
in exact arithmetic afterwards; the constants are calibrated from the data
rather than taken on faith.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from ._exact import binomial_row, power_enclosure
from .bernstein import (
    BernsteinPoly,
    EnvelopePair,
    as_fraction,
    default_slack,
    elevate,
    evaluate,
    evaluate_grid,
    leq_order,
    poly_from_json,
    poly_to_json,
    round_dyadic,
    sub,
)
from .errors import (
    ArgumentError,
    ConstructionFailure,
    ContractError,
    InvalidSeriesError,
    PrecisionError,
    RangeViolation,
)
from .lorentz import DifferenceOracle, lorentz_apply
from .target import TargetFunction, check_alpha

log = logging.getLogger(__name__)

D_FLOOR = Fraction(1, 1 << 8)


def default_gamma(alpha: Fraction) -> Fraction:
    """A rational just below (2^(α/2) - 1)/4."""
    lo, _ = power_enclosure(Fraction(2), as_fraction(alpha) / 2, 24)
    return Fraction(lo - (1 << 24), 1 << 26)


@dataclass(frozen=True)
class LadderParams:
    alpha: Fraction
    n0: int = 16
    b: int = 4
    levels: int = 3
    theta: Fraction = Fraction(1)
    D: Fraction | None = None
    gamma: Fraction | None = None
    delta: Fraction = Fraction(1, 8)
    margin: Fraction = Fraction(1, 16)
    phi_bits: int = 8
    grid_points: int = 1024
    retries: int = 8
    slack_factor: Fraction = Fraction(4)

    def __post_init__(self):
        for name in ("alpha", "theta", "delta", "margin", "slack_factor"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        for name in ("D", "gamma"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, as_fraction(v))
        check_alpha(self.alpha)
        if self.b < 2 or self.b & (self.b - 1):
            raise ArgumentError("b must be a power of 2, at least 2")
        if self.n0 < 1 or self.levels < 1:
            raise ArgumentError("n0 and levels must be positive")
        if self.theta < 1:
            raise ArgumentError("theta must be at least 1")
        if self.D is not None and self.D <= 0:
            raise ArgumentError("D must be positive")
        g = self.resolved_gamma
        p, q = self.alpha.numerator, self.alpha.denominator
        if g < 0 or (1 + g) ** (2 * q) >= 2**p:
            raise ArgumentError("gamma must satisfy 0 <= gamma < 2^(alpha/2) - 1")

    @property
    def r(self) -> int:
        return math.floor(self.alpha)

    @property
    def resolved_gamma(self) -> Fraction:
        return self.gamma if self.gamma is not None else default_gamma(self.alpha)

    @property
    def rungs(self) -> list[int]:
        return [self.n0 * self.b**m for m in range(self.levels)]

    def slack(self, level: int) -> Fraction:
        return self.slack_factor * default_slack(level) / 4

    def sample_bits(self, n: int) -> int:
        return max(64, math.ceil(float(self.alpha) * math.log2(n))) + 48

    def to_json(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = str(v) if isinstance(v, Fraction) else v
        out["gamma"] = str(self.resolved_gamma)
        out["r"] = self.r
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "LadderParams":
        fields_ = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        for k in ("alpha", "theta", "D", "gamma", "delta", "margin", "slack_factor"):
            if fields_.get(k) is not None:
                fields_[k] = Fraction(fields_[k])
        return cls(**fields_)


def rungs_to_params(rungs: Sequence[int], alpha, **overrides) -> LadderParams:
    """Infer n0, b and the number of levels from an explicit geometric rung list."""
    rungs = list(rungs)
    if not rungs:
        raise ArgumentError("empty rung list")
    if len(rungs) == 1:
        return LadderParams(alpha=alpha, n0=rungs[0], levels=1, **overrides)
    b = rungs[1] // rungs[0]
    if any(rungs[i + 1] != rungs[i] * b for i in range(len(rungs) - 1)) or rungs[1] % rungs[0]:
        raise ArgumentError("rungs must form a geometric progression n0 * b^m")
    return LadderParams(alpha=alpha, n0=rungs[0], b=b, levels=len(rungs), **overrides)


@lru_cache(maxsize=64)
def _phi_scaled(n: int, alpha: Fraction, theta: Fraction, bits: int, upper: bool) -> tuple[int, ...]:
    """Integers 2^bits * φ_n(k/n) rounded outward, k = 0..n."""
    lo0, hi0 = power_enclosure(Fraction(1, n), alpha, bits + 2)
    pad = (theta * (hi0 if upper else lo0)) / 4
    pad = math.ceil(pad) if upper else math.floor(pad)
    out = []
    for k in range(n + 1):
        lo, hi = power_enclosure(Fraction(k * (n - k), n**3), alpha / 2, bits)
        out.append(pad + (hi if upper else lo))
    return tuple(out)


def phi_poly(n: int, params: LadderParams, side: str = "upper", bits: int | None = None) -> BernsteinPoly:
    """B_n φ_n with coefficients enclosing φ_n(k/n) from the requested side."""
    if side not in ("upper", "lower"):
        raise ArgumentError("side must be 'upper' or 'lower'")
    bits = n + params.phi_bits if bits is None else bits
    vals = _phi_scaled(n, params.alpha, params.theta, bits, side == "upper")
    row = binomial_row(n)
    return BernsteinPoly.from_scaled(n, [v * c for v, c in zip(vals, row)], 1 << bits)


def domination_check(n: int, params: LadderParams, bits: int | None = None) -> bool:
    """Decide (B_n φ_n) >= (1+γ) B_2n φ_2n in the degree-2n order.

    Uses the lower enclosure on the left and the upper one on the right, so
    True is sound.  If that comparison fails but the reversed enclosures
    pass, the enclosures are too wide to decide and PrecisionError is raised.
    """
    g = params.resolved_gamma
    lhs = elevate(phi_poly(n, params, "lower", bits), 2 * n)
    rhs = phi_poly(2 * n, params, "upper", None if bits is None else bits + 1) * (1 + g)
    if leq_order(rhs, lhs, 2 * n):
        return True
    lhs_hi = elevate(phi_poly(n, params, "upper", bits), 2 * n)
    rhs_lo = phi_poly(2 * n, params, "lower", None if bits is None else bits + 1) * (1 + g)
    if leq_order(rhs_lo, lhs_hi, 2 * n):
        raise PrecisionError(f"phi enclosures too wide to decide domination at n={n}")
    return False


def build_fn_ladder(f: TargetFunction, params: LadderParams) -> list[BernsteinPoly]:
    r = params.r
    if f.oracle.order < r:
        raise ArgumentError("target oracle order below floor(alpha)")
    fs: list[BernsteinPoly] = []
    for n in params.rungs:
        bits = params.sample_bits(n)
        if not fs:
            fn = lorentz_apply(f.oracle, n, r, bits)
        else:
            prev = fs[-1]
            fn = elevate(prev, n + r) + lorentz_apply(DifferenceOracle(f.oracle, prev), n, r, bits)
        fs.append(fn)
        log.debug("f_%d built (degree %d)", n, fn.degree)
    return fs


@dataclass
class Violation:
    condition: str
    level: int
    k: int | None = None
    detail: str = ""


@dataclass
class RungCertificate:
    level: int
    range_ok: bool
    dyadic: bool
    consistency: bool | None
    sandwich: str

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "i": self.range_ok,
            "ii'": self.dyadic,
            "iii": self.sandwich,
            "iv": self.consistency,
        }


@dataclass
class CertificationReport:
    rungs: list[RungCertificate] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def first(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "rungs": [c.to_json() for c in self.rungs],
            "violations": [asdict(v) for v in self.violations],
        }


def _check_range(pair: EnvelopePair) -> Violation | None:
    n = pair.level
    row = binomial_row(n)
    lo, up = pair.lower, pair.upper
    for k in range(n + 1):
        a = lo.scaled[k] * up.den
        b = up.scaled[k] * lo.den
        if lo.scaled[k] < 0:
            return Violation("i", n, k, "lower coefficient negative")
        if a > b:
            return Violation("i", n, k, "lower coefficient above upper")
        if up.scaled[k] > row[k] * up.den:
            return Violation("i", n, k, "upper coefficient above 1")
    return None


def _check_consistency(prev: EnvelopePair, cur: EnvelopePair) -> Violation | None:
    n = cur.level
    dl = elevate(sub(cur.lower, prev.lower), n)
    du = elevate(sub(prev.upper, cur.upper), n)
    for k in range(n + 1):
        if dl.scaled[k] < 0:
            return Violation("iv", n, k, f"lower envelope decreases against level {prev.level}")
        if du.scaled[k] < 0:
            return Violation("iv", n, k, f"upper envelope increases against level {prev.level}")
    return None


def unit_grid(points: int) -> tuple[int, list[int]]:
    """The rational grid i/(points-1), i = 0..points-1."""
    return points - 1, list(range(points))


def _check_sandwich(pair: EnvelopePair, target: TargetFunction, points: int) -> tuple[str, Violation | None]:
    n = pair.level
    poly = target.polynomial
    if poly is not None and poly.degree <= n:
        if not leq_order(pair.lower, poly, n):
            return "failed", Violation("iii", n, None, "lower envelope not below target (exact)")
        if not leq_order(poly, pair.upper, n):
            return "failed", Violation("iii", n, None, "upper envelope not above target (exact)")
        return "exact", None
    M, pts = unit_grid(points)
    gv, gd = evaluate_grid(pair.lower, M, pts)
    hv, hd = evaluate_grid(pair.upper, M, pts)
    bits = n + 64
    for i, gi, hi in zip(pts, gv, hv):
        x = Fraction(i, M)
        g, h = Fraction(gi, gd), Fraction(hi, hd)
        for attempt in range(3):
            lo, up = target.value_interval(x, bits << attempt)
            if g <= lo and up <= h:
                break
            if g > up or h < lo:
                side = "lower" if g > up else "upper"
                return "failed", Violation("iii", n, None, f"{side} envelope crosses target at x={x}")
        else:
            return "failed", Violation("iii", n, None, f"target enclosure too wide at x={x}")
    return "grid-certified", None


def certify(
    pairs: Sequence[EnvelopePair],
    target: TargetFunction | None = None,
    grid_points: int = 1024,
    require_dyadic: bool | None = None,
) -> CertificationReport:
    """Check (i), (ii'), (iii) and (iv) along a sequence of envelope pairs."""
    report = CertificationReport()
    prev = None
    for pair in pairs:
        v_range = _check_range(pair)
        dyadic = pair.is_dyadic()
        need_dyadic = pair.kind == "dyadic" if require_dyadic is None else require_dyadic
        v_cons = _check_consistency(prev, pair) if prev is not None else None
        if target is not None:
            sandwich, v_sand = _check_sandwich(pair, target, grid_points)
        else:
            sandwich, v_sand = "skipped", None
        report.rungs.append(
            RungCertificate(pair.level, v_range is None, dyadic, None if prev is None else v_cons is None, sandwich)
        )
        for v in (v_range, v_cons, v_sand):
            if v is not None:
                report.violations.append(v)
        if need_dyadic and not dyadic:
            report.violations.append(Violation("ii'", pair.level, None, "coefficients not dyadic at this level"))
        prev = pair
    return report


@dataclass
class EnvelopeLadder:
    target_id: str
    params: LadderParams
    fs: list[BernsteinPoly]
    psis: list[BernsteinPoly]
    raw: list[EnvelopePair]
    pairs: list[EnvelopePair]
    certification: CertificationReport
    raw_certification: CertificationReport | None = None
    domination: dict[int, bool | None] = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    attempts: list[str] = field(default_factory=list)

    @property
    def rungs(self) -> list[int]:
        return self.params.rungs

    @property
    def levels(self) -> list[int]:
        return [p.level for p in self.pairs]

    def gap_at(self, x) -> list[Fraction]:
        return [evaluate(p.gap(), x) for p in self.pairs]

    def to_json(self) -> dict:
        return {
            "format": "bernfactory-ladder/1",
            "target": self.target_id,
            "params": self.params.to_json(),
            "rungs": [
                {
                    "n": n,
                    "level": p.level,
                    "lower": poly_to_json(p.lower, dyadic=True),
                    "upper": poly_to_json(p.upper, dyadic=True),
                }
                for n, p in zip(self.rungs, self.pairs)
            ],
            "certification": self.certification.to_json(),
            "domination": {str(k): v for k, v in self.domination.items()},
            "calibration": {k: float(v) for k, v in self.calibration.items()},
            "attempts": list(self.attempts),
        }


@dataclass
class LoadedLadder:
    """What the simulator needs from a manifest: dyadic pairs plus metadata."""

    target_id: str
    params: LadderParams
    pairs: list[EnvelopePair]
    certification: dict

    @property
    def rungs(self) -> list[int]:
        return self.params.rungs


def ladder_from_json(obj: dict) -> LoadedLadder:
    try:
        if obj.get("format") != "bernfactory-ladder/1":
            raise ContractError("not a ladder manifest")
        params = LadderParams.from_json(obj["params"])
        pairs = []
        for rung in obj["rungs"]:
            lo = poly_from_json(rung["lower"])
            up = poly_from_json(rung["upper"])
            pairs.append(EnvelopePair(int(rung["level"]), lo, up, "dyadic"))
        return LoadedLadder(obj["target"], params, pairs, obj.get("certification", {}))
    except ContractError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractError(f"malformed ladder manifest: {exc}") from exc


def _dyadic_ceil(x: Fraction, digits: int = 12) -> Fraction:
    """Smallest m/2^e >= x with m below 2^digits."""
    if x <= 0:
        return Fraction(0)
    e = digits - math.floor(math.log2(x)) - 1
    scaled = x * Fraction(2) ** e
    return Fraction(math.ceil(scaled)) / Fraction(2) ** e


def _max_ratio(num: Sequence[int], den: Sequence[int], scale: Fraction = Fraction(1)) -> Fraction:
    """scale * max num_k / den_k over positive den_k, compared by cross-multiplication."""
    best_n, best_d = 0, 1
    for a, c in zip(num, den):
        if a * best_d > best_n * c:
            best_n, best_d = a, c
    return scale * Fraction(best_n, best_d)


@dataclass
class _SandwichData:
    """Smallest D for which f_n -/+ D psi sandwiches f, and how that was decided."""

    ratio: Fraction
    kind: str


def _sandwich_data(f: TargetFunction, fn: BernsteinPoly, psi: BernsteinPoly, grid_points: int) -> _SandwichData:
    poly = f.polynomial
    if poly is not None and poly.degree <= fn.degree:
        d = sub(fn, poly)
        # |d_k| <= D psi_k for every k is exactly the (iii) order test
        return _SandwichData(_max_ratio([abs(s) for s in d.scaled], psi.scaled, Fraction(psi.den, d.den)), "exact")
    M, pts = unit_grid(grid_points)
    fv, fd = evaluate_grid(fn, M, pts)
    pv, pd = evaluate_grid(psi, M, pts)
    bits = fn.degree + 64
    best_n, best_d = 0, 1
    for i, a, b in zip(pts, fv, pv):
        lo, hi = f.value_interval(Fraction(i, M), bits)
        # distances from f_n(x) = a/fd to both ends of the target enclosure, over psi(x) = b/pd
        for num, den in (
            (a * lo.denominator - lo.numerator * fd, fd * lo.denominator),
            (hi.numerator * fd - a * hi.denominator, fd * hi.denominator),
        ):
            if num * pd * best_d > best_n * den * b:
                best_n, best_d = num * pd, den * b
    best = Fraction(best_n, best_d)
    return _SandwichData(best, "grid-certified")


def _calibrate(f: TargetFunction, params: LadderParams, fs, psis, sandwich) -> tuple[Fraction, dict]:
    """Smallest workable D (times a safety margin) and the largest admissible one."""
    need_iv = Fraction(0)
    for i in range(1, len(fs)):
        level = fs[i].degree
        q = sub(fs[i], elevate(fs[i - 1], level))
        c = sub(elevate(psis[i - 1], level), psis[i])
        for k, (qk, ck) in enumerate(zip(q.scaled, c.scaled)):
            if ck < 0 or (ck == 0 and qk != 0):
                raise ConstructionFailure(
                    f"correction does not shrink between rungs at level {level}, k={k}", "iv", level
                )
        pos = [(abs(qk), ck) for qk, ck in zip(q.scaled, c.scaled) if ck > 0]
        need_iv = max(need_iv, _max_ratio([p[0] for p in pos], [p[1] for p in pos], Fraction(c.den, q.den)))
    need_iii = max(s.ratio for s in sandwich)

    d_max = None
    for fn, psi in zip(fs, psis):
        n = fn.degree
        row = binomial_row(n)
        s = params.slack(n)
        # room_k = min(f_k - s C(n,k), C(n,k)(1 - s) - f_k), all over fn.den * s.denominator
        fd, sn, sd = fn.den, s.numerator, s.denominator
        rooms = []
        for a, c in zip(fn.scaled, row):
            rooms.append(min(a * sd - sn * c * fd, c * (sd - sn) * fd - a * sd))
        worst_n, worst_d = None, 1
        for room, b in zip(rooms, psi.scaled):
            if worst_n is None or room * worst_d < worst_n * b:
                worst_n, worst_d = room, b
        cap = Fraction(worst_n * psi.den, worst_d * fd * sd)
        if d_max is None or cap < d_max:
            d_max = cap
    need = max(need_iv, need_iii, D_FLOOR)
    info = {"need_iv": need_iv, "need_iii": need_iii, "d_max": d_max}
    if d_max is None or need > d_max:
        raise ConstructionFailure(
            f"no admissible D: need {float(need):.4g}, range allows {float(d_max):.4g}", "i", fs[0].degree
        )
    for cand in (_dyadic_ceil(need * (1 + params.margin)), need):
        if cand <= d_max:
            return cand, info
    raise AssertionError("unreachable")


def _escalate(params: LadderParams, failure: ConstructionFailure) -> LadderParams:
    if failure.condition == "i":
        return replace(params, n0=params.n0 * 2)
    if params.D is not None and failure.condition in ("iii", "iv"):
        return replace(params, D=params.D * 2)
    return replace(params, theta=params.theta * 2)


def build_envelopes(f: TargetFunction, params: LadderParams | None = None, check_domination: bool = True) -> EnvelopeLadder:
    """Construct, round and certify a ladder, escalating parameters on failure."""
    params = params or LadderParams(alpha=f.alpha)
    if params.alpha != f.alpha:
        f = f.with_alpha(params.alpha)
    attempts: list[str] = []
    first_failure: ConstructionFailure | None = None
    fs_cache: dict[int, list[BernsteinPoly]] = {}
    for _ in range(params.retries + 1):
        try:
            ladder = _build_once(f, params, fs_cache, check_domination)
            ladder.attempts = attempts + [f"accepted: n0={params.n0} theta={params.theta} D={ladder.params.D}"]
            return ladder
        except (ConstructionFailure, RangeViolation) as exc:
            if isinstance(exc, RangeViolation):
                exc = ConstructionFailure(str(exc), "i", None)
            first_failure = first_failure or exc
            attempts.append(f"rejected: n0={params.n0} theta={params.theta} D={params.D}: {exc}")
            log.info("construction attempt failed: %s", exc)
            params = _escalate(params, exc)
    raise ConstructionFailure(
        f"retry budget exhausted; first failure: {first_failure}",
        first_failure.condition if first_failure else None,
        first_failure.rung if first_failure else None,
    )


def _apply_sandwich(report: CertificationReport, pairs, sandwich, D: Fraction) -> None:
    """Record (iii) for a raw ladder from precomputed per-rung sandwich ratios."""
    for cert, pair, data in zip(report.rungs, pairs, sandwich):
        if D >= data.ratio:
            cert.sandwich = data.kind
        else:
            cert.sandwich = "failed"
            report.violations.append(
                Violation("iii", pair.level, None, f"envelope crosses target ({data.kind}); needs D >= {float(data.ratio):.4g}")
            )


def _inherit_sandwich(report: CertificationReport, raw_report: CertificationReport, raw, pairs, target, grid_points) -> None:
    """Rounded pairs that contain the raw pairs coefficientwise inherit (iii)."""
    for cert, raw_cert, r, p in zip(report.rungs, raw_report.rungs, raw, pairs):
        n = p.level
        if raw_cert.sandwich != "failed" and leq_order(p.lower, r.lower, n) and leq_order(r.upper, p.upper, n):
            cert.sandwich = raw_cert.sandwich
            continue
        cert.sandwich, v = _check_sandwich(p, target, grid_points)
        if v is not None:
            report.violations.append(v)


def _build_once(f, params: LadderParams, fs_cache, check_domination: bool) -> EnvelopeLadder:
    key = params.n0
    if key not in fs_cache:
        fs_cache[key] = build_fn_ladder(f, params)
    fs = fs_cache[key]
    r = params.r
    psis = [elevate(phi_poly(n, params, "upper"), n + r) for n in params.rungs]
    skey = (params.n0, params.theta)
    if skey not in fs_cache:
        fs_cache[skey] = [_sandwich_data(f, fn, psi, params.grid_points) for fn, psi in zip(fs, psis)]
    sandwich = fs_cache[skey]
    calibration: dict = {}
    if params.D is None:
        D, calibration = _calibrate(f, params, fs, psis, sandwich)
        resolved = replace(params, D=D)
    else:
        D, resolved = params.D, params
    raw = [EnvelopePair(fn.degree, fn - psi * D, fn + psi * D, "raw") for fn, psi in zip(fs, psis)]
    raw_report = certify(raw, None, params.grid_points, require_dyadic=False)
    _apply_sandwich(raw_report, raw, sandwich, D)
    if not raw_report.ok:
        v = raw_report.first()
        raise ConstructionFailure(f"raw ladder fails ({v.condition}) at level {v.level}: {v.detail}", v.condition, v.level)
    pairs = [round_dyadic(p, params.slack(p.level)) for p in raw]
    report = certify(pairs, None, params.grid_points)
    _inherit_sandwich(report, raw_report, raw, pairs, f, params.grid_points)
    if not report.ok:
        v = report.first()
        raise ConstructionFailure(f"dyadic ladder fails ({v.condition}) at level {v.level}: {v.detail}", v.condition, v.level)
    domination = {}
    if check_domination:
        for n in params.rungs:
            try:
                domination[n] = domination_check(n, resolved)
            except PrecisionError:
                domination[n] = None
    return EnvelopeLadder(f.identifier, resolved, fs, psis, raw, pairs, report, raw_report, domination, calibration)


def fill_in(pairs: Sequence[EnvelopePair], n: int) -> EnvelopePair:
    """The envelope at degree n: elevation of the last rung at or below n."""
    base = None
    for p in pairs:
        if p.level <= n:
            base = p
    if base is None:
        raise ArgumentError(f"no rung at or below degree {n}")
    if base.level == n:
        return base
    return EnvelopePair(n, elevate(base.lower, n), elevate(base.upper, n), "filled-in")


def fill_in_levels(pairs: Sequence[EnvelopePair], up_to: int) -> Iterator[EnvelopePair]:
    for n in range(pairs[0].level, up_to + 1):
        yield fill_in(pairs, n)


@dataclass
class SeriesForm:
    """Nonnegative increments of g and of 1 - h along the rungs."""

    levels: list[int]
    lower_terms: list[BernsteinPoly]
    upper_terms: list[BernsteinPoly]


def to_series(pairs: Sequence[EnvelopePair]) -> SeriesForm:
    lower, upper = [], []
    prev = None
    for p in pairs:
        comp = 1 - p.upper
        comp = elevate(comp, p.level)
        if prev is None:
            lower.append(p.lower)
            upper.append(comp)
        else:
            lower.append(elevate(sub(p.lower, prev.lower), p.level))
            upper.append(elevate(sub(comp, 1 - prev.upper), p.level))
        prev = p
    series = SeriesForm([p.level for p in pairs], lower, upper)
    _check_series(series)
    return series


def _check_series(series: SeriesForm) -> None:
    for level, lo, up in zip(series.levels, series.lower_terms, series.upper_terms):
        if any(s < 0 for s in lo.scaled) or any(s < 0 for s in up.scaled):
            raise InvalidSeriesError(f"negative series coefficient at level {level}")


def from_series(series: SeriesForm) -> list[EnvelopePair]:
    _check_series(series)
    pairs = []
    lo_acc = up_acc = None
    for level, lo, up in zip(series.levels, series.lower_terms, series.upper_terms):
        lo_acc = lo if lo_acc is None else elevate(lo_acc, level) + lo
        up_acc = up if up_acc is None else elevate(up_acc, level) + up
        g = elevate(lo_acc, level)
        h = elevate(1 - up_acc, level)
        kind = "dyadic" if g.is_dyadic() and h.is_dyadic() else "raw"
        pairs.append(EnvelopePair(level, g, h, kind))
    return pairs


def rounding_overhead(raw: EnvelopePair, rounded: EnvelopePair, slack) -> tuple[bool, Fraction]:
    """Whether every coefficient of the gap grew by at most 2 slack + 2^(1-n), and the largest growth."""
    n = raw.level
    growth = sub(rounded.gap(), raw.gap())
    bound = 2 * as_fraction(slack) + Fraction(2, 1 << n)
    worst = max(growth.coeffs)
    return min(growth.coeffs) >= 0 and worst <= bound, worst


def loglog_slope(ns: Sequence[float], values: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)
    return float(slope)


def rate_table(pairs: Sequence[EnvelopePair], alpha, points: Sequence) -> list[dict]:
    """gap(x)/Δ_n(x)^α for each rung and point (floats, diagnostics only)."""
    alpha = float(as_fraction(alpha))
    rows = []
    for p in pairs:
        n = p.level
        for x in points:
            x = as_fraction(x)
            gap = float(evaluate(p.gap(), x))
            d = max(math.sqrt(float(x * (1 - x)) / n), 1.0 / n)
            rows.append({"level": n, "x": float(x), "gap": gap, "ratio": gap / d**alpha})
    return rows
