"""End-to-end acceptance checks; each test records one PASS/FAIL line."""

import random
import time
from fractions import Fraction as F

import pytest

from bernfactory._exact import binomial_row, convolve
from bernfactory.bernstein import BernsteinPoly, EnvelopePair, delta_n, elevate, evaluate, leq_order, sub
from bernfactory.counterexample import build_counterexample, divergence_report, rate_ratio, rate_sweep
from bernfactory.envelope import LadderParams, build_envelopes, loglog_slope, rounding_overhead
from bernfactory.errors import ArgumentError, EmptyConstructionError
from bernfactory.lorentz import degree_in_n, degree_in_x, lorentz_apply, moment_direct, moment_poly, tau_poly, tau_symbolic
from bernfactory.simulator import exhaustive_oracle, monte_carlo_tails, wilson_interval
from bernfactory.target import PolynomialOracle, catalog

PS = (0.1, 0.3, 0.5, 0.7, 0.9)
REPS = 100_000


@pytest.fixture(scope="session")
def deep_ladders():
    """Five-rung ladders 16, 64, ..., 4096 for every catalog target."""
    out = {}
    for f in catalog():
        params = LadderParams(alpha=f.alpha, levels=5)
        out[f.identifier] = build_envelopes(f, params, check_domination=False)
    return out


@pytest.fixture(scope="session")
def deep_stats(deep_ladders):
    return {name: monte_carlo_tails(lad, PS, REPS, seed=20240) for name, lad in deep_ladders.items()}


def test_criterion_1_exact_certification(verdicts):
    notes, ok = [], True
    for f in catalog():
        for alpha in (F(1, 2), F(3, 2)):
            try:
                g = f.with_alpha(alpha)
            except ArgumentError:
                notes.append(f"{f.identifier}@{alpha} inadmissible")
                continue
            start = time.perf_counter()
            lad = build_envelopes(g, LadderParams(alpha=alpha))
            elapsed = time.perf_counter() - start
            certs = lad.certification.rungs
            good = (
                lad.certification.ok
                and lad.params.rungs == [16, 64, 256]
                and all(c.range_ok and c.dyadic and c.consistency is not False for c in certs)
                and all(c.sandwich in ("exact", "grid-certified") for c in certs)
                and lad.params.grid_points == 1024
                and elapsed <= 300
            )
            ok &= good
            notes.append(f"{f.identifier}@{alpha} {'ok' if good else 'bad'} {elapsed:.1f}s")
    verdicts.record(1, ok, "; ".join(notes))


def _trim(coeffs) -> tuple:
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def test_criterion_2_lorentz_oracles(verdicts):
    start = time.perf_counter()
    moments = all(_trim(moment_poly(n, j).coeffs) == _trim(moment_direct(n, j)) for n in range(1, 31) for j in range(7))
    reproduction = True
    for n in range(1, 31):
        for r in range(4):
            for d in range(r + 1):
                q = lorentz_apply(PolynomialOracle([0] * d + [1], order=r), n, r)
                mono = BernsteinPoly.from_monomial([0] * d + [1])
                top = max(q.degree, mono.degree)
                reproduction &= elevate(q, top).coeffs == elevate(mono, top).coeffs
    elapsed = time.perf_counter() - start
    ok = moments and reproduction and elapsed <= 60
    verdicts.record(2, ok, f"moment recurrence={moments} monomial reproduction={reproduction} in {elapsed:.1f}s")


def _random_two_rung_ladder(rng: random.Random, top: int = 6) -> list[EnvelopePair]:
    m = rng.randint(1, top - 1)
    n = rng.randint(m + 1, top)
    acc, up = [], []
    for t in (c << m for c in binomial_row(m)):
        a = rng.randint(0, t)
        acc.append(a)
        up.append(rng.randint(a, t))
    d = n - m
    inh1 = [x << d for x in convolve(acc, binomial_row(d))]
    inh_up = [x << d for x in convolve(up, binomial_row(d))]
    acc_n, up_n = [], []
    for a, u in zip(inh1, inh_up):
        e1 = rng.randint(0, u - a)
        e0 = rng.randint(0, u - a - e1)
        acc_n.append(a + e1)
        up_n.append(u - e0)

    def pair(level, lo, hi):
        unit = 1 << level
        return EnvelopePair(level, BernsteinPoly.from_scaled(level, lo, unit), BernsteinPoly.from_scaled(level, hi, unit), "dyadic")

    return [pair(m, acc, up), pair(n, acc_n, up_n)]


def test_criterion_3_exhaustive_oracle(verdicts):
    start = time.perf_counter()
    notes, ok = [], True
    for f in catalog():
        n0 = 1 if f.identifier == "holder-1/2" else 2
        lad = build_envelopes(f, LadderParams(alpha=f.alpha, n0=n0, b=2, levels=2, slack_factor=F(1, 64)), check_domination=False)
        report = exhaustive_oracle(lad.pairs, max_level=8)
        ok &= report.ok
        notes.append(f"{f.identifier} levels {lad.levels}")
    rng = random.Random(7)
    random_ok = all(exhaustive_oracle(_random_two_rung_ladder(rng)).ok for _ in range(150))
    ok &= random_ok
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 60
    verdicts.record(3, ok, f"{', '.join(notes)}; 150 random ladders ok={random_ok}; {elapsed:.1f}s")


def test_criterion_4_unbiasedness(verdicts, deep_ladders, deep_stats):
    misses = []
    for f in catalog():
        for c in deep_stats[f.identifier].curves:
            lo, hi = c.output_interval(3.0)
            if not lo <= f(c.p) <= hi:
                misses.append(f"{f.identifier}@{c.p}: {c.output_frequency():.4f} vs {f(c.p):.4f} ({c.timeouts} timeouts)")
    detail = "all 25 frequencies inside 3 Wilson sigma" if not misses else "; ".join(misses)
    verdicts.record(4, not misses, detail)


def test_criterion_5_rate_shape(verdicts, deep_ladders, deep_stats):
    notes, ok = [], True
    for name, lad in deep_ladders.items():
        alpha = float(lad.params.alpha)
        ns = lad.levels
        mid = [float(evaluate(p.gap(), F(1, 2))) for p in lad.pairs]
        end = [float(p.gap().coeffs[0]) for p in lad.pairs]
        s_mid, s_end = loglog_slope(ns, mid), loglog_slope(ns, end)
        curve = deep_stats[name].curve(0.5)
        bands = [wilson_interval(s, curve.replications, 3.0) for s in curve.survivors]
        covered = all(lo <= g <= hi for g, (lo, hi) in zip(mid, bands))
        good = abs(s_mid + alpha / 2) <= 0.15 and abs(s_end + alpha) <= 0.15 and covered
        ok &= good
        notes.append(f"{name} mid {s_mid:.2f}/{-alpha / 2:.2f} end {s_end:.2f}/{-alpha:.2f} mc {'ok' if covered else 'off'}")
    verdicts.record(5, ok, "; ".join(notes))


def test_criterion_6_rounding_overhead(verdicts, deep_ladders):
    ok, worst = True, 0.0
    for lad in deep_ladders.values():
        for raw, rounded in zip(lad.raw, lad.pairs):
            slack = lad.params.slack(raw.level)
            good, growth = rounding_overhead(raw, rounded, slack)
            ok &= good
            worst = max(worst, float(growth / (2 * slack + F(2, 1 << raw.level))))
        for prev, cur in zip(lad.pairs, lad.pairs[1:]):
            n = cur.level
            ok &= leq_order(prev.lower, cur.lower, n) and leq_order(cur.upper, prev.upper, n)
    verdicts.record(6, ok, f"largest growth / allowance = {worst:.3f}; consistency re-certified on the dyadic ladders")


def test_criterion_7_counterexample(verdicts):
    start = time.perf_counter()
    alpha = F(1, 2)
    parts = []
    cx = build_counterexample(alpha, 2**76)
    ratio = rate_ratio(rate_sweep(cx, points=257))
    rate_ok = ratio <= 2
    parts.append(f"rate ratio {ratio:.3f} over n in {cx.scales[0]}..{cx.scales[-2]}")
    try:
        small = build_counterexample(alpha, 2**10)
        report = divergence_report(small, scales=[1 << j for j in range(5, 11)])
        probe_ok = report.increasing and report.growth() >= 5
        parts.append(f"probe growth {report.growth():.2f}")
    except EmptyConstructionError as exc:
        probe_ok = False
        parts.append(f"probe scales 2^5..2^10 unavailable: {exc}")
        early = divergence_report(cx, scales=cx.scales[:6], points=17)
        parts.append(f"at the first six admissible scales growth is {early.growth():.2f}, increasing={early.increasing}")
    elapsed = time.perf_counter() - start
    verdicts.record(7, rate_ok and probe_ok and elapsed <= 300, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_criterion_8_lemma_suites(verdicts):
    rng = random.Random(99)
    delta_ok = True
    for _ in range(10_000):
        n = rng.randint(1, 10**6)
        x = F(rng.randint(0, 10**6), 10**6)
        xi = F(rng.randint(0, 10**6), 10**6)
        dx_lo, dx_hi = delta_n(x, n, 48)
        dxi_lo, dxi_hi = delta_n(xi, n, 48)
        delta_ok &= max(dxi_hi / dx_lo, dx_hi / dxi_lo) <= 2 * (1 + abs(x - xi) / dx_hi)
        delta_ok &= delta_n(1 - x, n, 48) == (dx_lo, dx_hi)
    tau_ok = True
    for j in range(9):
        sym = tau_symbolic(j)
        tau_ok &= degree_in_x(sym) <= j and degree_in_n(sym) <= j // 2
        for n in (2, 9, 50):
            a = tau_poly(j, n).homogeneous()
            tau_ok &= all(abs(a[i]) == abs(a[j - i]) for i in range(j + 1))
    order_ok = True
    for _ in range(300):
        n = rng.randint(0, 8)
        q = BernsteinPoly([F(rng.randint(-50, 50), rng.randint(1, 20)) for _ in range(n + 1)])
        r = q + BernsteinPoly([F(rng.randint(0, 30), rng.randint(1, 20)) for _ in range(n + 1)])
        extra = rng.randint(0, 10)
        order_ok &= leq_order(q, r, n) and leq_order(q, r, n + extra)
        x = F(rng.randint(0, 100), 100)
        order_ok &= evaluate(elevate(q, n + extra), x) == evaluate(q, x)
        order_ok &= min(sub(elevate(r, n + extra), elevate(q, n + extra)).coeffs) >= 0
    ok = delta_ok and tau_ok and order_ok
    verdicts.record(8, ok, f"delta bound={delta_ok} tau={tau_ok} elevation order={order_ok}")
