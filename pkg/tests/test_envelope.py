import json
import math
from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bernfactory._exact import binomial_row
from bernfactory.bernstein import (
    BernsteinPoly,
    EnvelopePair,
    elevate,
    evaluate,
    leq_order,
    sub,
)
from bernfactory.envelope import (
    D_FLOOR,
    LadderParams,
    SeriesForm,
    build_envelopes,
    build_fn_ladder,
    certify,
    default_gamma,
    domination_check,
    fill_in,
    fill_in_levels,
    from_series,
    ladder_from_json,
    loglog_slope,
    phi_poly,
    rate_table,
    rounding_overhead,
    rungs_to_params,
    to_series,
)
from bernfactory.errors import ArgumentError, ConstructionFailure, ContractError, InvalidSeriesError, PrecisionError
from bernfactory.lorentz import lorentz_apply
from bernfactory.target import PolynomialOracle, TargetFunction, catalog, get_target

GRID = [F(i, 512) for i in range(513)]


@pytest.fixture(scope="module")
def ladders():
    return {t.identifier: build_envelopes(t) for t in catalog()}


def sup_residual(f, fn):
    return max(abs(F(f(float(x))) - fn(x)) for x in GRID[::8])


class TestParams:
    def test_defaults(self):
        p = LadderParams(alpha=F(3, 2))
        assert p.r == 1
        assert p.rungs == [16, 64, 256]
        assert 0 < p.resolved_gamma < 2 ** (0.75) - 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alpha": F(2)},
            {"alpha": F(1, 2), "b": 3},
            {"alpha": F(1, 2), "b": 1},
            {"alpha": F(1, 2), "theta": F(1, 2)},
            {"alpha": F(1, 2), "D": F(0)},
            {"alpha": F(1, 2), "gamma": F(1, 2)},
            {"alpha": F(1, 2), "n0": 0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ArgumentError):
            LadderParams(**kwargs)

    @pytest.mark.parametrize("alpha", [F(1, 2), F(3, 2), F(5, 2), F(1, 3), F(7, 4)])
    def test_default_gamma_below_limit(self, alpha):
        g = default_gamma(alpha)
        assert 0 < g < (2 ** (float(alpha) / 2) - 1) / 4

    def test_json_round_trip(self):
        p = LadderParams(alpha=F(5, 2), n0=8, b=2, levels=4, D=F(3, 7))
        assert LadderParams.from_json(json.loads(json.dumps(p.to_json()))) == replace_gamma(p)

    def test_rungs_to_params(self):
        p = rungs_to_params([16, 64, 256], F(1, 2))
        assert (p.n0, p.b, p.levels) == (16, 4, 3)
        assert rungs_to_params([32], F(1, 2)).rungs == [32]
        with pytest.raises(ArgumentError):
            rungs_to_params([16, 64, 128], F(1, 2))
        with pytest.raises(ArgumentError):
            rungs_to_params([], F(1, 2))


def replace_gamma(p):
    from dataclasses import replace

    return replace(p, gamma=p.resolved_gamma)


class TestFnLadder:
    def test_first_rung_is_lorentz(self):
        f = get_target("holder-3/2")
        params = LadderParams(alpha=f.alpha, levels=2)
        fs = build_fn_ladder(f, params)
        assert fs[0] == lorentz_apply(f.oracle, 16, 1, params.sample_bits(16))
        assert [p.degree for p in fs] == [17, 65]

    def test_low_degree_polynomial_reproduced(self):
        oracle = PolynomialOracle([F(1, 3), F(1, 4)])
        f = TargetFunction("affine", F(3, 2), F(1, 8), oracle, None, "", oracle.bernstein())
        for fn in build_fn_ladder(f, LadderParams(alpha=F(3, 2))):
            assert elevate(oracle.bernstein(), fn.degree) == fn

    @pytest.mark.parametrize("name", ["linear", "cubic", "holder-1/2", "holder-3/2", "holder-5/2"])
    def test_residual_decreases(self, ladders, name):
        f = get_target(name)
        res = [sup_residual(f, fn) for fn in ladders[name].fs]
        assert all(b <= a for a, b in zip(res, res[1:]))

    @pytest.mark.parametrize("name", ["cubic", "holder-1/2", "holder-3/2", "holder-5/2"])
    def test_coefficients_inside_margin(self, ladders, name):
        lad = ladders[name]
        d = lad.params.delta
        for fn in lad.fs:
            assert all(d <= c <= 1 - d for c in fn.coeffs)


class TestPhi:
    def test_endpoint(self):
        params = LadderParams(alpha=F(1, 2), theta=F(3))
        for side in ("upper", "lower"):
            p = phi_poly(16, params, side)
            assert p.coeffs[0] == p.coeffs[-1] == F(3, 4)

    def test_midpoint_enclosure(self):
        params = LadderParams(alpha=F(1, 2))
        lo = phi_poly(16, params, "lower").coeffs[8]
        hi = phi_poly(16, params, "upper").coeffs[8]
        exact = 0.25 + 2**-1.5
        assert lo <= hi
        assert float(lo) <= exact <= float(hi)
        assert hi - lo <= F(1, 1 << 22)

    @pytest.mark.parametrize("n", [5, 16, 33])
    def test_symmetry(self, n):
        c = phi_poly(n, LadderParams(alpha=F(3, 2))).coeffs
        assert all(c[k] == c[n - k] for k in range(n + 1))

    def test_bad_side(self):
        with pytest.raises(ArgumentError):
            phi_poly(4, LadderParams(alpha=F(1, 2)), "middle")


def mpf(q):
    q = F(q)
    return mpmath.mpf(q.numerator) / q.denominator


def phi_true(n, x, alpha, theta):
    return theta / mpmath.mpf(n) ** alpha + (x * (1 - x) / n) ** (alpha / 2)


def domination_holds(n, params):
    mpmath.mp.dps = 40
    a, th, g = mpf(params.alpha), mpf(params.theta), mpf(params.resolved_gamma)
    rn, r2 = binomial_row(n), binomial_row(2 * n)
    for k in range(2 * n + 1):
        lhs = sum(
            mpmath.mpf(rn[j] * rn[k - j]) / r2[k] * phi_true(n, mpmath.mpf(j) / n, a, th)
            for j in range(max(0, k - n), min(k, n) + 1)
        )
        if lhs < (1 + g) * phi_true(2 * n, mpmath.mpf(k) / (2 * n), a, th):
            return False
    return True


class TestDomination:
    def test_half_at_eight(self):
        assert domination_check(8, LadderParams(alpha=F(1, 2), theta=F(8), gamma=F(1, 10)))

    @pytest.mark.parametrize("alpha", [F(1, 2), F(3, 2), F(5, 2)])
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 6, 8, 12])
    def test_verdict_never_unsound(self, alpha, n):
        params = LadderParams(alpha=alpha)
        try:
            verdict = domination_check(n, params)
        except PrecisionError:
            return
        if verdict:
            assert domination_holds(n, params)

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_aggressive_gamma_fails(self, n):
        # γ close to its limit with θ = 1 is too little padding at small n.
        params = LadderParams(alpha=F(1, 2), gamma=F(187, 1000))
        assert domination_check(n, params) is False
        assert not domination_holds(n, params)


class TestBuild:
    @pytest.mark.parametrize("name", ["linear", "cubic", "holder-1/2", "holder-3/2", "holder-5/2"])
    def test_catalog_certifies(self, ladders, name):
        lad = ladders[name]
        assert lad.certification.ok
        assert all(p.kind == "dyadic" and p.is_dyadic() for p in lad.pairs)
        assert [p.level for p in lad.pairs] == [n + lad.params.r for n in lad.rungs]
        assert certify(lad.pairs, get_target(name)).ok

    def test_polynomial_targets_exact(self, ladders):
        for name in ("linear", "cubic"):
            assert {c.sandwich for c in ladders[name].certification.rungs} == {"exact"}
        assert ladders["linear"].params.D >= D_FLOOR

    @pytest.mark.parametrize("name", ["cubic", "holder-1/2", "holder-3/2"])
    def test_gap_identity(self, ladders, name):
        lad = ladders[name]
        for raw, psi in zip(lad.raw, lad.psis):
            assert raw.gap() == psi * (2 * lad.params.D)

    @pytest.mark.parametrize("name", ["cubic", "holder-1/2", "holder-3/2", "holder-5/2"])
    def test_gap_rate_bounded(self, ladders, name):
        lad = ladders[name]
        alpha = lad.params.alpha
        ratios = []
        for n, p in zip(lad.rungs, lad.pairs):
            pts = [F(1, 3), F(1, 2), F(0), F(1, n), F(1, math.isqrt(n))]
            ratios.append(max(r["ratio"] for r in rate_table([p], alpha, pts)))
        assert ratios[-1] <= 2 * ratios[0]

    @pytest.mark.parametrize("name", ["holder-1/2", "holder-3/2", "holder-5/2"])
    def test_endpoint_rate(self, ladders, name):
        lad = ladders[name]
        consts = [float(evaluate(p.gap(), 0)) * n ** float(lad.params.alpha) for n, p in zip(lad.rungs, lad.pairs)]
        assert max(consts) <= 2 * min(consts)

    @pytest.mark.parametrize("name", ["holder-1/2", "holder-3/2", "holder-5/2"])
    def test_consistency_exact(self, ladders, name):
        pairs = ladders[name].pairs
        for prev, cur in zip(pairs, pairs[1:]):
            n = cur.level
            assert all(s >= 0 for s in elevate(sub(cur.lower, prev.lower), n).scaled)
            assert all(s >= 0 for s in elevate(sub(prev.upper, cur.upper), n).scaled)

    @pytest.mark.parametrize("name", ["cubic", "holder-1/2", "holder-3/2", "holder-5/2"])
    def test_rounding_overhead(self, ladders, name):
        lad = ladders[name]
        for raw, rounded in zip(lad.raw, lad.pairs):
            ok, worst = rounding_overhead(raw, rounded, lad.params.slack(raw.level))
            assert ok, worst

    def test_escalates_n0(self):
        f = get_target("holder-1/2")
        lad = build_envelopes(f, LadderParams(alpha=f.alpha, n0=2, levels=2), check_domination=False)
        assert lad.params.n0 > 2
        assert lad.attempts[0].startswith("rejected")
        assert lad.attempts[-1].startswith("accepted")
        assert lad.certification.ok

    def test_retry_budget(self):
        f = get_target("holder-1/2")
        with pytest.raises(ConstructionFailure) as info:
            build_envelopes(f, LadderParams(alpha=f.alpha, n0=2, levels=2, retries=0))
        assert info.value.condition == "i"

    def test_given_d_too_small_fails(self):
        f = get_target("holder-1/2")
        with pytest.raises(ConstructionFailure) as info:
            build_envelopes(f, LadderParams(alpha=f.alpha, levels=2, D=F(1, 1 << 30), retries=0))
        assert info.value.condition in ("iii", "iv")

    def test_alpha_override_below_smoothness(self):
        f = get_target("holder-3/2")
        lad = build_envelopes(f, LadderParams(alpha=F(1, 2), levels=2))
        assert lad.params.r == 0 and lad.certification.ok

    def test_manifest_round_trip(self, ladders):
        lad = ladders["holder-3/2"]
        text = json.dumps(lad.to_json())
        loaded = ladder_from_json(json.loads(text))
        assert loaded.pairs == lad.pairs
        assert loaded.params.D == lad.params.D
        assert loaded.certification["ok"] is True

    def test_manifest_rejects_garbage(self):
        with pytest.raises(ContractError):
            ladder_from_json({"format": "other"})
        with pytest.raises(ContractError):
            ladder_from_json({"format": "bernfactory-ladder/1", "params": {"alpha": "1/2"}})


class TestCertify:
    def test_reports_range_violation(self):
        lo = BernsteinPoly([0, F(1, 2), 0])
        up = BernsteinPoly([F(1, 2), F(1, 4), 1])
        report = certify([EnvelopePair(2, lo, up)], require_dyadic=False)
        v = report.first()
        assert (v.condition, v.level, v.k) == ("i", 2, 1)

    def test_reports_consistency_violation(self):
        a = EnvelopePair(1, BernsteinPoly([F(1, 2), F(1, 2)]), BernsteinPoly([F(1, 2), F(1, 2)]))
        b = EnvelopePair(2, BernsteinPoly([F(1, 4)] * 3), BernsteinPoly([F(3, 4)] * 3))
        report = certify([a, b], require_dyadic=False)
        assert report.first().condition == "iv"

    def test_reports_non_dyadic(self):
        p = EnvelopePair(2, BernsteinPoly([F(1, 3)] * 3), BernsteinPoly([F(2, 3)] * 3), "dyadic")
        assert [v.condition for v in certify([p]).violations] == ["ii'"]

    def test_exact_branch_for_square(self):
        sq = PolynomialOracle([0, 0, 1])
        f = TargetFunction("square", F(3, 2), F(1, 16), sq, None, "", sq.bernstein())
        n = 8
        fn = elevate(sq.bernstein(), n)
        pair = EnvelopePair(n, fn - F(1, 64), fn + F(1, 64))
        report = certify([pair], f, require_dyadic=False)
        assert report.rungs[0].sandwich == "exact"
        assert leq_order(pair.lower, sq.bernstein(), n)

    def test_grid_branch_catches_crossing(self):
        f = get_target("holder-1/2")
        pair = EnvelopePair(4, BernsteinPoly([F(3, 5)] * 5), BernsteinPoly([F(3, 4)] * 5))
        report = certify([pair], f, grid_points=65, require_dyadic=False)
        assert report.first().condition == "iii"


class TestFillIn:
    def test_rung_unchanged_and_one_step(self, ladders):
        pairs = ladders["holder-1/2"].pairs
        assert fill_in(pairs, 16) is pairs[0]
        step = fill_in(pairs, 17)
        assert step.lower == elevate(pairs[0].lower, 17)
        assert step.kind == "filled-in"
        with pytest.raises(ArgumentError):
            fill_in(pairs, 15)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(16, 300), st.fractions(0, 1, max_denominator=97))
    def test_gap_constant_between_rungs(self, ladders, n, x):
        pairs = ladders["holder-1/2"].pairs
        base = max((p for p in pairs if p.level <= n), key=lambda p: p.level)
        assert evaluate(fill_in(pairs, n).gap(), x) == evaluate(base.gap(), x)

    def test_filled_sequence_certifies(self, ladders):
        pairs = ladders["holder-1/2"].pairs
        seq = list(fill_in_levels(pairs, 70))
        assert len(seq) == 70 - 16 + 1
        assert certify(seq, require_dyadic=False).ok


class TestSeries:
    def test_round_trip(self, ladders):
        pairs = ladders["holder-3/2"].pairs
        series = to_series(pairs)
        assert from_series(series) == pairs

    def test_single_rung(self, ladders):
        pair = ladders["holder-1/2"].pairs[0]
        series = to_series([pair])
        assert series.lower_terms == [pair.lower]

    def test_partial_sums_telescope(self, ladders):
        pairs = ladders["holder-1/2"].pairs
        series = to_series(pairs)
        acc = series.lower_terms[0]
        for term, pair in zip(series.lower_terms[1:], pairs[1:]):
            acc = elevate(acc, term.degree) + term
            assert acc == pair.lower

    def test_tail_bounded_by_gap(self, ladders):
        pairs = ladders["holder-1/2"].pairs
        series = to_series(pairs)
        for m, pair in enumerate(pairs):
            for x in GRID[::16]:
                tail = sum((evaluate(t, x) for t in series.lower_terms[m + 1 :]), F(0))
                assert tail <= evaluate(pair.gap(), x)

    def test_negative_term_rejected(self):
        bad = SeriesForm([1], [BernsteinPoly([F(-1, 2), F(1, 2)])], [BernsteinPoly([0, 0])])
        with pytest.raises(InvalidSeriesError):
            from_series(bad)


def test_loglog_slope():
    assert loglog_slope([1, 2, 4, 8], [1, 0.5, 0.25, 0.125]) == pytest.approx(-1)
