from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bernfactory.bernstein import BernsteinPoly, bernstein_op, elevate
from bernfactory.errors import ArgumentError
from bernfactory.lorentz import (
    DifferenceOracle,
    PolyOracle,
    coefficient_bound_report,
    degree_in_n,
    degree_in_x,
    derivative_bound_ratio,
    lorentz_apply,
    moment_direct,
    moment_poly,
    moment_symbolic,
    simultaneous_approximation_ratio,
    tau_poly,
    tau_symbolic,
)
from bernfactory.target import PolynomialOracle, get_target, hoelder_family


def trim(coeffs):
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def same_poly(p: BernsteinPoly, q: BernsteinPoly) -> bool:
    d = max(p.degree, q.degree)
    return elevate(p, d).coeffs == elevate(q, d).coeffs


class TestMoments:
    @pytest.mark.parametrize("n", [1, 2, 7, 30])
    def test_low_orders(self, n):
        assert trim(moment_poly(n, 0).coeffs) == (1,)
        assert all(c == 0 for c in moment_poly(n, 1).coeffs)

    @pytest.mark.parametrize("n", range(1, 31))
    def test_recurrence_matches_direct_sum(self, n):
        for j in range(7):
            assert trim(moment_poly(n, j).coeffs) == trim(moment_direct(n, j))

    @given(st.integers(1, 40), st.integers(0, 7), st.fractions(0, 1, max_denominator=100))
    def test_reflection(self, n, j, x):
        t = moment_poly(n, j)
        assert t(1 - x) == (-1) ** j * t(x)

    def test_second_moment_is_variance(self):
        t = moment_poly(12, 2)
        assert t(F(1, 3)) == 12 * F(1, 3) * F(2, 3)

    def test_rejects_bad_n(self):
        with pytest.raises(ArgumentError):
            moment_poly(0, 2)


class TestTau:
    @pytest.mark.parametrize("n", [1, 5, 64])
    def test_base_cases(self, n):
        assert trim(tau_poly(0, n).coeffs) == (1,)
        assert all(c == 0 for c in tau_poly(1, n).coeffs)

    @pytest.mark.parametrize("n", [3, 10, 100])
    def test_second_order(self, n):
        expected = (F(0), F(-n, 2), F(n, 2))
        assert trim(tau_poly(2, n).coeffs) == expected

    @pytest.mark.parametrize("j", range(9))
    def test_degrees(self, j):
        sym = tau_symbolic(j)
        assert degree_in_x(sym) <= j
        assert degree_in_n(sym) <= j // 2

    @pytest.mark.parametrize("j", range(2, 9))
    @pytest.mark.parametrize("n", [2, 9, 50])
    def test_homogeneous_symmetry(self, j, n):
        a = tau_poly(j, n).homogeneous()
        assert len(a) == j + 1
        assert all(abs(a[i]) == abs(a[j - i]) for i in range(j + 1))

    def test_moment_symbolic_rejects_negative(self):
        with pytest.raises(ArgumentError):
            moment_symbolic(-1)


def monomial_oracle(d: int, order: int) -> PolynomialOracle:
    return PolynomialOracle([0] * d + [1], order=order)


class TestLorentzApply:
    @pytest.mark.parametrize("r", [0, 1])
    @pytest.mark.parametrize("n", [3, 8, 17])
    def test_low_order_is_bernstein_operator(self, r, n):
        oracle = PolynomialOracle([F(1, 3), F(-2), F(5, 7), F(1)], order=4)
        q = lorentz_apply(oracle, n, r)
        b = bernstein_op(oracle.samples(n, 0, 64), n)
        assert q.degree == n + r
        assert same_poly(q, b)

    @pytest.mark.parametrize("n", [1, 4, 11, 30])
    def test_reproduces_square(self, n):
        q = lorentz_apply(monomial_oracle(2, 2), n, 2)
        assert same_poly(q, BernsteinPoly.from_monomial([0, 0, 1]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 4), st.integers(1, 30), st.data())
    def test_reproduces_monomials_up_to_r(self, r, n, data):
        d = data.draw(st.integers(0, r))
        q = lorentz_apply(monomial_oracle(d, r), n, r)
        assert same_poly(q, BernsteinPoly.from_monomial([0] * d + [1]))

    def test_cube_residual_decreases(self):
        cube = monomial_oracle(3, 2)
        target = BernsteinPoly.from_monomial([0, 0, 0, 1])
        xs = [F(i, 64) for i in range(65)]
        residuals = []
        for n in (10, 20, 40):
            q = lorentz_apply(cube, n, 2)
            assert not same_poly(q, target)
            residuals.append(max(abs(q(x) - target(x)) for x in xs))
        assert residuals[0] > residuals[1] > residuals[2]

    def test_difference_oracle_of_itself_is_zero(self):
        # f - p with f = p has all-zero samples.
        poly = BernsteinPoly.from_monomial([F(1, 2), F(1, 3), F(-1, 5)])
        oracle = PolyOracle(poly, order=2)
        q = lorentz_apply(DifferenceOracle(oracle, poly), 9, 2)
        assert all(c == 0 for c in q.coeffs)

    def test_order_check(self):
        with pytest.raises(ArgumentError):
            lorentz_apply(hoelder_family(F(1, 2)).oracle, 8, 1)
        with pytest.raises(ArgumentError):
            lorentz_apply(monomial_oracle(1, 2), 0, 1)

    def test_inexact_oracle_close_to_float(self):
        f = hoelder_family(F(3, 2))
        q = lorentz_apply(f.oracle, 16, 1)
        b = bernstein_op([F(f(k / 16)) for k in range(17)], 16)
        x = F(3, 10)
        assert abs(float(q(x)) - float(b(x))) < 1e-12


class TestDiagnostics:
    def test_trivial_orders(self):
        for row in coefficient_bound_report([4, 16, 64], 0):
            assert row.coefficient_ratio == 1.0
            assert row.sup_ratio == pytest.approx(1.0)
        for row in coefficient_bound_report([4, 16, 64], 1):
            assert row.coefficient_ratio == 0.0
            assert row.sup_ratio == 0.0

    @pytest.mark.parametrize("j", [2, 3, 4])
    def test_ratios_bounded_across_doublings(self, j):
        rows = coefficient_bound_report([4 << k for k in range(7)], j)
        assert rows[-1].coefficient_ratio <= 4 * rows[0].coefficient_ratio
        assert rows[-1].sup_ratio <= 4 * rows[0].sup_ratio

    @pytest.mark.parametrize("name", ["holder-1/2", "holder-3/2", "cubic"])
    def test_simultaneous_approximation_bounded(self, name):
        f = get_target(name)
        for j in range(f.r + 1):
            ratios = [simultaneous_approximation_ratio(f.oracle, f.alpha, n, f.r, j, grid=257) for n in (16, 32, 64, 128, 256)]
            for a, b in zip(ratios, ratios[1:]):
                assert b <= 2 * a + 1e-9

    @pytest.mark.parametrize("name", ["holder-1/2", "holder-3/2"])
    def test_derivative_bound_bounded(self, name):
        f = get_target(name)
        ratios = [derivative_bound_ratio(f.oracle, f.alpha, n, f.r, grid=257) for n in (16, 32, 64, 128, 256)]
        for a, b in zip(ratios, ratios[1:]):
            assert b <= 2 * a
