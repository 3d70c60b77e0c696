from fractions import Fraction
from math import isqrt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psdio import diophantine as dio
from psdio.diophantine import (
    DEGENERATE,
    LARGEST,
    NON_TRIVIAL,
    SMALLEST,
    TRIVIAL,
    LinearEquation,
    SolutionTuple,
    XEqualsX,
    YEqualsX,
)
from psdio.rigor import Alpha

A32 = Alpha.parse("3/2")
HALF = (Fraction(1, 2), Fraction(1, 2))

# counts from plain triple loops over isqrt(n**3), computed once and frozen
LARGEST_50 = 183
SMALLEST_5 = 25
SMALLEST_8 = 137


class TestEquations:
    def test_parse_and_holds(self):
        eq = LinearEquation.parse("1/2,1/4")
        assert eq.coeffs == (Fraction(1, 2), Fraction(1, 4))
        assert eq.holds(3, (4, 4))
        assert not eq.holds(3, (4, 5))

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            LinearEquation((1, 0))

    def test_rejects_irrational_coefficients(self):
        with pytest.raises(dio.CoefficientNotRational):
            LinearEquation((0.1, 1))

    @pytest.mark.parametrize("coeffs,values,expected", [
        (HALF, (5, 5, 5), TRIVIAL),
        ((1, 1), (25, 9, 16), NON_TRIVIAL),
        ((Fraction(1, 2), Fraction(1, 4)), (3, 4, 4), DEGENERATE),
    ])
    def test_classification(self, coeffs, values, expected):
        eq = LinearEquation(coeffs)
        sol = SolutionTuple(0, (0, 0), values[0], values[1:])
        assert dio.classify_solution(eq, sol) == expected

    def test_classification_requires_solution(self):
        with pytest.raises(dio.EquationViolated):
            dio.classify_solution(LinearEquation((1, 1)), SolutionTuple(0, (0, 0), 25, (9, 15)))

    @pytest.mark.parametrize("coeffs,collision,expected", [
        ((Fraction(1, 2), Fraction(1, 4)), YEqualsX(2), (Fraction(2, 3),)),
        ((1, 1), XEqualsX(1, 2), (Fraction(2),)),
        (HALF, YEqualsX(1), (Fraction(1),)),
    ])
    def test_reduction(self, coeffs, collision, expected):
        assert dio.reduce_equation(LinearEquation(coeffs), collision).coeffs == expected

    def test_invalid_collision(self):
        with pytest.raises(dio.InvalidCollision):
            dio.reduce_equation(LinearEquation((1, 1)), YEqualsX(1))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.fractions(min_value=Fraction(1, 20), max_value=Fraction(19, 20)), min_size=2, max_size=4),
           st.integers(min_value=1, max_value=10**6))
    def test_reduction_preserves_solutions(self, coeffs, v):
        # y = x_1 = v with arbitrary x_2..x_k chosen to satisfy the equation
        eq = LinearEquation(tuple(coeffs))
        xs = [v] + [v] * (len(coeffs) - 1)
        y = sum(a * x for a, x in zip(coeffs, xs))
        if y != v:
            return
        red = dio.reduce_equation(eq, YEqualsX(1))
        assert red.holds(v, xs[1:])


class TestSearch:
    @pytest.mark.parametrize("coeffs", [(1, 1), HALF, (Fraction(1, 2), Fraction(1, 4))])
    @pytest.mark.parametrize("alpha", ["3/2", "7/5"])
    def test_matches_brute_force(self, coeffs, alpha):
        eq, a = LinearEquation(coeffs), Alpha.parse(alpha)
        fast = dio.search_solutions(eq, a, 120)
        assert [s.key() for s in fast] == sorted(s.key() for s in dio.brute_force_solutions(eq, a, 120))

    def test_three_terms(self):
        eq, a = LinearEquation((1, 2, 1)), A32
        fast = {s.key() for s in dio.search_solutions(eq, a, 40)}
        assert fast == {s.key() for s in dio.brute_force_solutions(eq, a, 40)}

    def test_ap_scan_matches_direct_scan(self):
        # r runs up to N; each index q is only bounded by the pruning limit
        vals = [isqrt(n**3) for n in range(1, 121)]
        direct = {(r, (i, j)) for r in range(1, 51) for i in range(1, 121) for j in range(1, 121)
                  if vals[i - 1] + vals[j - 1] == 2 * vals[r - 1]}
        found = {s.key() for s in dio.search_solutions(LinearEquation(HALF), A32, 50)}
        assert found == direct

    def test_preimage_membership_agrees(self):
        eq = LinearEquation(HALF)
        a = Alpha.parse("7/5")
        assert dio.search_solutions(eq, a, 150) == dio.search_solutions(eq, a, 150, membership="preimage")

    def test_parallel_is_identical(self):
        eq = LinearEquation((1, 1))
        assert dio.search_solutions(eq, A32, 300) == dio.search_solutions(eq, A32, 300, jobs=2)

    def test_no_fermat_solutions_at_seven_halves(self):
        sols = dio.search_solutions(LinearEquation((1, 1)), Alpha.parse("7/2"), 1000)
        assert [s for s in sols if s.classification != TRIVIAL] == []

    def test_solutions_satisfy_equation(self):
        eq = LinearEquation((Fraction(2, 3), Fraction(1, 3)))
        for s in dio.search_solutions(eq, Alpha.parse("5/4"), 200):
            assert eq.holds(s.y_value, s.x_values)

    def test_pruning_limit_bounds_solutions(self):
        eq = LinearEquation(HALF)
        for s in dio.search_solutions(eq, A32, 200):
            for a, q in zip(eq.coeffs, s.q):
                assert q < dio.pruning_limit(a, s.r, A32) + 1


class TestCounting:
    def test_small_bound(self):
        assert dio.count_fermat(A32, 2, LARGEST) == 0

    def test_frozen_counts(self):
        assert dio.count_fermat(A32, 50, LARGEST) == LARGEST_50
        assert dio.count_fermat(A32, 5, SMALLEST) == SMALLEST_5
        assert dio.count_fermat(A32, 8, SMALLEST) == SMALLEST_8

    @pytest.mark.parametrize("x", [5, 8, 12])
    @pytest.mark.parametrize("mode", [LARGEST, SMALLEST])
    def test_against_triple_loop(self, x, mode):
        assert dio.count_fermat(A32, x, mode) == dio.brute_force_count(A32, x, mode)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            dio.count_fermat(A32, 10, "both")

    def test_smallest_mode_grows_like_predicted_exponent(self):
        # the min(l, m) < x count follows the x^(alpha(beta-1)+1) law
        pts = [(x, dio.count_fermat(A32, x, SMALLEST)) for x in (25, 50, 100)]
        slope, _, _ = dio.fit_growth_exponent(pts)
        assert abs(slope - 2.5) <= 0.3


class TestFit:
    def test_collinear(self):
        slope, _, resid = dio.fit_growth_exponent([(10, 100), (100, 10000), (1000, 10**6)])
        assert slope == pytest.approx(2.0, abs=1e-12) and resid < 1e-9

    def test_constant(self):
        assert dio.fit_growth_exponent([(10, 5), (20, 5), (40, 5)])[0] == pytest.approx(0.0, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(dio.DegenerateFit):
            dio.fit_growth_exponent([(10, 5), (20, 0)])

    def test_growth_model(self):
        m = dio.GrowthModel.from_alpha(A32)
        assert m.beta == 2.0 and m.predicted_exponent == 2.5
        assert m.zeta_beta == pytest.approx(1.6449340668482264, abs=1e-12)

    def test_zeta(self):
        v, err = dio.zeta_certified(3.0)
        assert abs(v - 1.2020569031595942) <= err + 1e-15
