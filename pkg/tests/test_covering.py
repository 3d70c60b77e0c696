import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from psdio import covering as cv
from psdio.covering import CoveringParams
from psdio.diophantine import LinearEquation, SolutionTuple, search_solutions
from psdio.envelope import CASE1, CASE2, CASE332, ALL_CASES, CoverInterval
from psdio.rigor import Alpha

F = Fraction


def params(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return CoveringParams(*args, **kw)


class TestParams:
    @pytest.mark.parametrize("b,beta,gamma,expected", [
        (1, 4, 8, 1.0),
        (F(1, 2), 4, 8, 2 ** 0.25),
        (4, 4, 8, 4 ** -0.125),
    ])
    def test_pruning_bound(self, b, beta, gamma, expected):
        assert cv.pruning_bound(b, beta, gamma) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("bad", [(1, 4, 3, 5, 8), (1, 0.9, 3, 5, 8), (1, 4, 5, 5, 8), (1, 4, 5, 6, 6)])
    def test_ordering_enforced(self, bad):
        b, beta, s, t, gamma = bad
        with pytest.raises(ValueError):
            CoveringParams((b,), beta, s, t, gamma)

    def test_radius_range(self):
        with pytest.raises(ValueError):
            CoveringParams((1, 1), 4, 4.5, 5, 8, M=10, R=5)

    def test_window_raises_start_radius(self):
        with pytest.warns(UserWarning, match="raising M"):
            p = CoveringParams((1, 1), 4, 4.5, 5, 8, M=2, R=50)
        assert p.M == 3 and all(p.window_ok(r) for r in range(p.M, p.R + 1))

    def test_broadcast_coefficient(self):
        p = params((1,), 4, 4.5, 5, 8, k=3)
        assert p.b == (1, 1, 1) and p.k == 3

    def test_threshold_reference(self):
        assert params((1, 1), 5, 5.5, 6, 10).threshold_reference == pytest.approx(0.6)
        assert params((F(1, 2), F(1, 2)), 14, 15, 16, 30).threshold_reference == pytest.approx(6 / 10)
        assert params((F(1, 4), F(1, 4)), 4, 4.5, 5, 8).threshold_reference == pytest.approx(0.75)

    def test_min_r_report_keys(self):
        rep = cv.min_r_report(params((1, 1), 4, 4.5, 5, 8, M=5, R=50))
        assert set(rep) == {"band_inside_0_2", "x_window", "diophantine", "index_pruning"}
        assert rep["diophantine"] == math.ceil(2 ** (1 / 0.5))


class TestEnumeration:
    def test_single_term_lower_family(self):
        rows = list(cv.enumerate_covering(params((1,), 4, 4.5, 5, 8, M=5, R=5)))
        assert [ci.q for ci in rows] == [(1,), (2,), (3,), (4,)]

    def test_upper_family_empty_at_three(self):
        p = params((F(1, 2), F(1, 2)), 4, 4.5, 5, 8, M=3, R=3)
        assert 3 * p.B[1] < 4
        assert all(max(ci.q) < 3 for ci in cv.enumerate_covering(p))

    def test_unit_coefficients_only_lower_family(self):
        p = params((1, 1), 4, 4.5, 5, 8, M=5, R=12)
        assert {ci.case_tag for ci in cv.enumerate_covering(p)} == {CASE1}

    def test_order_is_lexicographic(self):
        p = params((1, F(1, 2)), 4, 4.5, 5, 40, M=5, R=9)
        keys = [(ci.r, tuple(int(x > ci.r) for x in ci.q), ci.q) for ci in cv.enumerate_covering(p)]
        assert keys == sorted(keys)

    @pytest.mark.parametrize("b,beta,s,t,gamma,R", [
        ((1, 1), 4, 4.5, 5, 8, 14),
        ((F(1, 2), F(1, 2)), 3, 3.5, 4, 20, 14),
        ((1, F(1, 2)), 4, 4.5, 5, 40, 14),
        ((F(1, 2), F(1, 3), F(1, 4)), 1.5, 2, 3, 6, 7),
    ])
    def test_batch_matches_rigorous(self, b, beta, s, t, gamma, R):
        p = params(b, beta, s, t, gamma, M=5, R=R)
        fast = list(cv.enumerate_covering(p))
        exact = list(cv.enumerate_covering_exact(p))
        assert [(a.r, a.q) for a in fast] == [(x.r, x.q) for x in exact]
        for a, x in zip(fast, exact):
            assert a.case_tag == x.case_tag and a.empty == x.empty
            assert a.diam == pytest.approx(x.diam, rel=1e-8, abs=1e-300)

    def test_every_row_has_one_tag(self):
        p = params((1, F(1, 2)), 4, 4.5, 5, 40, M=5, R=20)
        assert all(ci.case_tag in ALL_CASES for ci in cv.enumerate_covering(p))

    def test_classify_case(self):
        p = params((1, 1), 4.5, 5, 6, 20, M=5, R=5)
        assert cv.classify_case((3, 4), 5, p) == CASE1
        assert cv.classify_case((7, 9), 5, p) == CASE2

    def test_minimum_above_band_has_zero_diameter(self):
        p = params((1, F(1, 2)), 4, 4.5, 5, 40, M=10, R=60)
        rows = [ci for ci in cv.enumerate_covering(p) if ci.case_tag == CASE332]
        assert rows and all(ci.empty and ci.diam == 0 for ci in rows)

    def test_parallel_identical(self):
        p = params((1, F(1, 2)), 4, 4.5, 5, 40, M=5, R=30)
        one = [(c.r, c.q, c.case_tag, c.diam) for c in cv.enumerate_covering(p)]
        two = [(c.r, c.q, c.case_tag, c.diam) for c in cv.enumerate_covering(p, jobs=2)]
        assert one == two


def _ci(r, d):
    return CoverInterval(q=(1,), r=r, lo=None, hi=None, empty=d == 0, case_tag=CASE1, diam=d)


class TestPremeasure:
    def test_empty_stream(self):
        assert cv.partial_premeasure([], 0.5).cumulative == 0

    def test_single_interval(self):
        assert cv.partial_premeasure([_ci(5, 0.125)], 1).cumulative == 0.125

    def test_sigma_range(self):
        with pytest.raises(ValueError):
            cv.partial_premeasure([], 1.5)

    def test_cumulative_is_sum(self):
        rep = cv.partial_premeasure([_ci(5, 0.1), _ci(5, 0.2), _ci(6, 0.3)], 0.5)
        assert rep.cumulative == pytest.approx(sum(v for _, v in rep.per_r_sums))
        assert rep.tail_estimates[0][1] == pytest.approx(rep.cumulative)

    @pytest.mark.slow
    def test_tail_decreases_in_lower_family(self):
        # all ratios below 1; sigma = 0.8 exceeds (k+1)/beta = 0.75
        p = params((1, 1), 4, 4.5, 5, 8, M=10, R=2000)
        rep = cv.partial_premeasure(cv.iter_batches(p), 0.8)
        tails = [v for _, v in rep.tail_estimates]
        contrib = dict(rep.per_r_sums)
        for (r, a), (_, b) in zip(rep.tail_estimates, rep.tail_estimates[1:]):
            assert a >= b
            if contrib[r] > 0:
                assert a > b
        assert min(tails) < 1e-3

    def test_diagnostic_sides_of_threshold(self):
        p = params((1, 1), 5, 5.5, 6, 10, M=10, R=500)
        d = cv.dimension_diagnostic(p, [0.3, 0.9])
        assert d.threshold_reference == pytest.approx(0.6)
        assert d.convergent_like == [False, True]

    def test_diagnostic_sums_monotone(self):
        p = params((1, 1), 5, 5.5, 6, 10, M=10, R=200)
        d = cv.dimension_diagnostic(p, [0.4, 0.7, 1.0], [50, 100, 200])
        for row in d.sums:
            assert row == sorted(row)
        for j in range(3):
            col = [row[j] for row in d.sums]
            assert col == sorted(col, reverse=True)

    def test_empty_covering_diagnostic(self):
        # a single term b=1 never reaches the band for alpha >= s
        p = params((1,), 4, 4.5, 5, 8, M=10, R=100)
        d = cv.dimension_diagnostic(p, [0.5, 1.0])
        assert all(d.convergent_like)
        assert all(v == 0 for row in d.sums for v in row)


class TestBounds:
    def test_empty_stream(self):
        assert cv.diam_bound_report([], params((1, 1), 4, 4.5, 5, 8)) == {}

    def test_lower_family_constant_stable(self):
        p = params((1, 1), 4, 4.5, 5, 8, M=10, R=400)
        stats = cv.diam_bound_report(cv.iter_batches(p), p)[CASE1]
        first = cv.sup_over(stats, 10, 200)
        full = cv.sup_over(stats, 10, 400)
        assert math.isfinite(full) and full <= first * 1.05

    def test_bounds_agree_between_paths(self):
        p = params((1, F(1, 2)), 4, 4.5, 5, 40, M=5, R=20)
        a = cv.diam_bound_report(cv.iter_batches(p, include_empty=True), p)
        b = cv.diam_bound_report(cv.enumerate_covering(p), p)
        assert set(a) == set(b)
        for tag in a:
            assert a[tag].count == b[tag].count
            assert a[tag].sup_ratio == pytest.approx(b[tag].sup_ratio, rel=1e-12)

    def test_bin_index(self):
        assert cv.bin_index(0.0, 1.0, 10) == 0
        assert cv.bin_index(0.25, 1.0, 10) == 5


class TestInclusion:
    P = dict(beta=1.2, s=1.5, t=3, gamma=6)

    def test_pythagorean(self):
        p = params((1, 1), M=5, R=5, **self.P)
        sol = SolutionTuple(5, (3, 4), 25, (9, 16))
        res = cv.verify_inclusion(sol, 2, p)
        assert str(res) == "Covered(Case1)"

    def test_below_start_radius(self):
        p = params((1, 1), M=6, R=10, **self.P)
        res = cv.verify_inclusion(SolutionTuple(5, (3, 4), 25, (9, 16)), 2, p)
        assert res.status == cv.BELOW_M

    def test_fabricated_near_solution(self):
        # 4 = 2 + 2 holds, but 2 (2/3)^3 is far from 1
        p = params((1, 1), 2.5, 2.8, 4, 8, M=2, R=10)
        sol = SolutionTuple(3, (2, 2), 4, (2, 2))
        assert cv.verify_inclusion(sol, 3, p).status == cv.DIOPHANTINE_FAILS

    def test_trivial_tuple(self):
        p = params((F(1, 2), F(1, 2)), M=2, R=10, **self.P)
        sol = SolutionTuple(4, (4, 4), 8, (8, 8))
        assert cv.verify_inclusion(sol, F(3, 2), p).status == cv.TRIVIAL_SOLUTION

    def test_alpha_outside_window(self):
        p = params((1, 1), M=5, R=5, **self.P)
        with pytest.raises(ValueError):
            cv.verify_inclusion(SolutionTuple(5, (3, 4), 25, (9, 16)), 4, p)

    def test_search_results_are_covered(self):
        a = Alpha.parse("3/2")
        p = params((1, 1), beta=1.05, s=1.3, t=1.6, gamma=3, M=10, R=200)
        sols = [s for s in search_solutions(LinearEquation((1, 1)), a, 200) if s.r >= 10]
        assert sols
        for s in sols:
            assert cv.verify_inclusion(s, a, p).status in (cv.COVERED, cv.DIOPHANTINE_FAILS)


class TestSpacingAndLogSum:
    P = params((F(1, 2), F(1, 2)), 4, 4.5, 5, 40, M=10, R=60)

    def test_sentinels(self):
        assert cv.spacing_check(self.P.b, (F(5, 10),), 10, [], self.P) == math.inf
        assert cv.spacing_check(self.P.b, (F(5, 10),), 10, [11], self.P) == math.inf

    def test_gap_at_least_weight_over_r(self):
        worst, pairs, bad = cv.spacing_scan(self.P, 50)
        assert pairs > 0 and bad == 0 and worst >= 1

    def test_log_sum_single_term(self):
        lhs, rhs, _ = cv.log_sum_check(2, 0.5)
        assert lhs == pytest.approx(math.log(2) ** -0.5, rel=1e-15)
        assert lhs == pytest.approx(1.2011224087864498, rel=1e-15)
        assert rhs == pytest.approx(2 + math.sqrt(2))

    def test_log_sum_indicator(self):
        _, rhs, _ = cv.log_sum_check(1000, 1.0)
        assert rhs == pytest.approx(1000 + 1000 * math.log(1000) + 1000)

    def test_log_sum_upper_range(self):
        _, _, upper = cv.log_sum_check(10, 1.0, 1.5)
        expected = sum(1 / math.log(q / 10) for q in range(11, 15))
        assert upper == pytest.approx(expected, rel=1e-13)

    def test_log_sum_rejects(self):
        with pytest.raises(ValueError):
            cv.log_sum_check(1, 0.5)
