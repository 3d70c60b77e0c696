import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psdio import envelope as ev
from psdio.envelope import (
    CASE1,
    CASE2,
    CASE31,
    CASE332,
    CASE333,
    DECREASING,
    L1,
    L2,
    Envelope,
    OutOfRange,
)

F = Fraction
PYTH = Envelope((1, 1), (F(3, 5), F(4, 5)))
SKEW = Envelope((1, 1), (F(1, 2), F(3, 2)))

# minimiser of 2**-u + 1.5**u, solved in closed form and evaluated at 60 digits
SKEW_U0 = 0.4880771320938716766
SKEW_M = 1.9318131064668754472


def test_pythagorean_value_is_exact():
    v = ev.eval_derivatives(PYTH, 2, 0)
    assert v.lo == 1 and v.hi == 1


@pytest.mark.parametrize("env", [PYTH, SKEW, Envelope((F(1, 3), 2, F(5, 7)), (F(1, 9), F(7, 3), F(11, 10)))])
def test_value_at_zero_is_weight_sum(env):
    v = ev.eval_derivatives(env, 0, 0)
    assert v.contains(sum(env.b))


def test_first_derivative_at_zero():
    v = ev.eval_derivatives(SKEW, 0, 1)
    with mpmath.workdps(40):
        ref = mpmath.log(mpmath.mpf(3) / 2) - mpmath.log(2)
        assert v.contains(ref)
    assert float(v.mid) == pytest.approx(-0.28768207245178093, abs=1e-15)


def test_second_derivative_is_positive():
    v = ev.eval_derivatives(SKEW, 1.3, 2)
    assert v.is_positive()


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-3, max_value=30), st.integers(min_value=0, max_value=2))
def test_enclosure_contains_high_precision_value(u, order):
    env = Envelope((F(2, 3), F(1, 5)), (F(5, 8), F(13, 8)))
    v = ev.eval_derivatives(env, u, order, bits=80)
    with mpmath.workdps(60):
        ref = sum(mpmath.mpf(b.numerator) / b.denominator * (mpmath.mpf(q.numerator) / q.denominator) ** u
                  * mpmath.log(mpmath.mpf(q.numerator) / q.denominator) ** order for b, q in zip(env.b, env.Q))
        assert v.contains(ref)


class TestCriticalPoint:
    def test_closed_form(self):
        c = ev.critical_point(SKEW, tol=1e-14)
        closed = math.log(math.log(2) / math.log(1.5)) / math.log(3)
        assert c.u0.contains(SKEW_U0)
        assert c.u0_float == pytest.approx(closed, abs=1e-13)
        assert c.m_float == pytest.approx(SKEW_M, abs=1e-13)
        assert float(c.u0.width) <= 1e-14
        assert abs(float(ev.eval_derivatives(SKEW, c.u0_float, 1).mid)) <= 1e-12

    def test_monotone_has_none(self):
        assert ev.critical_point(PYTH) is None
        assert ev.critical_point(Envelope((1, 1), (F(3, 2), F(5, 4)))) is None

    def test_symmetric(self):
        c = ev.critical_point(Envelope((F(1, 2), F(1, 2)), (F(1, 2), 2)))
        assert abs(c.u0_float) < 1e-13
        assert c.m.contains(1)

    def test_far_minimiser(self):
        env = Envelope.from_indices((1, F(1, 8)), (29, 31), 30)
        c = ev.critical_point(env)
        assert 30 < c.u0_float < 33
        assert c.u0.lo <= c.u0.hi


class TestInversion:
    def test_decreasing(self):
        u = ev.invert_on_branch(PYTH, 1, DECREASING)
        assert u.contains(2)

    def test_l2_round_trip(self):
        y = ev.eval_derivatives(SKEW, 3, 0, bits=128)
        u = ev.invert_on_branch(SKEW, y, L2)
        assert abs(float(u.mid) - 3) <= 1e-13

    def test_l1_round_trip(self):
        y = F(5, 2)
        u = ev.invert_on_branch(SKEW, y, L1)
        assert float(u.mid) < SKEW_U0
        assert SKEW.value(float(u.mid)) == pytest.approx(2.5, rel=1e-13)

    def test_below_minimum(self):
        with pytest.raises(OutOfRange):
            ev.invert_on_branch(SKEW, SKEW_M - 0.1, L2)

    def test_decreasing_out_of_range(self):
        with pytest.raises(OutOfRange):
            ev.invert_on_branch(PYTH, 0, DECREASING)


class TestCoverInterval:
    def test_pythagorean_contains_two(self):
        ci = ev.cover_interval(Envelope.from_indices((1, 1), (3, 4), 5), 5, 3.5, 1.5, 3)
        assert not ci.empty and ci.contains(2)
        assert 1.5 <= float(ci.lo.lo) <= float(ci.hi.hi) <= 3
        assert ci.case_tag == CASE1

    def test_minimum_above_band_is_empty(self):
        ci = ev.cover_interval(SKEW, 1000, 3.5, 4, 5)
        assert ci.empty and ci.lo is None and ci.hi is None and ci.diam == 0

    def test_single_term_outside_window(self):
        ci = ev.cover_interval(Envelope((2,), (F(1, 2),)), 10, 4, 5, 6)
        assert ci.empty

    def test_band_is_respected(self):
        r, beta = 5, 3.5
        ci = ev.cover_interval(Envelope.from_indices((1, 1), (3, 4), r), r, beta, 1.5, 3)
        for u in (float(ci.lo.hi), float(ci.hi.lo), 2.0):
            assert abs(PYTH.value(u) - 1) <= r**-beta * (1 + 1e-9)

    def test_split_pieces(self):
        env = Envelope.from_indices((1, F(1, 2)), (23, 32), 30)
        ci = ev.cover_interval(env, 30, 3, 3.5, 60, gamma=80)
        assert ci.case_tag == CASE333
        (a1, b1), (a2, b2) = ci.pieces
        assert float(b1.hi) < ci.u0 < float(a2.lo)
        assert len(ci.premeasure_diams) == 2
        assert ci.diam >= sum(ci.piece_diams)

    def test_rejects_bad_window(self):
        with pytest.raises(ValueError):
            ev.cover_interval(PYTH, 5, 3.5, 3, 1.5)
        with pytest.raises(ValueError):
            ev.cover_interval(PYTH, 1, 3.5, 1.5, 3)


class TestClassification:
    def test_simple_cases(self):
        assert ev.classify_envelope(Envelope.from_indices((1, 1), (3, 4), 5), 5, 4.5, 20) == CASE1
        assert ev.classify_envelope(Envelope.from_indices((1, 1), (7, 9), 5), 5, 4.5, 20) == CASE2

    def test_mixed_indices_follow_critical_point(self):
        env = Envelope.from_indices((1, 1), (3, 8), 5)
        u0 = ev.critical_point(env).u0_float
        tag = ev.classify_envelope(env, 5, 4.5, 20)
        assert (u0 <= 4.5) == (tag == CASE31)

    def test_minimum_above_band(self):
        env = Envelope.from_indices((1, F(1, 2)), (9, 11), 10)
        c = ev.critical_point(env)
        assert c.m_float > 1 and 3 < c.u0_float < 40
        assert ev.classify_envelope(env, 10, 3, 40) == CASE332

    def test_equal_index_rejected(self):
        with pytest.raises(ValueError):
            ev.classify_envelope(Envelope.from_indices((1, 1), (5, 3), 5), 5, 4.5, 20)
