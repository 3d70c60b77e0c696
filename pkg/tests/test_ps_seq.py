from math import isqrt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psdio.ps_seq import STREAM_THRESHOLD, is_member, ps_range, ps_values
from psdio.rigor import Alpha, nth_root_floor

A32 = Alpha.parse("3/2")


def test_prefix_examples():
    assert [t.value for t in ps_range(A32, 5)] == [1, 2, 5, 8, 11]
    assert ps_values(Alpha.parse("5/2"), 3) == [1, 5, 15]
    assert ps_values(Alpha.parse("7/3"), 1) == [1]


def test_prefix_against_isqrt():
    assert ps_values(A32, 3000) == [isqrt(n**3) for n in range(1, 3001)]


def test_strictly_increasing_for_alpha_above_one():
    vals = ps_values(Alpha.parse("7/5"), 5000)
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_streams_beyond_threshold():
    out = ps_range(A32, STREAM_THRESHOLD + 1)
    assert not isinstance(out, list)
    assert next(iter(out)).value == 1


def test_rejects_empty_prefix():
    with pytest.raises(ValueError):
        ps_range(A32, 0)


@pytest.mark.parametrize("m,expected", [(11, 5), (3, None), (1, 1), (8, 4)])
def test_membership_examples(m, expected):
    assert is_member(m, A32) == expected


@pytest.mark.parametrize("text", ["3/2", "5/2", "7/5", "3.1416", "3.5"])
def test_membership_matches_prefix(text):
    a = Alpha.parse(text)
    vals = ps_values(a, 300)
    members = set(vals)
    for m in range(1, min(vals[-1], 3000) + 1):
        n = is_member(m, a)
        assert (n is not None) == (m in members)
        if n is not None:
            assert vals[n - 1] == m


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=10**5), st.sampled_from(["3/2", "7/3", "11/4"]))
def test_membership_of_terms(n, text):
    a = Alpha.parse(text)
    m = nth_root_floor(n**a.p, a.q)
    assert is_member(m, a) == n
