"""Prefixes of the sequence floor(n**alpha) and membership tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .rigor import (
    Alpha,
    PrecisionExhausted,
    Undecidable,
    contains_integer,
    eval_root_interval,
    floor_pow,
    perfect_power_root,
    precision_schedule,
)

# prefixes longer than this are streamed rather than built as lists
STREAM_THRESHOLD = 10**7


@dataclass(frozen=True)
class PSTerm:
    n: int
    value: int


def iter_terms(alpha: Alpha, N: int, start: int = 1) -> Iterator[PSTerm]:
    for n in range(start, N + 1):
        yield PSTerm(n, floor_pow(n, alpha))


def ps_range(alpha: Alpha, N: int):
    """Terms n = 1..N.  Returns a list, or a generator beyond STREAM_THRESHOLD."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if N > STREAM_THRESHOLD:
        return iter_terms(alpha, N)
    return list(iter_terms(alpha, N))


def ps_values(alpha: Alpha, N: int) -> list[int]:
    """floor(n**alpha) for n = 1..N as a plain list of ints."""
    return [floor_pow(n, alpha) for n in range(1, N + 1)]


def is_member(m: int, alpha: Alpha) -> int | None:
    """The n with floor(n**alpha) == m, or None if m is not a term.

    floor(n**alpha) == m exactly when n lies in [m**(1/alpha), (m+1)**(1/alpha)),
    so membership reduces to finding an integer in that preimage interval.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    # an endpoint m**(q/p) is rational only when m is a perfect p-th power,
    # and then it is an exact integer
    k = perfect_power_root(m, alpha.p)
    if k is not None:
        return k**alpha.q
    k_next = perfect_power_root(m + 1, alpha.p)
    lo = hi = None
    for bits in precision_schedule():
        lo = eval_root_interval(m, alpha, bits)
        hi = k_next**alpha.q if k_next is not None else eval_root_interval(m + 1, alpha, bits)
        try:
            return contains_integer(lo, hi, half_open=True)
        except Undecidable:
            continue
    # an endpoint is (or sits extremely close to) an integer: settle exactly
    top = hi if isinstance(hi, int) else int(hi.hi) + 1
    for n in range(max(1, int(lo.lo)), top + 1):
        if floor_pow(n, alpha) == m:
            return n
    return None


__all__ = ["PSTerm", "ps_range", "ps_values", "iter_terms", "is_member", "PrecisionExhausted"]
