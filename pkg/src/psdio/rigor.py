"""Exact integer roots and outward-rounded interval arithmetic.

Interval endpoints are binary floating point numbers (dyadic rationals) held
as raw ``mpmath.libmp`` tuples.  Every arithmetic step rounds the lower
endpoint toward -inf and the upper endpoint toward +inf; results of
transcendental functions are additionally widened by a few units in the last
place, since libmp only promises faithful (not correctly rounded) results for
``exp`` and ``log``.
"""

from __future__ import annotations

import decimal
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import mpmath
from mpmath import libmp

START_BITS = 64
DEFAULT_MAX_BITS = 4096
PRECISION_ENV = "PSD_MAX_PRECISION_BITS"

_F = libmp.round_floor
_C = libmp.round_ceiling
_ZERO = libmp.fzero
_ONE = libmp.fone


class PrecisionExhausted(ArithmeticError):
    """Raised when the precision ceiling is reached without a decision."""


class Undecidable(PrecisionExhausted):
    """An enclosure is too wide to decide an integer comparison."""


def max_precision_bits() -> int:
    raw = os.environ.get(PRECISION_ENV)
    if not raw:
        return DEFAULT_MAX_BITS
    bits = int(raw)
    if bits < START_BITS:
        raise ValueError(f"{PRECISION_ENV} must be at least {START_BITS}, got {bits}")
    return bits


def precision_schedule(start: int = START_BITS, ceiling: int | None = None):
    """Yield 64, 128, 256, ... up to and including the ceiling."""
    ceiling = max_precision_bits() if ceiling is None else ceiling
    bits = start
    while bits <= ceiling:
        yield bits
        bits *= 2


# ---------------------------------------------------------------------------
# Alpha


@dataclass(frozen=True)
class Alpha:
    """A non-integral exponent > 1, stored as an exact rational.

    ``kind`` is ``"rational"`` for values given as p/q and ``"decimal"`` for
    values given as a finite decimal string.  Decimal values keep their digits
    and scale for display; floors are then computed by the adaptive enclosure
    loop instead of the exact integer-root shortcut.
    """

    value: Fraction
    kind: str = "rational"
    digits: str | None = None
    scale: int | None = None

    def __post_init__(self):
        if self.kind not in ("rational", "decimal"):
            raise ValueError(f"unknown alpha kind {self.kind!r}")
        if self.value.denominator == 1:
            raise ValueError(f"alpha must be non-integral, got {self.value}")
        if self.value <= 1:
            raise ValueError(f"alpha must exceed 1, got {self.value}")

    @classmethod
    def rational(cls, numer: int, denom: int) -> "Alpha":
        if denom <= 0:
            raise ValueError("alpha denominator must be positive")
        return cls(Fraction(numer, denom), "rational")

    @classmethod
    def decimal(cls, digits: str, scale: int) -> "Alpha":
        if not digits.isdigit():
            raise ValueError(f"decimal digits must be 0-9 only, got {digits!r}")
        value = Fraction(int(digits), 10**scale) if scale >= 0 else Fraction(int(digits) * 10**-scale)
        return cls(value, "decimal", digits, scale)

    @classmethod
    def parse(cls, text: str) -> "Alpha":
        """Parse ``"p/q"`` as an exact rational and ``"3.1416"`` as a decimal."""
        text = text.strip()
        if "/" in text:
            num, den = text.split("/", 1)
            return cls.rational(int(num), int(den))
        try:
            dec = decimal.Decimal(text)
        except decimal.InvalidOperation:
            raise ValueError(f"cannot parse alpha {text!r}") from None
        if not dec.is_finite():
            raise ValueError(f"cannot parse alpha {text!r}")
        sign, digit_tuple, exponent = dec.as_tuple()
        if sign:
            raise ValueError(f"alpha must exceed 1, got {text}")
        digits = "".join(map(str, digit_tuple))
        return cls.decimal(digits, -exponent)

    @property
    def p(self) -> int:
        return self.value.numerator

    @property
    def q(self) -> int:
        return self.value.denominator

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        if self.kind == "decimal":
            return str(decimal.Decimal(int(self.digits)).scaleb(-self.scale))
        return f"{self.p}/{self.q}"


# ---------------------------------------------------------------------------
# Integer roots


def nth_root_floor(m: int, q: int) -> int:
    """The unique k >= 0 with k**q <= m < (k+1)**q."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if q < 1:
        raise ValueError("q must be positive")
    if q == 1 or m < 2:
        return m
    if q == 2:
        return math.isqrt(m)
    bl = m.bit_length()
    if q >= bl:
        return 1
    if bl <= 50 * q:
        # root fits comfortably in a double; correct the rounding error
        k = int(math.exp(math.log(m) / q))
    else:
        # integer Newton iteration from above
        guess = int(math.exp(math.log(m) / q - 40) * 2**40) if bl < 1000 * q else 0
        k = guess + (guess >> 30) + 2
        if k**q <= m:
            k = 1 << -(-bl // q)
        while True:
            nxt = ((q - 1) * k + m // k ** (q - 1)) // q
            if nxt >= k:
                break
            k = nxt
    while k**q > m:
        k -= 1
    while (k + 1) ** q <= m:
        k += 1
    return k


def perfect_power_root(n: int, q: int) -> int | None:
    """Return k with k**q == n, or None."""
    if n == 1:
        return 1
    if q >= n.bit_length():
        return None
    k = nth_root_floor(n, q)
    return k if k**q == n else None


# ---------------------------------------------------------------------------
# raw mpf helpers


def _to_raw(x, wp: int, rnd) -> tuple:
    """Round an exact number (int, Fraction, float, mpf, raw) in direction rnd."""
    if isinstance(x, tuple):
        return x
    if isinstance(x, bool):
        x = int(x)
    if isinstance(x, int):
        return libmp.from_int(x, wp, rnd)
    if isinstance(x, Fraction):
        return libmp.from_rational(x.numerator, x.denominator, wp, rnd)
    if isinstance(x, float):
        return libmp.from_float(x)
    if isinstance(x, mpmath.mpf):
        return x._mpf_
    raise TypeError(f"cannot convert {type(x).__name__} to an interval endpoint")


def _down(x: tuple, wp: int) -> tuple:
    if x == _ZERO:
        return x
    eps = libmp.mpf_shift(libmp.mpf_abs(x), 3 - wp)
    return libmp.mpf_sub(x, eps, wp, _F)


def _up(x: tuple, wp: int) -> tuple:
    if x == _ZERO:
        return x
    eps = libmp.mpf_shift(libmp.mpf_abs(x), 3 - wp)
    return libmp.mpf_add(x, eps, wp, _C)


def _min(*xs):
    best = xs[0]
    for x in xs[1:]:
        if libmp.mpf_lt(x, best):
            best = x
    return best


def _max(*xs):
    best = xs[0]
    for x in xs[1:]:
        if libmp.mpf_gt(x, best):
            best = x
    return best


def _raw_floor(x: tuple) -> int:
    return int(libmp.to_int(libmp.mpf_floor(x)))


def _raw_ceil(x: tuple) -> int:
    return int(libmp.to_int(libmp.mpf_ceil(x)))


def _make(x: tuple) -> mpmath.mpf:
    return mpmath.mp.make_mpf(x)


# ---------------------------------------------------------------------------
# BoundedReal

Number = Union[int, float, Fraction, "BoundedReal"]


@dataclass(frozen=True)
class BoundedReal:
    """Closed interval [lo, hi] with dyadic endpoints that contains a real value."""

    lo: mpmath.mpf
    hi: mpmath.mpf
    precision_bits: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty enclosure [{self.lo}, {self.hi}]")

    # construction -------------------------------------------------------
    @classmethod
    def from_raw(cls, lo: tuple, hi: tuple, bits: int) -> "BoundedReal":
        return cls(_make(lo), _make(hi), bits)

    @classmethod
    def exact(cls, x, bits: int = START_BITS) -> "BoundedReal":
        """Tightest enclosure of an exact number at the given precision."""
        if isinstance(x, BoundedReal):
            return x
        wp = bits + 8
        return cls.from_raw(_to_raw(x, wp, _F), _to_raw(x, wp, _C), bits)

    @classmethod
    def hull(cls, a: "BoundedReal", b: "BoundedReal") -> "BoundedReal":
        return cls(min(a.lo, b.lo), max(a.hi, b.hi), min(a.precision_bits, b.precision_bits))

    # raw access ----------------------------------------------------------
    @property
    def _lo(self) -> tuple:
        return self.lo._mpf_

    @property
    def _hi(self) -> tuple:
        return self.hi._mpf_

    @property
    def _wp(self) -> int:
        return self.precision_bits + 8

    def _coerce(self, other) -> "BoundedReal":
        if isinstance(other, BoundedReal):
            return other
        return BoundedReal.exact(other, self.precision_bits)

    # inspection ----------------------------------------------------------
    @property
    def width(self) -> mpmath.mpf:
        return _make(libmp.mpf_sub(self._hi, self._lo, self._wp, _C))

    @property
    def mid(self) -> mpmath.mpf:
        return _make(libmp.mpf_shift(libmp.mpf_add(self._lo, self._hi, self._wp + 2), -1))

    def __float__(self) -> float:
        return float(self.mid)

    def contains(self, x) -> bool:
        x = self._coerce(x)
        return self.lo <= x.lo and x.hi <= self.hi

    def is_positive(self) -> bool:
        return self.lo > 0

    def is_negative(self) -> bool:
        return self.hi < 0

    def sign(self) -> int:
        """+1 or -1 when the sign is certain, 0 when the interval meets zero."""
        if self.lo > 0:
            return 1
        if self.hi < 0:
            return -1
        return 0

    def definitely_lt(self, other) -> bool:
        other = self._coerce(other)
        return self.hi < other.lo

    def definitely_gt(self, other) -> bool:
        other = self._coerce(other)
        return self.lo > other.hi

    def floor(self) -> int:
        """Floor of the enclosed value; Undecidable if the endpoints disagree."""
        a, b = _raw_floor(self._lo), _raw_floor(self._hi)
        if a != b:
            raise Undecidable(f"floor undecided in [{self.lo}, {self.hi}]")
        return a

    def ceil(self) -> int:
        a, b = _raw_ceil(self._lo), _raw_ceil(self._hi)
        if a != b:
            raise Undecidable(f"ceiling undecided in [{self.lo}, {self.hi}]")
        return a

    # arithmetic ----------------------------------------------------------
    def __neg__(self) -> "BoundedReal":
        return BoundedReal.from_raw(libmp.mpf_neg(self._hi), libmp.mpf_neg(self._lo), self.precision_bits)

    def __add__(self, other) -> "BoundedReal":
        other = self._coerce(other)
        wp = min(self._wp, other._wp)
        return BoundedReal.from_raw(
            libmp.mpf_add(self._lo, other._lo, wp, _F),
            libmp.mpf_add(self._hi, other._hi, wp, _C),
            min(self.precision_bits, other.precision_bits),
        )

    __radd__ = __add__

    def __sub__(self, other) -> "BoundedReal":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "BoundedReal":
        return self._coerce(other) + (-self)

    def __mul__(self, other) -> "BoundedReal":
        other = self._coerce(other)
        wp = min(self._wp, other._wp)
        pairs = [(a, b) for a in (self._lo, self._hi) for b in (other._lo, other._hi)]
        lo = _min(*[libmp.mpf_mul(a, b, wp, _F) for a, b in pairs])
        hi = _max(*[libmp.mpf_mul(a, b, wp, _C) for a, b in pairs])
        return BoundedReal.from_raw(lo, hi, min(self.precision_bits, other.precision_bits))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "BoundedReal":
        other = self._coerce(other)
        if other.sign() == 0:
            raise ZeroDivisionError("divisor enclosure contains zero")
        wp = min(self._wp, other._wp)
        pairs = [(a, b) for a in (self._lo, self._hi) for b in (other._lo, other._hi)]
        lo = _min(*[libmp.mpf_div(a, b, wp, _F) for a, b in pairs])
        hi = _max(*[libmp.mpf_div(a, b, wp, _C) for a, b in pairs])
        return BoundedReal.from_raw(lo, hi, min(self.precision_bits, other.precision_bits))

    def __rtruediv__(self, other) -> "BoundedReal":
        return self._coerce(other) / self

    def square(self) -> "BoundedReal":
        wp = self._wp
        a2 = libmp.mpf_mul(self._lo, self._lo, wp, _C)
        b2 = libmp.mpf_mul(self._hi, self._hi, wp, _C)
        hi = _max(a2, b2)
        if self.sign() == 0:
            lo = _ZERO
        else:
            lo = _min(libmp.mpf_mul(self._lo, self._lo, wp, _F), libmp.mpf_mul(self._hi, self._hi, wp, _F))
        return BoundedReal.from_raw(lo, hi, self.precision_bits)

    def exp(self) -> "BoundedReal":
        wp = self._wp
        lo = _down(libmp.mpf_exp(self._lo, wp, _F), wp)
        hi = _up(libmp.mpf_exp(self._hi, wp, _C), wp)
        if libmp.mpf_lt(lo, _ZERO):
            lo = _ZERO
        return BoundedReal.from_raw(lo, hi, self.precision_bits)

    def log(self) -> "BoundedReal":
        if not self.is_positive():
            raise ValueError("log of an enclosure that is not strictly positive")
        wp = self._wp
        lo = _down(libmp.mpf_log(self._lo, wp, _F), wp)
        hi = _up(libmp.mpf_log(self._hi, wp, _C), wp)
        return BoundedReal.from_raw(lo, hi, self.precision_bits)

    def __repr__(self) -> str:
        return f"BoundedReal([{mpmath.nstr(self.lo, 20)}, {mpmath.nstr(self.hi, 20)}], bits={self.precision_bits})"


def log_rational(x: Fraction, bits: int) -> BoundedReal:
    """Enclosure of ln x for a positive rational x."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("log of a non-positive rational")
    if x == 1:
        return BoundedReal.exact(0, bits)
    return BoundedReal.exact(x, bits).log()


def _snap_outward(lo: tuple, hi: tuple, bits: int) -> tuple[tuple, tuple]:
    """Round [lo, hi] outward to a dyadic grid tied to the magnitude of hi.

    The grid unit is 2**(L - bits + 1) where 2**L bounds |hi|.  Widening by a
    full unit on both sides makes enclosures at precision 2b nest inside the
    enclosure at precision b, since the finer one is narrower than one coarse
    unit and both contain the true value.
    """
    if hi == _ZERO:
        mag = lo
    else:
        mag = hi
    sign, man, exp, bc = mag
    L = exp + bc
    e = L - bits + 1
    lo_units = _raw_floor(libmp.mpf_shift(lo, -e)) - 1
    hi_units = _raw_ceil(libmp.mpf_shift(hi, -e)) + 1
    return libmp.from_man_exp(lo_units, e), libmp.from_man_exp(hi_units, e)


def eval_pow_interval(n: int, alpha: Alpha, precision_bits: int) -> BoundedReal:
    """Enclosure of n**alpha of relative width about 2**(4 - precision_bits)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if precision_bits < 32:
        raise ValueError("precision_bits must be at least 32")
    if n == 1:
        return BoundedReal.from_raw(_ONE, _ONE, precision_bits)
    p, q = alpha.p, alpha.q
    mag_bits = (p * n.bit_length()) // q + 2
    wp = precision_bits + mag_bits.bit_length() + 16
    ln_n = libmp.from_int(n)
    ln_lo = _down(libmp.mpf_log(ln_n, wp, _F), wp)
    ln_hi = _up(libmp.mpf_log(ln_n, wp, _C), wp)
    y_lo = libmp.mpf_div(libmp.mpf_mul(ln_lo, libmp.from_int(p), wp, _F), libmp.from_int(q), wp, _F)
    y_hi = libmp.mpf_div(libmp.mpf_mul(ln_hi, libmp.from_int(p), wp, _C), libmp.from_int(q), wp, _C)
    e_lo = _down(libmp.mpf_exp(y_lo, wp, _F), wp)
    e_hi = _up(libmp.mpf_exp(y_hi, wp, _C), wp)
    lo, hi = _snap_outward(e_lo, e_hi, precision_bits)
    return BoundedReal.from_raw(lo, hi, precision_bits)


def eval_root_interval(m: int, alpha: Alpha, precision_bits: int) -> BoundedReal:
    """Enclosure of m**(1/alpha) for an integer m >= 1."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if m == 1:
        return BoundedReal.from_raw(_ONE, _ONE, precision_bits)
    p, q = alpha.p, alpha.q
    wp = precision_bits + m.bit_length().bit_length() + 16
    raw = libmp.from_int(m)
    ln_lo = _down(libmp.mpf_log(raw, wp, _F), wp)
    ln_hi = _up(libmp.mpf_log(raw, wp, _C), wp)
    y_lo = libmp.mpf_div(libmp.mpf_mul(ln_lo, libmp.from_int(q), wp, _F), libmp.from_int(p), wp, _F)
    y_hi = libmp.mpf_div(libmp.mpf_mul(ln_hi, libmp.from_int(q), wp, _C), libmp.from_int(p), wp, _C)
    e_lo = _down(libmp.mpf_exp(y_lo, wp, _F), wp)
    e_hi = _up(libmp.mpf_exp(y_hi, wp, _C), wp)
    return BoundedReal.from_raw(e_lo, e_hi, precision_bits)


# ---------------------------------------------------------------------------
# floors


def floor_pow_adaptive(n: int, alpha: Alpha, max_bits: int | None = None) -> int:
    """floor(n**alpha) from interval enclosures, doubling precision as needed.

    An exact integer value of n**alpha only happens when n is a perfect q-th
    power (alpha = p/q in lowest terms), which is detected up front; otherwise
    n**alpha is irrational and some finite precision separates it from the
    neighbouring integers.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    root = perfect_power_root(n, alpha.q)
    if root is not None:
        return root**alpha.p
    for bits in precision_schedule(START_BITS, max_bits):
        enc = eval_pow_interval(n, alpha, bits)
        lo, hi = _raw_floor(enc._lo), _raw_floor(enc._hi)
        if lo == hi:
            return lo
    raise PrecisionExhausted(f"floor of {n}^{alpha} undecided at {max_bits or max_precision_bits()} bits")


def floor_pow(n: int, alpha: Alpha) -> int:
    """Exactly floor(n**alpha)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if alpha.kind == "rational":
        return nth_root_floor(n**alpha.p, alpha.q)
    return floor_pow_adaptive(n, alpha)


# ---------------------------------------------------------------------------
# integer containment


def _endpoint_ceil(x) -> int:
    if isinstance(x, BoundedReal):
        return x.ceil()
    if isinstance(x, (int, Fraction)):
        return math.ceil(x)
    if isinstance(x, float):
        return math.ceil(x)
    if isinstance(x, mpmath.mpf):
        return int(mpmath.ceil(x))
    raise TypeError(f"unsupported endpoint type {type(x).__name__}")


def _compare_int(c: int, x) -> int:
    """Sign of c - x, or Undecidable when x is an enclosure containing c."""
    if isinstance(x, BoundedReal):
        if c < x.lo:
            return -1
        if c > x.hi:
            return 1
        if x.lo == x.hi == c:
            return 0
        raise Undecidable(f"{c} lies inside the enclosure [{x.lo}, {x.hi}]")
    if isinstance(x, float):
        x = Fraction(x)
    if isinstance(x, mpmath.mpf):
        x = Fraction(*libmp.to_rational(x._mpf_))
    return (c > x) - (c < x)


def contains_integer(lo, hi, half_open: bool = True) -> int | None:
    """Least integer in [lo, hi) (or [lo, hi]); None if there is none.

    Endpoints may be exact numbers or BoundedReal enclosures.  When an
    enclosure straddles the integer that would decide the answer, Undecidable
    is raised instead of guessing.
    """
    c = _endpoint_ceil(lo)
    cmp = _compare_int(c, hi)
    if cmp < 0:
        return c
    if cmp > 0:
        return None
    return None if half_open else c
