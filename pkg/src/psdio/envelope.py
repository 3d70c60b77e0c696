"""The convex function E(u) = sum_i b_i Q_i**u and the sets where it is close to 1.

Float evaluations give starting points; every decision that matters (signs of
E - y and E', comparisons of the minimum with 1 +- eps) is made with
BoundedReal enclosures at a precision chosen from the size of eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import mpmath

from .rigor import BoundedReal, log_rational, max_precision_bits

CASE1 = "Case1"
CASE2 = "Case2"
CASE31 = "Case31"
CASE32 = "Case32"
CASE331 = "Case331"
CASE332 = "Case332"
CASE333 = "Case333"
ALL_CASES = (CASE1, CASE2, CASE31, CASE32, CASE331, CASE332, CASE333)

DECREASING = "Decreasing"
L1 = "L1"
L2 = "L2"

ROOT_MAX_ITER = 256


class OutOfRange(ValueError):
    """The requested value is not attained on the chosen branch."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


@dataclass(frozen=True)
class Envelope:
    b: tuple
    Q: tuple

    def __post_init__(self):
        b = tuple(_frac(x) for x in self.b)
        Q = tuple(_frac(x) for x in self.Q)
        if not b or len(b) != len(Q):
            raise ValueError("b and Q must be non-empty and of equal length")
        if any(x <= 0 for x in b) or any(x <= 0 for x in Q):
            raise ValueError("all b_i and Q_i must be positive")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "Q", Q)

    @classmethod
    def from_indices(cls, b: Sequence, q: Sequence[int], r: int) -> "Envelope":
        return cls(tuple(b), tuple(Fraction(qi, r) for qi in q))

    @property
    def k(self) -> int:
        return len(self.b)

    @cached_property
    def _floats(self) -> tuple[list[float], list[float]]:
        bf = [float(x) for x in self.b]
        lf = [math.log(x.numerator) - math.log(x.denominator) for x in self.Q]
        return bf, lf

    def value(self, u: float, order: int = 0) -> float:
        """Double precision E, E' or E'' at u."""
        bf, lf = self._floats
        return math.fsum(b * math.exp(u * l) * l**order for b, l in zip(bf, lf))

    @property
    def has_interior_min(self) -> bool:
        return any(x < 1 for x in self.Q) and any(x > 1 for x in self.Q)

    @property
    def direction(self) -> int:
        """-1 if E is decreasing, +1 if increasing, 0 otherwise."""
        if self.has_interior_min:
            return 0
        if any(x < 1 for x in self.Q):
            return -1
        if any(x > 1 for x in self.Q):
            return 1
        return 0

    @property
    def flat_part(self) -> Fraction:
        """Sum of b_i over Q_i == 1: the limit of a monotone E at its flat end."""
        return sum((b for b, x in zip(self.b, self.Q) if x == 1), Fraction(0))


@dataclass(frozen=True)
class CriticalData:
    u0: BoundedReal
    m: BoundedReal

    @property
    def u0_float(self) -> float:
        return float(self.u0.mid)

    @property
    def m_float(self) -> float:
        return float(self.m.mid)


# ---------------------------------------------------------------------------
# rigorous evaluation


def _as_bounded(u, bits: int) -> BoundedReal:
    if isinstance(u, BoundedReal):
        return u
    if isinstance(u, mpmath.mpf):
        return BoundedReal.from_raw(u._mpf_, u._mpf_, bits)
    return BoundedReal.exact(u, bits)


def _integral(u) -> int | None:
    if isinstance(u, bool):
        return None
    if isinstance(u, int):
        return u
    if isinstance(u, Fraction) and u.denominator == 1:
        return u.numerator
    return None


def eval_derivatives(env: Envelope, u, order: int = 0, bits: int = 64) -> BoundedReal:
    """Enclosure of E(u), E'(u) or E''(u); u may be a number or an enclosure."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    n = _integral(u)
    if order == 0 and n is not None:
        exact = sum((b * x**n for b, x in zip(env.b, env.Q)), Fraction(0))
        return BoundedReal.exact(exact, bits)
    U = _as_bounded(u, bits)
    total = BoundedReal.exact(0, bits)
    for b, x in zip(env.b, env.Q):
        if x == 1:
            if order == 0:
                total = total + b
            continue
        lq = log_rational(x, bits)
        term = (U * lq).exp() * b
        if order == 1:
            term = term * lq
        elif order == 2:
            term = term * lq.square()
        total = total + term
    return total


def _mp_eval(env: Envelope, u, order: int):
    """mpmath value of E^(order)(u) at the current working precision."""
    total = mpmath.mpf(0)
    for b, x in zip(env.b, env.Q):
        lq = mpmath.log(mpmath.mpf(x.numerator) / x.denominator)
        total += mpmath.mpf(b.numerator) / b.denominator * mpmath.exp(u * lq) * lq**order
    return total


def _signed(fn: Callable[[int], BoundedReal], bits: int, ceiling: int) -> int:
    """Sign of an enclosure, raising precision until decided (0 if never)."""
    while True:
        s = fn(bits).sign()
        if s or bits >= ceiling:
            return s
        bits *= 2


def _refine_root(sign_at, a, b, guess, tol, max_iter: int = ROOT_MAX_ITER):
    """Shrink [a, b] around the sign change of an increasing function.

    sign_at(u) must return -1, 0 or +1 from a rigorous evaluation, with
    sign_at(a) <= 0 <= sign_at(b).  A good guess is tried first with a bracket
    of width tol; bisection on [a, b] is the fallback.
    """
    if guess is not None and a < guess < b:
        x1 = max(a, guess - tol / 4)
        x2 = min(b, guess + tol / 4)
        s1 = sign_at(x1)
        if s1 == 0:
            return x1, x1
        if s1 < 0:
            a = x1
            s2 = sign_at(x2)
            if s2 == 0:
                return x2, x2
            if s2 > 0:
                return x1, x2
            a = x2
        else:
            b = x1
    for _ in range(max_iter):
        if b - a <= tol:
            break
        mid = (a + b) / 2
        s = sign_at(mid)
        if s == 0:
            return mid, mid
        if s < 0:
            a = mid
        else:
            b = mid
    return a, b


def _mp_newton(env: Envelope, order: int, target, x0, lo, hi, steps: int = 12):
    """Newton iteration for E^(order)(u) = target, kept inside (lo, hi)."""
    x = mpmath.mpf(x0)
    eps = mpmath.mpf(2) ** (-mpmath.mp.prec + 8)
    for _ in range(steps):
        f = _mp_eval(env, x, order) - target
        d = _mp_eval(env, x, order + 1)
        if d == 0:
            break
        step = f / d
        nxt = x - step
        if not lo < nxt < hi:
            break
        x = nxt
        if abs(step) <= eps * max(1, abs(x)):
            break
    return x


# ---------------------------------------------------------------------------
# critical point


def _float_critical_guess(env: Envelope, lo: float, hi: float) -> float:
    bf, lf = env._floats
    if env.k == 2 and lf[0] * lf[1] < 0:
        (b1, l1), (b2, l2) = sorted(zip(bf, lf), key=lambda t: t[1])
        return math.log(b1 * -l1 / (b2 * l2)) / (l2 - l1)
    # safeguarded Newton on E'
    x = 0.5 * (lo + hi)
    for _ in range(200):
        d1, d2 = env.value(x, 1), env.value(x, 2)
        if d1 > 0:
            hi = x
        else:
            lo = x
        nxt = x - d1 / d2 if d2 > 0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 1e-15 * max(1.0, abs(x)):
            return nxt
        x = nxt
    return x


def _expand_bracket(f: Callable[[float], float], lo: float, hi: float) -> tuple[float, float]:
    """Grow [lo, hi] geometrically until f(lo) < 0 < f(hi) for increasing f."""
    for _ in range(200):
        if f(lo) < 0:
            break
        lo -= 2 * (hi - lo)
    for _ in range(200):
        if f(hi) > 0:
            break
        hi += 2 * (hi - lo)
    return lo, hi


def _safe(f: Callable[[float], float]) -> Callable[[float], float]:
    def g(u: float) -> float:
        try:
            return f(u)
        except OverflowError:
            return math.inf if u > 0 else -math.inf
    return g


def critical_point(
    env: Envelope,
    tol: float = 1e-14,
    bracket: tuple[float, float] = (-2.0, 64.0),
    bits: int = 64,
) -> CriticalData | None:
    """Minimiser u0 of E and the minimum m, or None when E is monotone.

    u0 is returned as a certified bracket of width <= tol on which E' changes
    sign; m is E evaluated over that bracket.
    """
    if not env.has_interior_min:
        return None
    lo, hi = _expand_bracket(_safe(lambda u: env.value(u, 1)), *bracket)
    guess = _float_critical_guess(env, lo, hi)
    scale = max(1.0, abs(guess))
    wp = max(bits, int(math.log2(scale / tol)) + 32)
    ceiling = max(max_precision_bits(), wp)
    with mpmath.workprec(wp + 16):
        a, b = mpmath.mpf(lo), mpmath.mpf(hi)
        if a < guess < b:
            guess = _mp_newton(env, 1, 0, guess, a, b)
        sign_at = lambda u: _signed(lambda p: eval_derivatives(env, u, 1, p), wp, ceiling)
        u_lo, u_hi = _refine_root(sign_at, a, b, guess, mpmath.mpf(tol))
        u0 = BoundedReal(+u_lo, +u_hi, wp)
    m = eval_derivatives(env, u0, 0, wp)
    return CriticalData(u0, m)


# ---------------------------------------------------------------------------
# inverse branches


def _float_of(y) -> float:
    if isinstance(y, BoundedReal):
        return float(y.mid)
    return float(y)


def invert_on_branch(
    env: Envelope,
    y,
    branch: str,
    tol: float | None = None,
    bits: int = 64,
    crit: CriticalData | None = None,
) -> BoundedReal:
    """Enclosure of the u on the given monotone branch with E(u) = y.

    Decreasing: E monotone (all Q_i < 1, or all Q_i > 1 mirrored).
    L1: the decreasing branch (-inf, u0].  L2: the increasing branch [u0, inf).
    """
    yf = _float_of(y)
    Y = y if isinstance(y, BoundedReal) else BoundedReal.exact(y, bits)
    if branch == DECREASING:
        d = env.direction
        if d == 0:
            raise ValueError("E has an interior minimum (or is constant); use L1 or L2")
        floor_val = float(env.flat_part)
        if not yf > floor_val or not Y.definitely_gt(env.flat_part):
            raise OutOfRange(f"y={yf} is not above the limit {floor_val} of E")
        lo, hi = _expand_bracket(_safe(lambda u: d * (env.value(u) - yf)), -1.0, 1.0)
        sgn = d
    elif branch in (L1, L2):
        if not env.has_interior_min:
            raise ValueError("E is monotone; use the Decreasing branch")
        crit = crit or critical_point(env, bits=bits)
        if Y.definitely_lt(crit.m):
            raise OutOfRange(f"y={yf} is below the minimum {crit.m_float}")
        if not Y.definitely_gt(crit.m):
            return crit.u0
        u0 = crit.u0_float
        if branch == L2:
            lo, hi = u0, u0 + 1.0
            f = _safe(lambda u: env.value(u) - yf)
            while f(hi) < 0:
                hi = u0 + 2 * (hi - u0)
            lo = float(crit.u0.hi)
            sgn = 1
        else:
            lo, hi = u0 - 1.0, u0
            f = _safe(lambda u: env.value(u) - yf)
            while f(lo) < 0:
                lo = u0 - 2 * (u0 - lo)
            hi = float(crit.u0.lo)
            sgn = -1
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return _solve_monotone(env, Y, sgn, lo, hi, tol, bits)


def _solve_monotone(env: Envelope, Y: BoundedReal, sgn: int, lo, hi, tol, bits: int) -> BoundedReal:
    """Root of E(u) = Y on [lo, hi] where sgn * (E - Y) is increasing."""
    yf = float(Y.mid)
    # float guess by safeguarded Newton
    a, b = float(lo), float(hi)
    x = 0.5 * (a + b)
    for _ in range(100):
        fx = sgn * (env.value(x) - yf)
        if fx > 0:
            b = x
        else:
            a = x
        d = sgn * env.value(x, 1)
        nxt = x - fx / d if d > 0 else 0.5 * (a + b)
        if not a < nxt < b:
            nxt = 0.5 * (a + b)
        if abs(nxt - x) <= 1e-16 * max(1.0, abs(x)):
            x = nxt
            break
        x = nxt
    if tol is None:
        tol = 2.0 ** -(bits - 12) * max(1.0, abs(x))
    wp = max(bits, int(math.log2(max(1.0, abs(x)) / tol)) + 24)
    ceiling = max(max_precision_bits(), wp)
    with mpmath.workprec(wp + 16):
        A, B = mpmath.mpf(lo), mpmath.mpf(hi)
        ymp = Y.mid
        guess = _mp_newton(env, 0, ymp, x, A, B) if A < x < B else None
        sign_at = lambda u: sgn * _signed(lambda p: eval_derivatives(env, u, 0, p) - Y, wp, ceiling)
        r_lo, r_hi = _refine_root(sign_at, A, B, guess, mpmath.mpf(tol))
        return BoundedReal(+r_lo, +r_hi, wp)


# ---------------------------------------------------------------------------
# case classification and cover sets


def cover_bits(r: int, beta: float) -> int:
    """Working precision that resolves r**-beta with a comfortable margin."""
    need = 96 + math.ceil(beta * math.log2(r))
    return 64 * -(-need // 64)


def eps_enclosure(r: int, beta: float, bits: int) -> BoundedReal:
    """Enclosure of r**-beta."""
    return (log_rational(Fraction(r), bits) * (-Fraction(beta))).exp()


def default_x_exponent(beta: float) -> float:
    return 2 * (1 - beta) / 3


def _nu(env: Envelope) -> tuple[int, ...]:
    if any(x == 1 for x in env.Q):
        raise ValueError("some q_j equals r; reduce the equation first")
    return tuple(0 if x < 1 else 1 for x in env.Q)


def classify_envelope(
    env: Envelope,
    r: int,
    beta: float,
    gamma: float = math.inf,
    x_exponent: float | None = None,
    crit: CriticalData | None = None,
    bits: int | None = None,
) -> str:
    """Case tag of J(q; r).  Ties between adjacent subcases go to the one with
    the larger diameter bound: u0 near beta or gamma -> Case 3.3; m near 1+eps
    or near 1-X -> Case 3.3.1."""
    nu = _nu(env)
    if not any(nu):
        return CASE1
    if all(nu):
        return CASE2
    bits = bits or cover_bits(r, beta)
    if crit is None:
        crit = critical_for_cover(env, r, beta, bits)
    u0 = crit.u0
    if u0.hi <= beta:
        return CASE31
    if gamma != math.inf and u0.lo >= gamma:
        return CASE32
    eps = eps_enclosure(r, beta, bits)
    if crit.m.definitely_gt(eps + 1):
        return CASE332
    xe = default_x_exponent(beta) if x_exponent is None else x_exponent
    X = (log_rational(Fraction(r), bits) * Fraction(xe)).exp()
    if crit.m.definitely_lt(1 - X):
        return CASE333
    return CASE331


def critical_for_cover(env: Envelope, r: int, beta: float, bits: int | None = None) -> CriticalData:
    bits = bits or cover_bits(r, beta)
    # resolve u0 finely enough that the minimum is known to well below r**-beta
    tol = 2.0 ** -(bits - 40)
    return critical_point(env, tol=tol, bits=bits)


@dataclass(frozen=True)
class CoverInterval:
    """J(q; r): the part of [s, t] where |E(u) - 1| <= r**-beta.

    ``pieces`` lists the closed components kept apart (two only for Case 3.3.3,
    one per branch); other cases store the hull as a single piece.
    """

    q: tuple | None
    r: int
    lo: BoundedReal | None
    hi: BoundedReal | None
    empty: bool
    case_tag: str
    pieces: tuple = ()
    diam: float = 0.0
    piece_diams: tuple = ()
    u0: float | None = None
    deficit: float | None = None  # 1 - m, for envelopes with an interior minimum
    source: str = "rigorous"

    def contains(self, u) -> bool:
        """Whether u lies in one of the pieces (using outer enclosure endpoints)."""
        U = u if isinstance(u, BoundedReal) else BoundedReal.exact(u, 64)
        return any(a.lo <= U.lo and U.hi <= b.hi for a, b in self.pieces)

    @property
    def premeasure_diams(self) -> tuple:
        return self.piece_diams if self.case_tag == CASE333 else ((self.diam,) if not self.empty else ())


def _diam(a: BoundedReal, b: BoundedReal) -> float:
    with mpmath.workprec(max(a.precision_bits, b.precision_bits) + 16):
        return float(max(mpmath.mpf(0), b.hi - a.lo))


def _piece(env, a, b, sgn, lo_y, hi_y, bits, ceiling):
    """Sub-interval of [a, b] (a monotone piece, sgn=+1 increasing) where E in [lo_y, hi_y].

    Returns None when certainly empty; unresolved comparisons keep the larger set.
    """
    A = BoundedReal(a, a, bits)
    B = BoundedReal(b, b, bits)

    def cmp(u_bounded, target):
        # sign of E(u) - target, raising precision; 0 if unresolved
        return _signed(lambda p: eval_derivatives(env, u_bounded, 0, p) - target, bits, ceiling)

    # on a decreasing piece the big end is a, on an increasing piece it is b
    big, small = (A, B) if sgn < 0 else (B, A)
    if cmp(small, hi_y) > 0 or cmp(big, lo_y) < 0:
        return None
    # boundary where E crosses hi_y (near the big end) and lo_y (near the small end)
    if cmp(big, hi_y) > 0:
        cut_hi = _solve_monotone(env, hi_y, sgn, a, b, None, bits)
    else:
        cut_hi = big
    if cmp(small, lo_y) < 0:
        cut_lo = _solve_monotone(env, lo_y, sgn, a, b, None, bits)
    else:
        cut_lo = small
    return (cut_hi, cut_lo) if sgn < 0 else (cut_lo, cut_hi)


def cover_interval(
    env: Envelope,
    r: int,
    beta: float,
    s: float,
    t: float,
    gamma: float = math.inf,
    x_exponent: float | None = None,
    q: tuple | None = None,
    case_tag: str | None = None,
) -> CoverInterval:
    # the covering itself needs beta < s; a single cover set only needs s < t
    if not (beta > 1 and s < t):
        raise ValueError(f"need beta > 1 and s < t, got beta={beta}, s={s}, t={t}")
    if r < 2:
        raise ValueError("r must be at least 2")
    bits = cover_bits(r, beta)
    ceiling = max(max_precision_bits(), bits)
    eps = eps_enclosure(r, beta, bits)
    lo_y, hi_y = 1 - eps, 1 + eps
    crit = critical_for_cover(env, r, beta, bits) if env.has_interior_min else None
    constant = env.direction == 0 and crit is None
    if case_tag is None:
        case_tag = classify_envelope(env, r, beta, gamma, x_exponent, crit, bits) if not constant else CASE1
    u0f = crit.u0_float if crit else None
    deficit = None
    if crit:
        with mpmath.workprec(bits + 16):
            deficit = float(1 - crit.m.mid)
    S, T = mpmath.mpf(s), mpmath.mpf(t)

    def make(pieces):
        pieces = [p for p in pieces if p is not None]
        if not pieces:
            return CoverInterval(q, r, None, None, True, case_tag, (), 0.0, (), u0f, deficit)
        lo, hi = pieces[0][0], pieces[-1][1]
        diams = tuple(_diam(a, b) for a, b in pieces)
        hull = _diam(lo, hi)
        kept = tuple(pieces) if case_tag == CASE333 else ((lo, hi),)
        kept_d = diams if case_tag == CASE333 else (hull,)
        return CoverInterval(q, r, lo, hi, False, case_tag, kept, hull, kept_d, u0f, deficit)

    if case_tag == CASE332:
        # the minimum exceeds 1 + eps, so E never comes within eps of 1
        return make([])
    if constant:
        inside = _signed(lambda p: eval_derivatives(env, 0, 0, p) - 1, bits, ceiling) == 0
        if inside:
            return make([(BoundedReal(S, S, bits), BoundedReal(T, T, bits))])
        return make([])
    with mpmath.workprec(bits + 16):
        if crit is None:
            sgn = env.direction
            return make([_piece(env, S, T, sgn, lo_y, hi_y, bits, ceiling)])
        c = crit.u0.mid
        if c <= S:
            return make([_piece(env, S, T, 1, lo_y, hi_y, bits, ceiling)])
        if c >= T:
            return make([_piece(env, S, T, -1, lo_y, hi_y, bits, ceiling)])
        left = _piece(env, S, c, -1, lo_y, hi_y, bits, ceiling)
        right = _piece(env, c, T, 1, lo_y, hi_y, bits, ceiling)
        if left is not None and right is not None and left[1].hi >= right[0].lo:
            return make([(left[0], right[1])])
        return make([left, right])
