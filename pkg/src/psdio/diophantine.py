"""Linear equations y = a_1 x_1 + ... + a_k x_k over floor(n**alpha).

The solver enumerates y = floor(r**alpha) and all but the last unknown, then
recovers the last one from the remainder by an exact membership lookup.
"""

from __future__ import annotations

import bisect
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .ps_seq import is_member
from .rigor import Alpha, floor_pow

TRIVIAL = "Trivial"
NON_TRIVIAL = "NonTrivial"
DEGENERATE = "Degenerate"

SMALLEST = "SmallestLessThanX"
LARGEST = "LargestLessThanX"

_MASK = (1 << 64) - 1


class EquationViolated(ValueError):
    pass


class InvalidCollision(ValueError):
    pass


class CoefficientNotRational(TypeError):
    pass


class DegenerateFit(ValueError):
    pass


def _as_fraction(a) -> Fraction:
    if isinstance(a, Fraction):
        return a
    if isinstance(a, int):
        return Fraction(a)
    if isinstance(a, str):
        return Fraction(a.strip())
    raise CoefficientNotRational(f"coefficient {a!r} is not an exact rational")


@dataclass(frozen=True)
class LinearEquation:
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        coeffs = tuple(_as_fraction(a) for a in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if not coeffs:
            raise ValueError("an equation needs at least one coefficient")
        if any(a <= 0 for a in coeffs):
            raise ValueError(f"coefficients must be positive, got {[str(a) for a in coeffs]}")

    @classmethod
    def parse(cls, text: str) -> "LinearEquation":
        return cls(tuple(Fraction(part.strip()) for part in text.split(",") if part.strip()))

    @property
    def k(self) -> int:
        return len(self.coeffs)

    def holds(self, y: int, xs: Sequence[int]) -> bool:
        if len(xs) != self.k:
            return False
        return Fraction(y) == sum((a * x for a, x in zip(self.coeffs, xs)), Fraction(0))

    def integerized(self) -> tuple[int, list[int]]:
        """(D, c) with D*y = sum c_i x_i equivalent to the equation."""
        D = 1
        for a in self.coeffs:
            D = D * a.denominator // math.gcd(D, a.denominator)
        return D, [int(a * D) for a in self.coeffs]

    def __str__(self) -> str:
        return ",".join(str(a) for a in self.coeffs)


@dataclass(frozen=True)
class SolutionTuple:
    r: int
    q: tuple[int, ...]
    y_value: int
    x_values: tuple[int, ...]
    classification: str | None = None

    def key(self) -> tuple:
        return (self.r, self.q)


@dataclass(frozen=True)
class YEqualsX:
    i: int  # 1-based


@dataclass(frozen=True)
class XEqualsX:
    i: int  # 1-based, i < j
    j: int


def classify_solution(eq: LinearEquation, sol: SolutionTuple) -> str:
    if not eq.holds(sol.y_value, sol.x_values):
        raise EquationViolated(f"{sol.y_value} != sum a_i x_i for x={list(sol.x_values)}")
    values = (sol.y_value, *sol.x_values)
    if sum(eq.coeffs) == 1 and len(set(values)) == 1:
        return TRIVIAL
    if len(set(values)) < len(values):
        return DEGENERATE
    return NON_TRIVIAL


def find_collision(sol: SolutionTuple):
    """First value collision of a solution, preferring y = x_i."""
    for i, x in enumerate(sol.x_values, start=1):
        if x == sol.y_value:
            return YEqualsX(i)
    xs = sol.x_values
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            if xs[i] == xs[j]:
                return XEqualsX(i + 1, j + 1)
    return None


def reduce_equation(eq: LinearEquation, collision) -> LinearEquation:
    a = list(eq.coeffs)
    if isinstance(collision, YEqualsX):
        i = collision.i - 1
        if not 0 <= i < len(a):
            raise IndexError(f"no coefficient {collision.i}")
        if a[i] >= 1:
            raise InvalidCollision(f"y = x_{collision.i} needs a_{collision.i} < 1, got {a[i]}")
        if len(a) == 1:
            raise InvalidCollision("cannot remove the only variable")
        scale = 1 - a[i]
        return LinearEquation(tuple(aj / scale for j, aj in enumerate(a) if j != i))
    if isinstance(collision, XEqualsX):
        i, j = collision.i - 1, collision.j - 1
        if not (0 <= i < len(a) and 0 <= j < len(a)) or i == j:
            raise IndexError(f"bad collision pair {collision}")
        i, j = min(i, j), max(i, j)
        merged = a[:j] + a[j + 1 :]
        merged[i] = a[i] + a[j]
        return LinearEquation(tuple(merged))
    raise TypeError(f"unknown collision {collision!r}")


def reduce_solution(sol: SolutionTuple, collision) -> SolutionTuple:
    """Drop the duplicated variable, matching reduce_equation."""
    q, xs = list(sol.q), list(sol.x_values)
    drop = collision.i - 1 if isinstance(collision, YEqualsX) else max(collision.i, collision.j) - 1
    del q[drop], xs[drop]
    return SolutionTuple(sol.r, tuple(q), sol.y_value, tuple(xs))


# ---------------------------------------------------------------------------
# search


def pruning_limit(a: Fraction, r: int, alpha: Alpha) -> float:
    """The index bound (r**alpha / a + 1)**(1/alpha): every admissible q is below it."""
    av = float(alpha.value)
    return (float(r) ** av / float(a) + 1.0) ** (1.0 / av)


def _prefix(alpha: Alpha, N: int, coeffs: Sequence[Fraction]) -> list[int]:
    """Values floor(n**alpha) for every index that can occur with y <= floor(N**alpha)."""
    vals = [floor_pow(n, alpha) for n in range(1, N + 1)]
    rest = sum(coeffs) - min(coeffs)  # every other x_i is at least 1
    cap = (vals[-1] - rest) / min(coeffs)
    n = N
    while True:
        v = floor_pow(n + 1, alpha)
        if v > cap:
            break
        vals.append(v)
        n += 1
    return vals


class _Searcher:
    """Per-r solver over a fixed prefix of the sequence."""

    def __init__(self, coeffs: Sequence[Fraction], vals: list[int], membership: str, alpha: Alpha | None):
        self.eq = LinearEquation(tuple(coeffs))
        self.D, self.c = self.eq.integerized()
        self.k = len(self.c)
        self.vals = vals
        self.membership = membership
        self.alpha = alpha
        self.vres = np.array([v & _MASK for v in vals], dtype=np.uint64)
        ck = self.c[-1]
        keys = (self.vres * np.uint64(ck & _MASK)) if ck & _MASK else np.zeros_like(self.vres)
        self.order = np.argsort(keys, kind="stable")
        self.keys = keys[self.order]
        # smallest possible contribution of x_{i+1..k}
        self.tail_min = [sum(self.c[i + 1 :]) for i in range(self.k)]

    def _last(self, T: int) -> list[int]:
        """Indices q with c_k * floor(q**alpha) == T."""
        ck = self.c[-1]
        if T <= 0 or T % ck:
            return []
        x = T // ck
        if self.membership == "preimage":
            n = is_member(x, self.alpha)
            return [] if n is None else [n]
        i = bisect.bisect_left(self.vals, x)
        return [i + 1] if i < len(self.vals) and self.vals[i] == x else []

    def _vector_level(self, rem: int, prefix: tuple, out: list):
        """Enumerate q_{k-1} for a fixed prefix and resolve q_k for all of them."""
        level = self.k - 2
        c1, ck = self.c[level], self.c[-1]
        budget = rem - ck
        if budget < c1:
            return
        hi = bisect.bisect_right(self.vals, budget // c1)
        if hi == 0:
            return
        if self.membership == "preimage":
            for q1 in range(1, hi + 1):
                for qk in self._last(rem - c1 * self.vals[q1 - 1]):
                    out.append(prefix + (q1, qk))
            return
        T = np.uint64(rem & _MASK) - self.vres[:hi] * np.uint64(c1 & _MASK)
        left = np.searchsorted(self.keys, T, side="left")
        right = np.searchsorted(self.keys, T, side="right")
        for j in np.nonzero(right > left)[0]:
            q1 = int(j) + 1
            t_exact = rem - c1 * self.vals[q1 - 1]
            for pos in range(int(left[j]), int(right[j])):
                qk = int(self.order[pos]) + 1
                if ck * self.vals[qk - 1] == t_exact:
                    out.append(prefix + (q1, qk))

    def _recurse(self, level: int, rem: int, prefix: tuple, out: list):
        if level == self.k - 2:
            self._vector_level(rem, prefix, out)
            return
        ci = self.c[level]
        budget = rem - self.tail_min[level]
        for qi in range(1, len(self.vals) + 1):
            v = ci * self.vals[qi - 1]
            if v > budget:
                break
            self._recurse(level + 1, rem - v, prefix + (qi,), out)

    def solve_r(self, r: int) -> list[tuple[int, tuple[int, ...]]]:
        Y = self.D * self.vals[r - 1]
        if self.k == 1:
            return [(r, (q,)) for q in self._last(Y)]
        out: list[tuple] = []
        self._recurse(0, Y, (), out)
        return [(r, q) for q in out]


_WORKER: _Searcher | None = None


def _init_worker(coeffs, vals, membership, alpha):
    global _WORKER
    _WORKER = _Searcher(coeffs, vals, membership, alpha)


def _solve_block(rs: list[int]):
    return [hit for r in rs for hit in _WORKER.solve_r(r)]


def _build_solution(eq: LinearEquation, vals: list[int], r: int, q: tuple[int, ...]) -> SolutionTuple:
    sol = SolutionTuple(r, tuple(q), vals[r - 1], tuple(vals[i - 1] for i in q))
    return SolutionTuple(sol.r, sol.q, sol.y_value, sol.x_values, classify_solution(eq, sol))


def search_solutions(
    eq: LinearEquation,
    alpha: Alpha,
    N: int,
    jobs: int = 1,
    membership: str = "table",
) -> list[SolutionTuple]:
    """All solutions with r <= N, in (r, q) lexicographic order.

    membership="table" matches the last unknown against the materialised
    prefix (residues mod 2**64 locate candidates, exact integers confirm them);
    "preimage" calls is_member on each remainder instead.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    if membership not in ("table", "preimage"):
        raise ValueError(f"membership must be 'table' or 'preimage', got {membership!r}")
    for a in eq.coeffs:
        _as_fraction(a)
    vals = _prefix(alpha, N, eq.coeffs)
    rs = list(range(1, N + 1))
    if jobs <= 1:
        searcher = _Searcher(eq.coeffs, vals, membership, alpha)
        hits = [hit for r in rs for hit in searcher.solve_r(r)]
    else:
        blocks = [rs[i::jobs * 4] for i in range(jobs * 4)]
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(eq.coeffs, vals, membership, alpha)
        ) as pool:
            hits = [hit for block in pool.map(_solve_block, blocks) for hit in block]
    hits.sort()
    return [_build_solution(eq, vals, r, q) for r, q in hits]


def brute_force_solutions(eq: LinearEquation, alpha: Alpha, N: int) -> list[SolutionTuple]:
    """Reference search: every index tuple up to the pruning bound, checked exactly.

    Works for k <= 3 by full enumeration of the index box, so keep N small.
    """
    vals_all = [floor_pow(n, alpha) for n in range(1, N + 1)]
    P = max(int(pruning_limit(a, N, alpha)) + 1 for a in eq.coeffs)
    vals = vals_all + [floor_pow(n, alpha) for n in range(N + 1, P + 1)]
    D, c = eq.integerized()
    k = len(c)
    V = np.array(vals, dtype=object)
    ys = {D * vals[r - 1]: r for r in range(1, N + 1)}
    total = np.zeros((1,) * k, dtype=object)
    for i in range(k):
        shape = [1] * k
        shape[i] = len(vals)
        total = total + (c[i] * V).reshape(shape)
    out = []
    for idx in zip(*np.nonzero(np.isin(total, list(ys.keys())))):
        q = tuple(int(i) + 1 for i in idx)
        r = ys[total[idx]]
        out.append((r, q))
    out.sort()
    return [_build_solution(eq, vals, r, q) for r, q in out]


# ---------------------------------------------------------------------------
# counting solutions of floor(l^a) + floor(m^a) = floor(n^a)


def floor_pow_array(ms: np.ndarray, alpha: Alpha) -> np.ndarray:
    """Exact floor(m**alpha) for an int64 array, via doubles with exact fallback."""
    ms = np.asarray(ms, dtype=np.int64)
    approx = ms.astype(np.float64) ** float(alpha.value)
    out = np.floor(approx)
    frac = approx - out
    tol = np.maximum(1e-9, approx * 1e-14)
    unsafe = (approx > 2.0**50) | (frac < tol) | (frac > 1 - tol)
    res = out.astype(np.int64)
    for i in np.nonzero(unsafe)[0]:
        res[i] = floor_pow(int(ms[i]), alpha)
    return res


def _bisect_increasing(f, target: float, lo: int, hi: int) -> int:
    """Least integer m in [lo, hi] with f(m) >= target (hi if none)."""
    if f(lo) >= target:
        return lo
    if f(hi) < target:
        return hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def _count_first_below(alpha: Alpha, x: int, n_bound: int) -> int:
    """#{(l, m, n): l < x, n < n_bound, floor(l^a) + floor(m^a) = floor(n^a)}."""
    av = float(alpha.value)
    total = 0
    for l in range(1, x):
        L = floor_pow(l, alpha)
        j = 1
        while True:
            # (m+j)^a - m^a without cancellation
            g = lambda m, j=j: m**av * math.expm1(av * math.log1p(j / m))
            if g(1) > L + 1 + 1e-9 * L or 1 + j >= n_bound:
                break
            m_max = n_bound - 1 - j
            lo = _bisect_increasing(g, L - 1 - 1e-9 * L - 1e-9, 1, m_max)
            hi = _bisect_increasing(g, L + 1 + 1e-9 * L + 1e-9, lo, m_max)
            if lo <= hi:
                ms = np.arange(lo, hi + 1, dtype=np.int64)
                diff = floor_pow_array(ms + j, alpha) - floor_pow_array(ms, alpha)
                total += int(np.count_nonzero(diff == L))
            j += 1
    return total


def count_fermat(alpha: Alpha, x: int, mode: str = LARGEST, n_bound: int | None = None) -> int:
    """Count ordered triples (l, m, n) with floor(l^a) + floor(m^a) = floor(n^a).

    LargestLessThanX requires n < x.  SmallestLessThanX requires min(l, m) < x
    and n < n_bound, default x**(ceil(beta) + 1) with beta = 1/(alpha - 1).
    """
    if x < 2:
        raise ValueError("x must be at least 2")
    if mode == LARGEST:
        if x - 1 < 2:
            return 0
        return len(search_solutions(LinearEquation((Fraction(1), Fraction(1))), alpha, x - 1))
    if mode != SMALLEST:
        raise ValueError(f"unknown counting mode {mode!r}")
    if n_bound is None:
        beta = 1 / (alpha.value - 1)
        n_bound = x ** (math.ceil(beta) + 1)
    first = _count_first_below(alpha, x, n_bound)
    # both l and m below x: n is then bounded by the pruning bound anyway
    vals = {floor_pow(n, alpha): n for n in range(1, 2 * x + 2)}
    xs = [floor_pow(i, alpha) for i in range(1, x)]
    both = sum(1 for a in xs for b in xs if (n := vals.get(a + b)) is not None and n < n_bound)
    return 2 * first - both


def brute_force_count(alpha: Alpha, x: int, mode: str, n_bound: int | None = None) -> int:
    """Triple-loop reference for count_fermat on small x."""
    if mode == LARGEST:
        n_top = x - 1
        l_top = m_top = x - 1
    else:
        if n_bound is None:
            n_bound = x ** (math.ceil(1 / (alpha.value - 1)) + 1)
        n_top = n_bound - 1
        l_top = m_top = n_top
    vals = [floor_pow(n, alpha) for n in range(1, n_top + 1)]
    lookup = {v: i + 1 for i, v in enumerate(vals)}
    count = 0
    for l in range(1, l_top + 1):
        for m in range(1, m_top + 1):
            if mode == SMALLEST and min(l, m) >= x:
                continue
            s = vals[l - 1] + vals[m - 1]
            if s > vals[-1]:
                break
            if s in lookup:
                count += 1
    return count


# ---------------------------------------------------------------------------
# growth model


def zeta_certified(s: float, N: int = 1000) -> tuple[float, float]:
    """zeta(s) for real s > 0, s != 1, by Euler-Maclaurin; returns (value, error bound).

    Head sum of n**-s for n < N, then the integral, the half term and the
    Bernoulli corrections through B_4.  The remainder is bounded by the first
    omitted correction, which is valid since x**-s is completely monotone.
    """
    if s <= 0 or s == 1:
        raise ValueError("need s > 0 and s != 1")
    with mpmath.workdps(40):
        S = mpmath.mpf(s)
        head = mpmath.fsum(mpmath.mpf(n) ** -S for n in range(1, N))
        Nm = mpmath.mpf(N)
        tail = Nm ** (1 - S) / (S - 1) + Nm**-S / 2
        tail += S * Nm ** (-S - 1) / 12
        tail -= S * (S + 1) * (S + 2) * Nm ** (-S - 3) / 720
        bound = S * (S + 1) * (S + 2) * (S + 3) * (S + 4) * Nm ** (-S - 5) / 30240
        return float(head + tail), float(bound) + 1e-16 * float(abs(head + tail))


@dataclass(frozen=True)
class GrowthModel:
    beta: float
    zeta_beta: float
    predicted_exponent: float
    leading_constant: float
    zeta_error: float = field(default=0.0, compare=False)

    @classmethod
    def from_alpha(cls, alpha: Alpha) -> "GrowthModel":
        a = float(alpha.value)
        beta = 1.0 / (a - 1.0)
        z, err = zeta_certified(beta)
        return cls(beta, z, a * (beta - 1) + 1, beta * a**-beta * z, err)


def fit_growth_exponent(points: Iterable[tuple[float, float]]) -> tuple[float, float, float]:
    """Least squares of log(count) on log(x): (slope, intercept, max abs residual)."""
    pts = [(float(x), float(c)) for x, c in points if c > 0 and x > 0]
    if len(pts) < 3:
        raise DegenerateFit(f"need at least 3 positive counts, got {len(pts)}")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    residual = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return float(slope), float(intercept), residual


def default_jobs() -> int:
    return max(1, min(8, os.cpu_count() or 1))
