"""Covering families J(q; r), premeasure sums and the checks built on them.

For every radius r the index vectors q run over products of the sets
I^(0)(r) = [1, r) and I^(1)(r) = (r, B_j r).  Most q give an empty J, so the
enumeration first narrows the last index to a window implied by necessary
conditions, then evaluates the remaining candidates in double precision with
numpy.  Candidates whose float evaluation sits near a decision boundary (an
endpoint value within eps of 1, u0 near beta or gamma, the minimum near
1 - X or 1 + eps, a near-tangent crossing) are recomputed with the rigorous
scalar routine from ``envelope``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import mpmath
import numpy as np

from .diophantine import TRIVIAL, LinearEquation, SolutionTuple, YEqualsX, find_collision, reduce_equation, reduce_solution
from .envelope import (
    ALL_CASES,
    CASE1,
    CASE2,
    CASE31,
    CASE32,
    CASE331,
    CASE332,
    CASE333,
    CoverInterval,
    Envelope,
    _signed,
    cover_bits,
    cover_interval,
    critical_point,
    default_x_exponent,
    eps_enclosure,
    eval_derivatives,
)
from .rigor import Alpha, BoundedReal, max_precision_bits

_TAG_CODE = {tag: i for i, tag in enumerate(ALL_CASES)}
_C1, _C2, _C31, _C32, _C331, _C332, _C333 = range(7)

# float guard bands; anything closer to a decision boundary goes to the exact path
_TOL_E = 1e-13
_TOL_U = 1e-10
_CHUNK = 1 << 20

COVERED = "Covered"
DIOPHANTINE_FAILS = "DiophantineFails"
BELOW_M = "BelowM"
NOT_COVERED = "NotCovered"
TRIVIAL_SOLUTION = "Trivial"


# ---------------------------------------------------------------------------
# parameters


def pruning_bound(b_j, beta: float, gamma: float) -> float:
    """B_j = max(b_j**(-1/beta), b_j**(-1/gamma))."""
    b = float(b_j)
    if b <= 0 or not 1 < beta < gamma:
        raise ValueError("need b_j > 0 and 1 < beta < gamma")
    return max(b ** (-1.0 / beta), b ** (-1.0 / gamma))


def _upper_index(B: float, r: int) -> int:
    """Largest integer strictly below B*r (exact products snap to the integer)."""
    with mpmath.workprec(200):
        x = mpmath.mpf(B) * r
        n = int(mpmath.nint(x))
        if abs(x - n) < mpmath.mpf(2) ** -120:
            return n - 1
        return int(mpmath.ceil(x)) - 1


@dataclass(frozen=True)
class CoveringParams:
    b: tuple
    beta: float
    s: float
    t: float
    gamma: float
    M: int = 2
    R: int = 100
    x_exponent: float | None = None
    sigma: float = 1.0
    k: int | None = None

    def __post_init__(self):
        b = tuple(Fraction(x) for x in self.b)
        k = self.k if self.k is not None else len(b)
        if len(b) == 1 and k > 1:
            b = b * k
        if len(b) != k or k < 1:
            raise ValueError(f"expected {k} coefficients, got {len(b)}")
        if any(x <= 0 for x in b):
            raise ValueError("coefficients must be positive")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "k", k)
        for name in ("beta", "s", "t", "gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not 1 < self.beta < self.s < self.t < self.gamma:
            raise ValueError(
                f"need 1 < beta < s < t < gamma, got {self.beta}, {self.s}, {self.t}, {self.gamma}"
            )
        if not 2 <= self.M <= self.R:
            raise ValueError(f"need 2 <= M <= R, got M={self.M}, R={self.R}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        first = first_window_radius(self)
        if first is None:
            warnings.warn(
                f"2 r^-beta < X(r) < b_k/(2r) fails somewhere in every range [M', {self.R}]; keeping M={self.M}",
                stacklevel=3,
            )
        elif first > self.M:
            warnings.warn(f"raising M from {self.M} to {first} so that 2 r^-beta < X(r) < b_k/(2r)", stacklevel=3)
            object.__setattr__(self, "M", first)

    @property
    def xe(self) -> float:
        return default_x_exponent(self.beta) if self.x_exponent is None else float(self.x_exponent)

    def eps(self, r: int) -> float:
        return float(r) ** -self.beta

    def X(self, r: int) -> float:
        return float(r) ** self.xe

    @property
    def B(self) -> tuple[float, ...]:
        return tuple(pruning_bound(b, self.beta, self.gamma) for b in self.b)

    def window_ok(self, r: int) -> bool:
        X = self.X(r)
        return 2 * self.eps(r) < X < float(self.b[-1]) / (2 * r)

    @property
    def threshold_reference(self) -> float:
        """(k+1)/beta when all b_j >= 1 or sum b < 1, else 3k/(beta - 4)."""
        if all(x >= 1 for x in self.b) or sum(self.b) < 1:
            return (self.k + 1) / self.beta
        if self.beta > 4:
            return 3 * self.k / (self.beta - 4)
        return 1.0

    def config(self) -> dict:
        return {
            "b": [str(x) for x in self.b],
            "k": self.k,
            "beta": self.beta,
            "s": self.s,
            "t": self.t,
            "gamma": self.gamma,
            "M": self.M,
            "R": self.R,
            "x_exponent": self.xe,
            "sigma": self.sigma,
        }


def first_window_radius(params: CoveringParams) -> int | None:
    """Smallest M' >= M with the X window valid on all of [M', R]."""
    first = None
    for r in range(params.R, params.M - 1, -1):
        if params.window_ok(r):
            first = r
        else:
            break
    return first


def min_r_report(params: CoveringParams) -> dict:
    """Smallest radius at which each standing assumption of the covering holds."""
    out = {}
    # [1 - r^-beta, 1 + r^-beta] lies inside (0, 2) as soon as r >= 2
    out["band_inside_0_2"] = 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out["x_window"] = first_window_radius(replace(params, M=2))
    # floor equation implies |E(alpha) - 1| < max(1, sum b) r^-alpha <= r^-beta for alpha >= s
    c = max(1.0, float(sum(params.b)))
    out["diophantine"] = max(2, math.ceil(c ** (1.0 / (params.s - params.beta))))
    # q_j < b_j^(-1/alpha) r + 1 <= B_j r for alpha in [s, t]
    need = 2
    for bj, Bj in zip(params.b, params.B):
        top = max(float(bj) ** (-1.0 / params.s), float(bj) ** (-1.0 / params.t))
        if Bj > top:
            need = max(need, math.ceil(1.0 / (Bj - top)))
        elif float(bj) < 1:
            need = None
            break
    out["index_pruning"] = need
    return out


# ---------------------------------------------------------------------------
# vectorised evaluation


def _E(b: np.ndarray, L: np.ndarray, u: np.ndarray, order: int = 0) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        terms = b * np.exp(u[:, None] * L)
        if order:
            terms = terms * L**order
        return terms.sum(axis=1)


def _vec_root(F, dF, lo: np.ndarray, hi: np.ndarray, iters: int = 200) -> np.ndarray:
    """Root of increasing F on [lo, hi] (F(lo) <= 0 <= F(hi)) by safeguarded Newton."""
    lo, hi = lo.copy(), hi.copy()
    x = 0.5 * (lo + hi)
    active = np.arange(len(x))
    for _ in range(iters):
        if not len(active):
            break
        xa = x[active]
        f = F(xa, active)
        neg = f < 0
        lo[active] = np.where(neg, xa, lo[active])
        hi[active] = np.where(~neg, xa, hi[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = xa - f / dF(xa, active)
        bad = ~np.isfinite(nxt) | (nxt <= lo[active]) | (nxt >= hi[active])
        nxt = np.where(bad, 0.5 * (lo[active] + hi[active]), nxt)
        done = (np.abs(nxt - xa) <= 4e-16 * np.maximum(1.0, np.abs(xa))) | (f == 0)
        x[active] = np.where(f == 0, xa, nxt)
        active = active[~done]
    return x


def _critical_points(b: np.ndarray, L: np.ndarray, gamma: float) -> np.ndarray:
    """u0 for rows of L with mixed signs."""
    n, k = L.shape
    if k == 2:
        neg = L[:, 0] < 0
        la = np.where(neg, L[:, 0], L[:, 1])
        lb = np.where(neg, L[:, 1], L[:, 0])
        ba = np.where(neg, b[0], b[1])
        bb = np.where(neg, b[1], b[0])
        return np.log(ba * -la / (bb * lb)) / (lb - la)
    lo = np.full(n, -2.0)
    hi = np.full(n, 2.0 * gamma)
    for _ in range(60):
        bad = _E(b, L, lo, 1) >= 0
        if not bad.any():
            break
        lo = np.where(bad, lo - 2 * (hi - lo), lo)
    for _ in range(60):
        bad = _E(b, L, hi, 1) <= 0
        if not bad.any():
            break
        hi = np.where(bad, hi + 2 * (hi - lo), hi)
    return _vec_root(lambda u, idx: _E(b, L[idx], u, 1), lambda u, idx: _E(b, L[idx], u, 2), lo, hi)


@dataclass
class CoverBatch:
    """All evaluated index vectors of one radius, in (nu, q) lexicographic order."""

    r: int
    q: np.ndarray  # (n, k) int64
    tag: np.ndarray  # codes into ALL_CASES
    empty: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    d1: np.ndarray  # hull diameter, or first branch piece for Case 3.3.3
    d2: np.ndarray  # second branch piece for Case 3.3.3, else 0
    u0: np.ndarray  # nan for monotone envelopes
    deficit: np.ndarray  # 1 - m, nan for monotone envelopes
    exact: dict = field(default_factory=dict)  # row -> rigorous CoverInterval

    def __len__(self) -> int:
        return len(self.tag)

    def premeasure_terms(self, sigma: float) -> np.ndarray:
        d = np.concatenate([self.d1, self.d2])
        d = d[d > 0]
        return d**sigma

    def interval(self, i: int) -> CoverInterval:
        if i in self.exact:
            return self.exact[i]
        tag = ALL_CASES[int(self.tag[i])]
        q = tuple(int(x) for x in self.q[i])
        u0 = None if math.isnan(self.u0[i]) else float(self.u0[i])
        deficit = None if math.isnan(self.deficit[i]) else float(self.deficit[i])
        if self.empty[i]:
            return CoverInterval(q, self.r, None, None, True, tag, (), 0.0, (), u0, deficit, "float")
        lo = BoundedReal.exact(float(self.lo[i]))
        hi = BoundedReal.exact(float(self.hi[i]))
        if tag == CASE333 and self.d2[i] > 0:
            # the two branch pieces sit at the ends of the hull
            mid1 = BoundedReal.exact(float(self.lo[i]) + float(self.d1[i]))
            mid2 = BoundedReal.exact(float(self.hi[i]) - float(self.d2[i]))
            pieces = ((lo, mid1), (mid2, hi))
            diams = (float(self.d1[i]), float(self.d2[i]))
            hull = float(self.hi[i] - self.lo[i])
        else:
            pieces = ((lo, hi),)
            diams = (float(self.d1[i]),)
            hull = float(self.d1[i])
        return CoverInterval(q, self.r, lo, hi, False, tag, pieces, hull, diams, u0, deficit, "float")

    def intervals(self) -> Iterator[CoverInterval]:
        for i in range(len(self)):
            yield self.interval(i)


def _families(params: CoveringParams, r: int) -> list[tuple[tuple[int, ...], list[range]]]:
    fams = []
    uppers = [_upper_index(B, r) for B in params.B]
    for code in range(2**params.k):
        nu = tuple((code >> (params.k - 1 - j)) & 1 for j in range(params.k))
        ranges = [range(1, r) if v == 0 else range(r + 1, uppers[j] + 1) for j, v in enumerate(nu)]
        if all(len(rg) for rg in ranges):
            fams.append((nu, ranges))
    return fams


def _candidates(params: CoveringParams, r: int, nu, ranges, screen: bool) -> np.ndarray:
    """Index vectors of one family, the last index narrowed by necessary conditions."""
    k = params.k
    bf = np.array([float(x) for x in params.b])
    if k > 1:
        grids = np.meshgrid(*[np.arange(rg.start, rg.stop, dtype=np.int64) for rg in ranges[:-1]], indexing="ij")
        prefix = np.stack([g.ravel() for g in grids], axis=1)
    else:
        prefix = np.zeros((1, 0), dtype=np.int64)
    last = ranges[-1]
    lo = np.full(len(prefix), last.start, dtype=np.int64)
    hi = np.full(len(prefix), last.stop - 1, dtype=np.int64)
    if screen:
        s, t, eps = params.s, params.t, params.eps(r)
        Lp = np.log1p((prefix - r) / r) if k > 1 else np.zeros((1, 0))
        Ps = (bf[:-1] * np.exp(s * Lp)) if k > 1 else np.zeros((1, 0))
        Pt = (bf[:-1] * np.exp(t * Lp)) if k > 1 else np.zeros((1, 0))
        p_min = np.minimum(Ps, Pt).sum(axis=1)
        p_max = np.maximum(Ps, Pt).sum(axis=1)
        bk = bf[-1]
        up = (1 + eps - p_min) / bk
        down = (1 - eps - p_max) / bk
        e_up, e_down = (t, s) if nu[-1] == 0 else (s, t)
        with np.errstate(invalid="ignore", divide="ignore"):
            q_up = np.where(up > 0, r * np.power(np.maximum(up, 0), 1.0 / e_up), -1.0)
            q_down = np.where(down > 0, r * np.power(np.maximum(down, 0), 1.0 / e_down), 0.0)
        hi = np.minimum(hi, np.floor(q_up * (1 + 1e-9)).astype(np.int64) + 1)
        lo = np.maximum(lo, np.ceil(q_down * (1 - 1e-9)).astype(np.int64) - 1)
    counts = np.maximum(hi - lo + 1, 0)
    total = int(counts.sum())
    if total == 0:
        return np.zeros((0, k), dtype=np.int64)
    rows = np.repeat(np.arange(len(prefix)), counts)
    starts = np.cumsum(counts) - counts
    last_idx = np.arange(total, dtype=np.int64) - starts[rows] + lo[rows]
    return np.concatenate([prefix[rows], last_idx[:, None]], axis=1)


def _pieces_float(b, L, r_eps, a, bnd, d):
    """Float J on the monotone pieces [a, bnd] (direction d per row).

    Returns lo, hi, diam, status with status 0 = empty, 1 = interior, 2 = needs
    the exact path.
    """
    n = len(a)
    Ea = _E(b, L, a)
    Eb = _E(b, L, bnd)
    big = np.where(d < 0, Ea, Eb)
    small = np.where(d < 0, Eb, Ea)
    eps = r_eps
    tol = _TOL_E * np.maximum(1.0, np.abs(big))
    empty = (small - 1 - eps > _TOL_E) | (1 - eps - big > tol) | ~np.isfinite(small)
    interior = ~empty & (1 - eps - small > _TOL_E) & (big - 1 - eps > tol)
    status = np.where(empty, 0, np.where(interior, 1, 2))
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    diam = np.zeros(n)
    idx = np.nonzero(status == 1)[0]
    if len(idx):
        Li, ai, bi, di = L[idx], a[idx], bnd[idx], d[idx]
        F = lambda u, j: di[j] * (_E(b, Li[j], u) - 1)
        dF = lambda u, j: di[j] * _E(b, Li[j], u, 1)
        u = _vec_root(F, dF, ai, bi)
        r0 = _E(b, Li, u) - 1
        e1 = _E(b, Li, u, 1)
        e2 = _E(b, Li, u, 2)
        e3 = _E(b, Li, u, 3)
        sgn = np.sign(e1)

        def offset(y):
            disc = e1 * e1 + 2 * e2 * y
            with np.errstate(invalid="ignore", divide="ignore"):
                return 2 * y / (e1 + sgn * np.sqrt(np.maximum(disc, 0))), disc

        dp, disc_p = offset(eps - r0)
        dm, disc_m = offset(-eps - r0)
        with np.errstate(invalid="ignore", divide="ignore"):
            dd = 2 * eps / np.abs(e1 + 0.5 * e2 * (dp + dm))
        lo_i = u + np.minimum(dp, dm)
        hi_i = u + np.maximum(dp, dm)
        dmax = np.maximum(np.abs(dp), np.abs(dm))
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = (
                (disc_p > 0)
                & (disc_m > 0)
                & (np.abs(e2) * dmax <= 0.25 * np.abs(e1))
                & (np.abs(e3) * dmax**2 <= 1e-8 * np.abs(e1))
                & (lo_i - ai > 1e-9 * np.maximum(1.0, np.abs(u)))
                & (bi - hi_i > 1e-9 * np.maximum(1.0, np.abs(u)))
                & np.isfinite(dd)
            )
        lo[idx], hi[idx], diam[idx] = lo_i, hi_i, dd
        status[idx[~ok]] = 2
    return lo, hi, diam, status


def _evaluate(params: CoveringParams, r: int, q: np.ndarray, nu: tuple) -> CoverBatch:
    n, k = q.shape
    b = np.array([float(x) for x in params.b])
    L = np.log1p((q - r) / r)
    eps, X = params.eps(r), params.X(r)
    s, t, beta, gamma = params.s, params.t, params.beta, params.gamma
    tag = np.full(n, _C1 if not any(nu) else (_C2 if all(nu) else -1), dtype=np.int8)
    u0 = np.full(n, np.nan)
    deficit = np.full(n, np.nan)
    fallback = np.zeros(n, dtype=bool)
    mixed = 0 < sum(nu) < k
    if mixed:
        u0 = _critical_points(b, L, gamma)
        m = _E(b, L, u0)
        deficit = 1 - m
        tolu = _TOL_U * np.maximum(1.0, np.abs(u0))
        near_u = (np.abs(u0 - beta) <= tolu) | (np.abs(u0 - gamma) <= tolu) | ~np.isfinite(u0)
        tag = np.where(u0 < beta, _C31, np.where(u0 > gamma, _C32, -1)).astype(np.int8)
        in33 = tag == -1
        near_m = in33 & ((np.abs(m - 1 - eps) <= _TOL_E) | (np.abs(m - (1 - X)) <= _TOL_E))
        tag = np.where(
            in33, np.where(m > 1 + eps, _C332, np.where(m < 1 - X, _C333, _C331)), tag
        ).astype(np.int8)
        fallback |= near_u | near_m
        # a minimum inside [s, t] splits the range into two monotone pieces
        c = np.clip(u0, s, t)
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    d1 = np.zeros(n)
    d2 = np.zeros(n)
    empty = np.ones(n, dtype=bool)
    S = np.full(n, s)
    T = np.full(n, t)
    if not mixed:
        d = np.full(n, -1.0 if not any(nu) else 1.0)
        lo, hi, d1, st = _pieces_float(b, L, eps, S, T, d)
        empty = st == 0
        fallback |= st == 2
    else:
        # left piece [s, c] decreasing, right piece [c, t] increasing
        has_left = c > s
        has_right = c < t
        l_lo, l_hi, l_d, l_st = _pieces_float(b, L, eps, S, np.where(has_left, c, s + 1e-300), np.full(n, -1.0))
        r_lo, r_hi, r_d, r_st = _pieces_float(b, L, eps, np.where(has_right, c, t - 1e-300), T, np.full(n, 1.0))
        l_st = np.where(has_left, l_st, 0)
        r_st = np.where(has_right, r_st, 0)
        fallback |= (l_st == 2) | (r_st == 2)
        l_ne, r_ne = l_st == 1, r_st == 1
        empty = ~(l_ne | r_ne)
        lo = np.where(l_ne, l_lo, r_lo)
        hi = np.where(r_ne, r_hi, l_hi)
        split = (tag == _C333) & l_ne & r_ne
        hull = np.where(l_ne & r_ne, hi - lo, np.where(l_ne, l_d, r_d))
        d1 = np.where(split, l_d, hull)
        d2 = np.where(split, r_d, 0.0)
        # a lone branch piece in Case 3.3.3 is its own (single) component
        lone333 = (tag == _C333) & (l_ne ^ r_ne)
        d1 = np.where(lone333, np.where(l_ne, l_d, r_d), d1)
    d1 = np.where(empty, 0.0, d1)
    d2 = np.where(empty, 0.0, d2)
    batch = CoverBatch(r, q, tag, empty, lo, hi, d1, d2, u0, deficit)
    for i in np.nonzero(fallback)[0]:
        _apply_exact(batch, int(i), params)
    return batch


def _apply_exact(batch: CoverBatch, i: int, params: CoveringParams) -> None:
    qv = tuple(int(x) for x in batch.q[i])
    env = Envelope.from_indices(params.b, qv, batch.r)
    ci = cover_interval(env, batch.r, params.beta, params.s, params.t, params.gamma, params.xe, q=qv)
    batch.exact[i] = ci
    batch.tag[i] = _TAG_CODE[ci.case_tag]
    batch.empty[i] = ci.empty
    batch.u0[i] = np.nan if ci.u0 is None else ci.u0
    batch.deficit[i] = np.nan if ci.deficit is None else ci.deficit
    if ci.empty:
        batch.lo[i] = batch.hi[i] = np.nan
        batch.d1[i] = batch.d2[i] = 0.0
    else:
        batch.lo[i] = float(ci.lo.lo)
        batch.hi[i] = float(ci.hi.hi)
        diams = ci.premeasure_diams
        batch.d1[i] = diams[0]
        batch.d2[i] = diams[1] if len(diams) > 1 else 0.0


def _concat(r: int, parts: list[CoverBatch], k: int) -> CoverBatch:
    if not parts:
        z = np.zeros(0)
        return CoverBatch(r, np.zeros((0, k), dtype=np.int64), np.zeros(0, dtype=np.int8),
                          np.zeros(0, dtype=bool), z, z, z, z, z, z)
    exact, offset = {}, 0
    for p in parts:
        exact.update({i + offset: ci for i, ci in p.exact.items()})
        offset += len(p)
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
    return CoverBatch(r, cat("q"), cat("tag"), cat("empty"), cat("lo"), cat("hi"), cat("d1"), cat("d2"),
                      cat("u0"), cat("deficit"), exact)


def cover_batch(params: CoveringParams, r: int, include_empty: bool = False) -> CoverBatch:
    """All J(q; r) of one radius.  Without include_empty, index vectors ruled out
    by the screening window are skipped and empty sets are dropped."""
    parts = []
    for nu, ranges in _families(params, r):
        q = _candidates(params, r, nu, ranges, screen=not include_empty)
        for start in range(0, len(q), _CHUNK):
            part = _evaluate(params, r, q[start : start + _CHUNK], nu)
            if not include_empty:
                keep = np.nonzero(~part.empty)[0]
                part = _select(part, keep)
            parts.append(part)
    return _concat(r, parts, params.k)


def _select(batch: CoverBatch, rows: np.ndarray) -> CoverBatch:
    remap = {int(old): new for new, old in enumerate(rows)}
    exact = {remap[i]: ci for i, ci in batch.exact.items() if i in remap}
    return CoverBatch(batch.r, batch.q[rows], batch.tag[rows], batch.empty[rows], batch.lo[rows], batch.hi[rows],
                      batch.d1[rows], batch.d2[rows], batch.u0[rows], batch.deficit[rows], exact)


def _batch_worker(args):
    params, r, include_empty = args
    return cover_batch(params, r, include_empty)


def iter_batches(params: CoveringParams, include_empty: bool = False, jobs: int = 1) -> Iterator[CoverBatch]:
    """cover_batch for r = M..R in increasing order (parallel over r if jobs > 1)."""
    rs = range(params.M, params.R + 1)
    if jobs <= 1:
        for r in rs:
            yield cover_batch(params, r, include_empty)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # largest radii first would balance better, but map keeps the output order
        yield from pool.map(_batch_worker, [(params, r, include_empty) for r in rs], chunksize=4)


def enumerate_covering(params: CoveringParams, include_empty: bool = True, jobs: int = 1) -> Iterator[CoverInterval]:
    """Every J(q; r) for r in [M, R] in (r, nu, q) lexicographic order."""
    for batch in iter_batches(params, include_empty, jobs):
        yield from batch.intervals()


def enumerate_covering_exact(params: CoveringParams, include_empty: bool = True) -> Iterator[CoverInterval]:
    """Reference enumeration using only the rigorous scalar routine (slow)."""
    for r in range(params.M, params.R + 1):
        for nu, ranges in _families(params, r):
            grids = np.meshgrid(*[np.arange(rg.start, rg.stop) for rg in ranges], indexing="ij")
            for row in np.stack([g.ravel() for g in grids], axis=1):
                qv = tuple(int(x) for x in row)
                env = Envelope.from_indices(params.b, qv, r)
                ci = cover_interval(env, r, params.beta, params.s, params.t, params.gamma, params.xe, q=qv)
                if include_empty or not ci.empty:
                    yield ci


def classify_case(q: Sequence[int], r: int, params: CoveringParams) -> str:
    from .envelope import classify_envelope

    env = Envelope.from_indices(params.b, q, r)
    return classify_envelope(env, r, params.beta, params.gamma, params.xe)


# ---------------------------------------------------------------------------
# premeasure sums


@dataclass(frozen=True)
class PremeasureReport:
    sigma: float
    per_r_sums: list
    cumulative: float
    tail_estimates: list


def _per_r_terms(stream, sigma: float) -> dict[int, list[float]]:
    terms: dict[int, list[float]] = {}
    for item in stream:
        if isinstance(item, CoverBatch):
            terms.setdefault(item.r, []).extend(item.premeasure_terms(sigma).tolist())
        else:
            bucket = terms.setdefault(item.r, [])
            bucket.extend(d**sigma for d in item.premeasure_diams if d > 0)
    return terms


def partial_premeasure(stream: Iterable, sigma: float) -> PremeasureReport:
    """Sum of (diam J)^sigma per r; split Case 3.3.3 sets count both pieces."""
    if not 0 < sigma <= 1:
        raise ValueError("sigma must lie in (0, 1]")
    terms = _per_r_terms(stream, sigma)
    per_r = [(r, math.fsum(terms[r])) for r in sorted(terms)]
    cumulative = math.fsum(v for _, v in per_r)
    tails, acc = [], 0.0
    for r, v in reversed(per_r):
        acc += v
        tails.append((r, acc))
    tails.reverse()
    return PremeasureReport(sigma, per_r, cumulative, tails)


@dataclass(frozen=True)
class DimensionDiagnostic:
    sigma_grid: list
    truncation_grid: list
    sums: list  # sums[i][j]: sigma_grid[i], truncation_grid[j]
    threshold_reference: float
    slopes: list  # fitted top-decade per-r slope for each sigma
    slopes_log_sigma: list  # after dividing by (log r)^sigma
    slopes_log_sigma1: list  # after dividing by (log r)^(sigma + 1)
    convergent_like: list
    per_r: dict = field(default_factory=dict, repr=False)  # sigma -> [(r, contribution)]


def default_sigma_grid(threshold: float, points: int = 21) -> list[float]:
    lo, hi = 0.5 * threshold, min(1.0, 2.0 * threshold)
    if hi <= lo:
        lo = hi / 2
    return [float(x) for x in np.linspace(lo, hi, points)]


def default_truncation_grid(M: int, R: int) -> list[int]:
    grid, x = [], R
    while x >= max(M, R // 16) and len(grid) < 5:
        grid.append(x)
        x //= 2
    return sorted(set(grid))


def _slope(rs: np.ndarray, vals: np.ndarray) -> float:
    pos = vals > 0
    if pos.sum() < 3:
        return -math.inf
    lx, ly = np.log(rs[pos]), np.log(vals[pos])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, _), *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(slope)


def top_decade_slope(per_r: Sequence[tuple[int, float]], R: int, log_power: float = 0.0) -> float:
    rs = np.array([r for r, _ in per_r if R / 10 <= r <= R], dtype=float)
    vals = np.array([v for r, v in per_r if R / 10 <= r <= R], dtype=float)
    if log_power and len(rs):
        vals = vals / np.log(rs) ** log_power
    return _slope(rs, vals)


def dimension_diagnostic(
    params: CoveringParams,
    sigma_grid: Sequence[float] | None = None,
    truncation_grid: Sequence[int] | None = None,
    jobs: int = 1,
    batches: Sequence[CoverBatch] | None = None,
) -> DimensionDiagnostic:
    thr = params.threshold_reference
    sigma_grid = list(sigma_grid) if sigma_grid else default_sigma_grid(thr)
    if any(not 0 < s <= 1 for s in sigma_grid):
        raise ValueError("sigma values must lie in (0, 1]")
    truncation_grid = sorted(truncation_grid) if truncation_grid else default_truncation_grid(params.M, params.R)
    R = max(truncation_grid)
    if R > params.R:
        params = replace(params, R=R)
    diams: dict[int, np.ndarray] = {r: np.zeros(0) for r in range(params.M, R + 1)}
    for batch in batches if batches is not None else iter_batches(params, False, jobs):
        if batch.r <= R:
            d = np.concatenate([batch.d1, batch.d2])
            diams[batch.r] = d[d > 0]
    rs = sorted(diams)
    sums, slopes, s_log, s_log1, conv, per_r_all = [], [], [], [], [], {}
    for sigma in sigma_grid:
        per_r = [(r, math.fsum((diams[r] ** sigma).tolist())) for r in rs]
        per_r_all[sigma] = per_r
        row, acc, j = [], 0.0, 0
        cum = {}
        for r, v in per_r:
            acc += v
            cum[r] = acc
        for Rt in truncation_grid:
            row.append(math.fsum(v for r, v in per_r if r <= Rt))
        sums.append(row)
        sl = top_decade_slope(per_r, R)
        slopes.append(sl)
        s_log.append(top_decade_slope(per_r, R, sigma))
        s_log1.append(top_decade_slope(per_r, R, sigma + 1))
        conv.append(sl < -1)
    return DimensionDiagnostic(list(sigma_grid), list(truncation_grid), sums, thr, slopes, s_log, s_log1, conv, per_r_all)


# ---------------------------------------------------------------------------
# diameter bounds


@dataclass
class BoundStats:
    count: int = 0
    sup_ratio: float = 0.0
    witness: tuple | None = None
    max_diam: float = 0.0
    per_r_sup: dict = field(default_factory=dict)


def _pivot(q: Sequence[int], r: int) -> int:
    """Index of the last coordinate above r (the variable the Case 3 bounds are stated in)."""
    above = [j for j, x in enumerate(q) if x > r]
    return above[-1] if above else len(q) - 1


def bin_index(deficit: float, b_k: float, r: int) -> int:
    """l with m in H_l = [1 - (l+1) b_k/(2r), 1 - l b_k/(2r)]."""
    return int(math.floor(deficit * 2 * r / b_k))


def diam_bound(ci: CoverInterval, params: CoveringParams) -> float | None:
    """The diameter bound expression for J(q; r) (None for Case 3.3.2, where diam = 0)."""
    r, q, beta = ci.r, ci.q, params.beta
    eps = float(r) ** -beta
    tag = ci.case_tag
    if tag == CASE1:
        return eps / math.log(r / max(q))
    if tag == CASE2:
        return eps / math.log(min(q) / r)
    j = _pivot(q, r)
    lk2 = math.log(q[j] / r) ** 2
    if tag in (CASE31, CASE32):
        return eps / lk2
    X = params.X(r)
    if tag == CASE331:
        return r * math.sqrt(X)
    if tag == CASE332:
        return None
    bk = float(params.b[j])
    ell = bin_index(ci.deficit, bk, r)
    if ell <= 0:
        return eps * math.log(r) / X / lk2
    return eps * r * math.log(r) / ell / lk2


def batch_bounds(batch: CoverBatch, params: CoveringParams) -> np.ndarray:
    """diam_bound for every row of a batch (nan where no bound applies)."""
    r, q, k = batch.r, batch.q, params.k
    n = len(batch)
    out = np.full(n, np.nan)
    if not n:
        return out
    eps = float(r) ** -params.beta
    tag = batch.tag.astype(int)
    lq = np.log1p((q - r) / r)
    above = q > r
    pivot = np.where(above.any(axis=1), k - 1 - np.argmax(above[:, ::-1], axis=1), k - 1)
    rows = np.arange(n)
    lk2 = lq[rows, pivot] ** 2
    bk = np.array([float(x) for x in params.b])[pivot]
    X = params.X(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        ell = np.floor(batch.deficit * 2 * r / bk)
        c333 = np.where(ell <= 0, eps * math.log(r) / X / lk2, eps * r * math.log(r) / ell / lk2)
        out = np.select(
            [tag == _C1, tag == _C2, (tag == _C31) | (tag == _C32), tag == _C331, tag == _C333],
            [eps / -lq.max(axis=1), eps / lq.min(axis=1), eps / lk2, np.full(n, r * math.sqrt(X)), c333],
            np.nan,
        )
    return out


def diam_bound_report(stream: Iterable, params: CoveringParams) -> dict[str, BoundStats]:
    """Per case tag: sup of diam / bound over the stream, its witness and per-r sups.

    Case 3.3.2 has no bound expression; its entry records count and the
    largest diameter seen (which must be 0).
    """
    report: dict[str, BoundStats] = {}
    for item in stream:
        batch = item if isinstance(item, CoverBatch) else None
        if batch is None:
            _report_one(report, item, params)
            continue
        ratio = np.maximum(batch.d1, batch.d2) / batch_bounds(batch, params)
        dmax = np.maximum(batch.d1, batch.d2)
        for code in np.unique(batch.tag):
            sel = np.nonzero(batch.tag == code)[0]
            st = report.setdefault(ALL_CASES[int(code)], BoundStats())
            st.count += len(sel)
            st.max_diam = max(st.max_diam, float(dmax[sel].max()))
            rs = ratio[sel]
            ok = ~np.isnan(rs) & ~batch.empty[sel]
            if not ok.any():
                continue
            j = sel[ok][np.argmax(rs[ok])]
            best = float(ratio[j])
            st.per_r_sup[batch.r] = max(best, st.per_r_sup.get(batch.r, -1.0))
            if best > st.sup_ratio or st.witness is None:
                st.sup_ratio, st.witness = best, (tuple(int(x) for x in batch.q[j]), batch.r)
    return report


def _report_one(report: dict, ci: CoverInterval, params: CoveringParams) -> None:
    st = report.setdefault(ci.case_tag, BoundStats())
    st.count += 1
    d = max(ci.premeasure_diams) if ci.premeasure_diams else 0.0
    st.max_diam = max(st.max_diam, d)
    if ci.empty:
        return
    bound = diam_bound(ci, params)
    if bound is None:
        return
    ratio = d / bound
    st.per_r_sup[ci.r] = max(ratio, st.per_r_sup.get(ci.r, -1.0))
    if ratio > st.sup_ratio or st.witness is None:
        st.sup_ratio, st.witness = ratio, (ci.q, ci.r)


def sup_over(stats: BoundStats, r_lo: int, r_hi: int) -> float:
    vals = [v for r, v in stats.per_r_sup.items() if r_lo <= r <= r_hi]
    return max(vals) if vals else 0.0


# ---------------------------------------------------------------------------
# solutions inside the covering


@dataclass(frozen=True)
class InclusionResult:
    status: str
    case_tag: str | None = None
    r: int | None = None
    q: tuple | None = None
    coeffs: tuple | None = None

    def __str__(self) -> str:
        return f"{self.status}({self.case_tag})" if self.case_tag else self.status


def _alpha_value(alpha) -> Fraction:
    if isinstance(alpha, Alpha):
        return alpha.value
    return Fraction(alpha)


def verify_inclusion(solution: SolutionTuple, alpha, params: CoveringParams) -> InclusionResult:
    """Check that alpha lies in J(q; r) whenever |E(alpha; q/r) - 1| <= r^-beta.

    Collisions y = x_i are removed first by rescaling the remaining
    coefficients; the all-equal trivial tuple has nothing to cover.
    """
    a = _alpha_value(alpha)
    if not params.s <= a <= params.t:
        raise ValueError(f"alpha={a} lies outside [s, t] = [{params.s}, {params.t}]")
    eq = LinearEquation(params.b)
    if not eq.holds(solution.y_value, solution.x_values):
        raise ValueError("the tuple does not satisfy the equation with the covering coefficients")
    sol = solution
    while True:
        if sum(eq.coeffs) == 1 and len({sol.y_value, *sol.x_values}) == 1:
            return InclusionResult(TRIVIAL_SOLUTION, r=solution.r, q=solution.q)
        col = find_collision(sol)
        if not isinstance(col, YEqualsX) or eq.coeffs[col.i - 1] >= 1 or eq.k == 1:
            break
        eq, sol = reduce_equation(eq, col), reduce_solution(sol, col)
    r, q = sol.r, sol.q
    if r < params.M:
        return InclusionResult(BELOW_M, r=r, q=q, coeffs=eq.coeffs)
    env = Envelope.from_indices(eq.coeffs, q, r)
    bits = cover_bits(r, params.beta)
    ceiling = max(max_precision_bits(), bits)
    eps = eps_enclosure(r, params.beta, bits)
    # sign of r^-beta - |E(alpha) - 1|, decided on both sides of 1
    above = _signed(lambda p: eps - (eval_derivatives(env, a, 0, p) - 1), bits, ceiling)
    below = _signed(lambda p: eps + (eval_derivatives(env, a, 0, p) - 1), bits, ceiling)
    if above < 0 or below < 0:
        return InclusionResult(DIOPHANTINE_FAILS, r=r, q=q, coeffs=eq.coeffs)
    ci = cover_interval(env, r, params.beta, params.s, params.t, params.gamma, params.xe, q=q)
    if not ci.empty and ci.contains(a):
        return InclusionResult(COVERED, ci.case_tag, r, q, eq.coeffs)
    return InclusionResult(NOT_COVERED, ci.case_tag, r, q, eq.coeffs)


# ---------------------------------------------------------------------------
# minima spacing and the log-sum bound


def spacing_check(b: Sequence, Q_prefix: Sequence, r: int, p_list: Sequence[int], params: CoveringParams) -> float:
    """min of m(p) - m(p') over consecutive admissible p' < p (inf without a pair).

    Admissible means u0 in (beta, gamma) for the envelope with last ratio p/r.
    The returned value is a rigorous lower bound (m enclosures subtracted
    outward).
    """
    admissible = []
    for p in sorted(p_list):
        env = Envelope(tuple(b), tuple(Q_prefix) + (Fraction(p, r),))
        crit = critical_point(env, tol=1e-20, bracket=(-2.0, 2 * params.gamma))
        if crit is None:
            continue
        if crit.u0.lo > params.beta and crit.u0.hi < params.gamma:
            admissible.append((p, crit.m))
    gaps = [float(m.lo - m_prev.hi) for (_, m_prev), (_, m) in zip(admissible, admissible[1:])]
    return min(gaps) if gaps else math.inf


def spacing_scan(params: CoveringParams, r: int) -> tuple[float, int, int]:
    """Run spacing_check for every prefix q_1..q_{k-1} below r with p in (r, B_k r).

    Returns (smallest gap * r / b_k, number of prefixes with a pair, violations
    of gap >= b_k/r - 1e-12).
    """
    bk = params.b[-1]
    top = _upper_index(params.B[-1], r)
    ps = list(range(r + 1, top + 1))
    worst, pairs, bad = math.inf, 0, 0
    ranges = [range(1, r)] * (params.k - 1)
    grids = np.meshgrid(*[np.arange(rg.start, rg.stop) for rg in ranges], indexing="ij") if ranges else []
    prefixes = np.stack([g.ravel() for g in grids], axis=1) if ranges else np.zeros((1, 0), dtype=int)
    for row in prefixes:
        Qp = tuple(Fraction(int(x), r) for x in row)
        gap = spacing_check(params.b, Qp, r, ps, params)
        if gap == math.inf:
            continue
        pairs += 1
        worst = min(worst, gap * r / float(bk))
        if gap < float(bk) / r - 1e-12:
            bad += 1
    return worst, pairs, bad


def log_sum_check(r: int, sigma: float, B: float = 2.0) -> tuple[float, float, float]:
    """(sum_{1<=q<r} log(r/q)^-sigma, r + [sigma=1] r log r + r^sigma, sum_{r<q<Br} log(q/r)^-sigma)."""
    if r < 2 or sigma <= 0 or B <= 1:
        raise ValueError("need r >= 2, sigma > 0, B > 1")
    q = np.arange(1, r, dtype=float)
    lhs = math.fsum((-np.log1p((q - r) / r)) ** -sigma)
    top = _upper_index(B, r)
    q2 = np.arange(r + 1, top + 1, dtype=float)
    upper = math.fsum((np.log1p((q2 - r) / r)) ** -sigma) if len(q2) else 0.0
    rhs = r + (r * math.log(r) if sigma == 1 else 0.0) + r**sigma
    return lhs, rhs, upper
