"""Named experiment presets, one per acceptance check.

Each preset returns an Outcome with a pass flag, a summary and per-item
records; the CLI prints them and the acceptance tests assert on them.
"""

from __future__ import annotations

import math
import random
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from . import covering as cov
from . import diophantine as dio
from .envelope import (
    DECREASING,
    L1,
    L2,
    Envelope,
    cover_interval,
    critical_point,
    eval_derivatives,
    invert_on_branch,
)
from .rigor import Alpha, floor_pow, floor_pow_adaptive, nth_root_floor


@dataclass
class Outcome:
    name: str
    criterion: str
    passed: bool
    summary: dict
    records: list = field(default_factory=list)
    seconds: float = 0.0
    limit_seconds: float | None = None

    @property
    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.criterion} ({self.seconds:.1f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        out.seconds = time.perf_counter() - t0
        if out.limit_seconds is not None and out.seconds > out.limit_seconds:
            out.passed = False
            out.summary["over_time_limit"] = True
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _half() -> tuple[Fraction, Fraction]:
    return (Fraction(1, 2), Fraction(1, 2))


@_timed
def floor_oracle(jobs: int = 1, n_max: int = 10**5) -> Outcome:
    """floor_pow and the enclosure path against nth_root_floor(n^p, q)."""
    records, total = [], 0
    for text in ("3/2", "5/2", "7/3"):
        a = Alpha.parse(text)
        bad = bad_adaptive = 0
        for n in range(1, n_max + 1):
            exact = nth_root_floor(n**a.p, a.q)
            bad += floor_pow(n, a) != exact
            bad_adaptive += floor_pow_adaptive(n, a) != exact
        records.append({"alpha": a, "n_max": n_max, "mismatches": bad, "enclosure_mismatches": bad_adaptive})
        total += bad + bad_adaptive
    return Outcome("floor-oracle", "0 mismatches for n <= 1e5", total == 0, {"mismatches": total}, records,
                   limit_seconds=60)


@_timed
def search_oracle(jobs: int = 1, N: int = 200) -> Outcome:
    """search_solutions against the brute-force enumeration of the prefix."""
    records, ok = [], True
    for coeffs in ((Fraction(1), Fraction(1)), _half()):
        eq = dio.LinearEquation(coeffs)
        for text in ("3/2", "7/5"):
            a = Alpha.parse(text)
            fast = {s.key() for s in dio.search_solutions(eq, a, N, jobs=jobs)}
            slow = {s.key() for s in dio.brute_force_solutions(eq, a, N)}
            same = fast == slow
            ok &= same
            records.append({"coeffs": list(coeffs), "alpha": a, "N": N, "solutions": len(fast), "equal": same})
    return Outcome("search-oracle", "search == brute force (exact set equality)", ok,
                   {"cases": len(records)}, records, limit_seconds=120)


@_timed
def fermat_threshold(jobs: int = 1, N: int = 10**4) -> Outcome:
    """No non-trivial solution of x + y = z in PS(alpha) below N for alpha > 3."""
    eq = dio.LinearEquation((1, 1))
    records, found = [], 0
    for text in ("7/2", "9/2", "11/2", "3.1416"):
        a = Alpha.parse(text)
        sols = [s for s in dio.search_solutions(eq, a, N, jobs=jobs) if s.classification != dio.TRIVIAL]
        found += len(sols)
        records.append({"alpha": a, "N": N, "non_trivial": len(sols)})
    return Outcome("fermat-threshold", "zero non-trivial solutions up to N=1e4", found == 0,
                   {"non_trivial": found}, records, limit_seconds=600)


@_timed
def fermat_growth(jobs: int = 1, xs: tuple = (100, 200, 400, 800)) -> Outcome:
    """Log-log slope of LargestLessThanX counts for alpha = 3/2 against 2.5 +- 0.3.

    The SmallestLessThanX counts are reported alongside for comparison.
    """
    a = Alpha.parse("3/2")
    model = dio.GrowthModel.from_alpha(a)
    counts = [(x, dio.count_fermat(a, x, dio.LARGEST)) for x in xs]
    slope, intercept, resid = dio.fit_growth_exponent(counts)
    small_xs = (25, 50, 100)
    small = [(x, dio.count_fermat(a, x, dio.SMALLEST)) for x in small_xs]
    s_slope, _, _ = dio.fit_growth_exponent(small)
    records = [{"mode": dio.LARGEST, "x": x, "count": c} for x, c in counts]
    records += [{"mode": dio.SMALLEST, "x": x, "count": c} for x, c in small]
    ok = abs(slope - model.predicted_exponent) <= 0.3
    summary = {"predicted": model.predicted_exponent, "slope_largest": slope, "max_residual": resid,
               "slope_smallest": s_slope}
    return Outcome("fermat-growth", f"LargestLessThanX slope {slope:.3f} within 2.5 +- 0.3", ok, summary, records,
                   limit_seconds=600)


@_timed
def ap_abundance(jobs: int = 1, N: int = 500) -> Outcome:
    """Non-trivial 3-term progressions in PS(3/2)."""
    eq = dio.LinearEquation(_half())
    sols = [s for s in dio.search_solutions(eq, Alpha.parse("3/2"), N, jobs=jobs) if s.classification == dio.NON_TRIVIAL]
    records = [{"r": s.r, "q": list(s.q), "y": s.y_value, "x": list(s.x_values)} for s in sols[:20]]
    return Outcome("ap-abundance", "at least one non-trivial 3-AP with N=500", len(sols) > 0,
                   {"non_trivial": len(sols)}, records, limit_seconds=60)


def _random_envelope(rng: random.Random, mixed: bool) -> Envelope:
    k = rng.choice((2, 3))
    b = tuple(Fraction(rng.randint(1, 20), rng.randint(1, 20)) for _ in range(k))
    while True:
        Q = [Fraction(rng.randint(1, 400), 200) for _ in range(k)]
        if 1 in Q:
            continue
        below = [x < 1 for x in Q]
        if mixed and 0 < sum(below) < k:
            return Envelope(b, tuple(Q))
        if not mixed and len(set(below)) == 1:
            return Envelope(b, tuple(Q))


def _residual(env: Envelope, u, y) -> float:
    return abs(float((eval_derivatives(env, u.mid, 0, 128) - Fraction(y)).mid))


@_timed
def envelope_roundtrip(jobs: int = 1, count: int = 1000, seed: int = 0) -> Outcome:
    """E(L(y)) = y on every branch and E'(u0) = 0 < E''(u0) at random envelopes."""
    rng = random.Random(seed)
    worst = {DECREASING: 0.0, L1: 0.0, L2: 0.0}
    worst_d1, min_d2 = 0.0, math.inf
    for _ in range(count):
        env = _random_envelope(rng, mixed=False)
        y = float(env.flat_part) + rng.uniform(0.01, 5.0)
        u = invert_on_branch(env, Fraction(y), DECREASING)
        worst[DECREASING] = max(worst[DECREASING], _residual(env, u, y))
    for _ in range(count):
        env = _random_envelope(rng, mixed=True)
        crit = critical_point(env)
        worst_d1 = max(worst_d1, abs(float(eval_derivatives(env, crit.u0.mid, 1, 128).mid)))
        min_d2 = min(min_d2, float(eval_derivatives(env, crit.u0.mid, 2, 128).lo))
        y = Fraction(crit.m_float + rng.uniform(0.01, 3.0))
        for branch in (L1, L2):
            u = invert_on_branch(env, y, branch, crit=crit)
            worst[branch] = max(worst[branch], _residual(env, u, y))
    ok = max(worst.values()) <= 1e-12 and worst_d1 <= 1e-12 and min_d2 > 0
    summary = {"max_residual": worst, "max_abs_derivative_at_u0": worst_d1, "min_second_derivative": min_d2}
    return Outcome("envelope-roundtrip", "|E(L(y)) - y| <= 1e-12, |E'(u0)| <= 1e-12, E''(u0) > 0", ok, summary,
                   limit_seconds=30)


SOUNDNESS_PARAMS = dict(beta=1.05, s=1.3, t=1.6, gamma=3.0, M=10)


@_timed
def covering_soundness(jobs: int = 1, N: int = 200) -> Outcome:
    """Solutions with r >= 10 from the search-oracle runs lie in their J(q; r)."""
    records, failures = [], 0
    tally: dict[str, int] = {}
    for coeffs in ((Fraction(1), Fraction(1)), _half()):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            params = cov.CoveringParams(coeffs, R=N, **SOUNDNESS_PARAMS)
        eq = dio.LinearEquation(coeffs)
        for text in ("3/2", "7/5"):
            a = Alpha.parse(text)
            for sol in dio.search_solutions(eq, a, N, jobs=jobs):
                if sol.r < 10:
                    continue
                res = cov.verify_inclusion(sol, a, params)
                tally[str(res)] = tally.get(str(res), 0) + 1
                if res.status not in (cov.COVERED, cov.TRIVIAL_SOLUTION):
                    failures += 1
                    records.append({"alpha": a, "r": sol.r, "q": list(sol.q), "status": str(res)})
    return Outcome("covering-soundness", "every solution with r >= 10 is Covered", failures == 0,
                   {"failures": failures, "statuses": tally}, records)


@_timed
def spacing(jobs: int = 1, radii: tuple = (50, 100, 200)) -> Outcome:
    """Consecutive admissible minima are at least b_k / r apart."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = cov.CoveringParams(_half(), beta=4, s=4.5, t=5, gamma=40, M=2, R=max(radii))
    records, bad = [], 0
    for r in radii:
        worst, pairs, violations = cov.spacing_scan(params, r)
        bad += violations
        records.append({"r": r, "prefixes_with_pairs": pairs, "min_gap_over_bound": worst, "violations": violations})
    return Outcome("spacing", "min gap >= b_k/r - 1e-12", bad == 0, {"violations": bad}, records)


@_timed
def diam_bounds(jobs: int = 1, R: int = 2000, R332: int = 200) -> Outcome:
    """Case 1 diameter/bound ratios stabilise; Case 3.3.2 sets are empty."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = cov.CoveringParams((1, 1), beta=4, s=4.5, t=5, gamma=8, M=2, R=R)
    rep = cov.diam_bound_report(cov.iter_batches(params, jobs=jobs), params)
    st = rep[cov.CASE1]
    early, late = cov.sup_over(st, 500, 1000), cov.sup_over(st, 1000, 2000)
    growth = late / early - 1 if early > 0 else math.inf
    stable = math.isfinite(st.sup_ratio) and growth < 0.05
    # a family with sum b > 1, where minima above 1 + r^-beta occur
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p332 = cov.CoveringParams((1, Fraction(1, 2)), beta=4, s=4.5, t=5, gamma=40, M=2, R=R332)
    n332, max332, rechecked = 0, 0.0, 0
    for batch in cov.iter_batches(p332, include_empty=True, jobs=jobs):
        rows = [i for i in range(len(batch)) if batch.tag[i] == cov._C332]
        n332 += len(rows)
        for i in rows:
            max332 = max(max332, float(batch.d1[i]), float(batch.d2[i]))
        # recompute a few from the values alone, bypassing the tag shortcut
        for i in rows[:: max(1, len(rows) // 3)][:3]:
            q = tuple(int(x) for x in batch.q[i])
            env = Envelope.from_indices(p332.b, q, batch.r)
            ci = cover_interval(env, batch.r, p332.beta, p332.s, p332.t, p332.gamma, q=q, case_tag=cov.CASE333)
            max332 = max(max332, ci.diam if not ci.empty else 0.0)
            rechecked += 1
    ok = stable and n332 > 0 and max332 == 0.0
    summary = {"case1_count": st.count, "sup_ratio": st.sup_ratio, "witness": st.witness,
               "sup_500_1000": early, "sup_1000_2000": late, "relative_growth": growth,
               "case332_count": n332, "case332_max_diam": max332, "case332_rechecked": rechecked}
    return Outcome("diam-bounds", "Case 1 sup grows < 5% from [500,1000] to [1000,2000]; Case 3.3.2 diam 0", ok, summary,
                   limit_seconds=600)


PHASE_PARAMS = dict(beta=14, s=15, t=16, gamma=30)


@_timed
def premeasure_phase(jobs: int = 1, R: int = 1500) -> Outcome:
    """Top-decade per-r slope below -1 at sigma = 0.9 and above -1 at sigma = 0.2."""
    params = cov.CoveringParams(_half(), M=2, R=R, **PHASE_PARAMS)
    diag = cov.dimension_diagnostic(params, [0.2, 0.4, 0.6, 0.9], [R], jobs=jobs)
    slopes = dict(zip(diag.sigma_grid, diag.slopes))
    ok = slopes[0.9] < -1 and slopes[0.2] > -1
    records = [{"sigma": s, "slope": sl, "slope_log_sigma": a, "slope_log_sigma_plus_1": b, "partial_sum": row[-1]}
               for s, sl, a, b, row in zip(diag.sigma_grid, diag.slopes, diag.slopes_log_sigma,
                                           diag.slopes_log_sigma1, diag.sums)]
    return Outcome("premeasure-phase", "slope(0.9) < -1 < slope(0.2)", ok,
                   {"threshold_reference": diag.threshold_reference, "slopes": slopes}, records, limit_seconds=900)


@_timed
def log_sum(jobs: int = 1, r_max: int = 10**4, first_decade: int = 10) -> Outcome:
    """lhs / (r + [sigma=1] r log r + r^sigma) against the constant fitted on r <= 10."""
    records, ok = [], True
    for sigma in (0.5, 1.0, 2.0):
        ratios = []
        for r in range(2, r_max + 1):
            lhs, rhs, _ = cov.log_sum_check(r, sigma)
            ratios.append((r, lhs / rhs))
        C = max(v for r, v in ratios if r <= first_decade)
        over = [(r, v) for r, v in ratios if r > first_decade and v > C]
        ok &= not over
        worst = max(ratios, key=lambda p: p[1])
        records.append({"sigma": sigma, "C_first_decade": C, "max_ratio": worst[1], "argmax_r": worst[0],
                        "first_exceeding_r": over[0][0] if over else None, "exceeding_count": len(over)})
    return Outcome("log-sum", "lhs <= C * rhs with C fixed from r <= 10", ok, {"sigmas": records}, records,
                   limit_seconds=60)


PRESETS: dict[str, tuple[str, Callable[..., Outcome]]] = {
    "floor-oracle": ("1", floor_oracle),
    "search-oracle": ("2", search_oracle),
    "fermat-threshold": ("3", fermat_threshold),
    "fermat-growth": ("4", fermat_growth),
    "ap-abundance": ("5", ap_abundance),
    "envelope-roundtrip": ("6", envelope_roundtrip),
    "covering-soundness": ("7", covering_soundness),
    "spacing": ("8", spacing),
    "diam-bounds": ("9", diam_bounds),
    "premeasure-phase": ("10", premeasure_phase),
    "log-sum": ("11", log_sum),
}


def run_preset(name: str, jobs: int = 1) -> Outcome:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[name][1](jobs=jobs)
