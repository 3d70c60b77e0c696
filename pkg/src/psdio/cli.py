"""psdio command line: sequence terms, solution search, cover sets and presets.

Every run writes its resolved configuration first (the first JSONL line, or
one JSON line on stderr for CSV) and then one record per result.
Exit codes: 0 success, 2 usage error, 3 precision ceiling reached.
"""

from __future__ import annotations

import inspect
import sys
import warnings
from fractions import Fraction
from functools import wraps

import click
from click.core import ParameterSource

from . import __version__
from . import covering as cov
from . import diophantine as dio
from . import experiments
from .envelope import Envelope, cover_interval, critical_point
from .io import RecordWriter, parse_config_file
from .ps_seq import is_member, ps_range
from .rigor import Alpha, PrecisionExhausted

EXIT_USAGE = 2
EXIT_PRECISION = 3

# options that do not change any result and stay out of the echoed config
_NOT_ECHOED = {"jobs", "format", "config"}


# ---------------------------------------------------------------------------
# parameter types


class AlphaType(click.ParamType):
    name = "alpha"

    def convert(self, value, param, ctx):
        if isinstance(value, Alpha):
            return value
        try:
            return Alpha.parse(str(value))
        except (ValueError, ZeroDivisionError) as exc:
            self.fail(f"{value!r}: {exc}; expected p/q or a decimal, non-integral and > 1", param, ctx)


class FractionList(click.ParamType):
    name = "list"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            items = tuple(Fraction(x.strip()) for x in str(value).split(",") if x.strip())
        except (ValueError, ZeroDivisionError):
            self.fail(f"{value!r} is not a comma-separated list of rationals (e.g. 1/2,1/2)", param, ctx)
        if not items:
            self.fail("empty list", param, ctx)
        return items


class IntList(click.ParamType):
    name = "ints"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            return tuple(int(x) for x in str(value).split(",") if x.strip())
        except ValueError:
            self.fail(f"{value!r} is not a comma-separated list of integers", param, ctx)


class FloatList(click.ParamType):
    name = "floats"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            return tuple(float(x) for x in str(value).split(",") if x.strip())
        except ValueError:
            self.fail(f"{value!r} is not a comma-separated list of numbers", param, ctx)


ALPHA = AlphaType()
FRACTIONS = FractionList()
INTS = IntList()
FLOATS = FloatList()


# ---------------------------------------------------------------------------
# shared plumbing


class _FlatDefaults(dict):
    """A flat key=value config served as click's default_map at every level.

    Click looks up a subcommand's defaults with default_map.get(name); group
    names resolve to the same mapping so the file needs no sections.
    """

    def get(self, key, default=None):
        if key in self:
            return self[key]
        return self if key in _GROUP_NAMES else default


_GROUP_NAMES: set[str] = set()


def _check_config_keys(ctx: click.Context) -> None:
    conf = (ctx.obj or {}).get("config_values", {})
    known = {p.name for p in ctx.command.params}
    unknown = sorted(set(conf) - known)
    if unknown:
        raise click.UsageError(
            f"unknown config key(s) {', '.join(unknown)}; valid keys for '{ctx.command_path}': {', '.join(sorted(known))}"
        )


def _writer(fmt: str, columns=None) -> RecordWriter:
    return RecordWriter(click.get_text_stream("stdout"), fmt, meta=click.get_text_stream("stderr"), columns=columns)


def _echo_config(w: RecordWriter, ctx: click.Context, kwargs: dict, extra: dict | None = None) -> None:
    conf = {k: v for k, v in kwargs.items() if k not in _NOT_ECHOED}
    w.config({"command": ctx.command_path.split(" ", 1)[-1], "version": __version__,
              "seed": (ctx.obj or {}).get("seed", 0), **conf, **(extra or {})})


def leaf(fn):
    """Reject config keys the command does not know, then run it."""

    @wraps(fn)
    @click.pass_context
    def wrapper(ctx, **kwargs):
        _check_config_keys(ctx)
        return fn(ctx, **kwargs)

    return wrapper


def format_option(default="jsonl"):
    return click.option("--format", "format", type=click.Choice(["csv", "jsonl"]), default=default, show_default=True)


def jobs_option(fn):
    return click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
                        help="Worker processes; output does not depend on it.")(fn)


def cover_options(fn):
    opts = [
        click.option("--coeffs", type=FRACTIONS, required=True, help="b_1,...,b_k (one value is repeated k times)."),
        click.option("--k", "k", type=click.IntRange(min=1), default=None),
        click.option("--beta", type=float, required=True),
        click.option("--s", "s", type=float, required=True),
        click.option("--t", "t", type=float, required=True),
        click.option("--gamma", type=float, required=True),
        click.option("--min-r", "min_r", type=click.IntRange(min=2), default=2, show_default=True),
        click.option("--max-r", "max_r", type=click.IntRange(min=2), required=True),
        click.option("--x-exponent", "x_exponent", type=float, default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _params(kwargs: dict, sigma: float = 1.0) -> cov.CoveringParams:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            p = cov.CoveringParams(kwargs["coeffs"], kwargs["beta"], kwargs["s"], kwargs["t"], kwargs["gamma"],
                                   M=kwargs["min_r"], R=kwargs["max_r"], x_exponent=kwargs["x_exponent"],
                                   sigma=sigma, k=kwargs["k"])
        except ValueError as exc:
            raise click.UsageError(f"covering parameters: {exc}") from None
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)
    return p


def _cover_extra(p: cov.CoveringParams) -> dict:
    return {"resolved": p.config(), "min_r_report": cov.min_r_report(p),
            "threshold_reference": p.threshold_reference}


# ---------------------------------------------------------------------------
# root


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="psdio")
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Flat key=value file; explicit flags take precedence.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for randomised sampling.")
@click.pass_context
def cli(ctx, config, seed):
    """Piatetski-Shapiro sequences, linear equations over them, and covering diagnostics."""
    values = {}
    if config:
        with open(config, encoding="utf-8") as fh:
            try:
                values = parse_config_file(fh.read())
            except ValueError as exc:
                raise click.UsageError(f"--config {config}: {exc}") from None
    if "seed" in values:
        seed = int(values.pop("seed"))
    ctx.obj = {"config_values": values, "seed": seed}
    ctx.default_map = _FlatDefaults(values)


# ---------------------------------------------------------------------------
# ps


@cli.group()
def ps():
    """Terms of floor(n**alpha)."""


@ps.command("gen")
@click.option("--alpha", type=ALPHA, required=True)
@click.option("--n", "n", type=click.IntRange(min=1), required=True)
@format_option()
@leaf
def ps_gen(ctx, alpha, n, format):
    """Emit n, floor(n**alpha) for n = 1..N."""
    w = _writer(format, ["n", "value"])
    _echo_config(w, ctx, {"alpha": alpha, "n": n})
    terms = ps_range(alpha, n)
    w.write_all({"n": t.n, "value": t.value} for t in terms)


@ps.command("member")
@click.option("--alpha", type=ALPHA, required=True)
@click.option("--m", "m", type=INTS, required=True, help="Comma-separated candidates.")
@format_option()
@leaf
def ps_member(ctx, alpha, m, format):
    """Decide whether each m is a term, and give its index."""
    if any(x < 1 for x in m):
        raise click.BadParameter("values must be at least 1", param_hint="--m")
    w = _writer(format, ["m", "member", "n"])
    _echo_config(w, ctx, {"alpha": alpha, "m": list(m)})
    for x in m:
        idx = is_member(x, alpha)
        w.write({"m": x, "member": idx is not None, "n": idx})


# ---------------------------------------------------------------------------
# dio


@cli.group("dio")
def dio_group():
    """Solutions of y = a_1 x_1 + ... + a_k x_k in PS(alpha)."""


def _solution_record(s: dio.SolutionTuple) -> dict:
    return {"r": s.r, "q": list(s.q), "values": [s.y_value, *s.x_values], "classification": s.classification}


@dio_group.command("search")
@click.option("--alpha", type=ALPHA, required=True)
@click.option("--coeffs", type=FRACTIONS, required=True)
@click.option("-N", "N", type=click.IntRange(min=2), required=True)
@click.option("--membership", type=click.Choice(["table", "preimage"]), default="table", show_default=True)
@click.option("--non-trivial-only", is_flag=True, default=False)
@jobs_option
@format_option()
@leaf
def dio_search(ctx, alpha, coeffs, N, membership, non_trivial_only, jobs, format):
    """All solutions with r <= N in (r, q) order."""
    eq = dio.LinearEquation(coeffs)
    w = _writer(format, ["r", "q", "values", "classification"])
    _echo_config(w, ctx, {"alpha": alpha, "coeffs": list(coeffs), "N": N, "membership": membership,
                          "non_trivial_only": non_trivial_only})
    for s in dio.search_solutions(eq, alpha, N, jobs=jobs, membership=membership):
        if non_trivial_only and s.classification == dio.TRIVIAL:
            continue
        w.write(_solution_record(s))
    w.write_all([])


MODES = {"smallest": dio.SMALLEST, "largest": dio.LARGEST}


@dio_group.command("count")
@click.option("--alpha", type=ALPHA, required=True)
@click.option("--x", "x", type=INTS, required=True, help="One or more bounds, comma-separated.")
@click.option("--mode", type=click.Choice(sorted(MODES)), default="largest", show_default=True)
@click.option("--n-bound", "n_bound", type=click.IntRange(min=2), default=None)
@format_option()
@leaf
def dio_count(ctx, alpha, x, mode, n_bound, format):
    """Count solutions of floor(l^a) + floor(m^a) = floor(n^a)."""
    if any(v < 2 for v in x):
        raise click.BadParameter("bounds must be at least 2", param_hint="--x")
    w = _writer(format, ["x", "mode", "count"])
    _echo_config(w, ctx, {"alpha": alpha, "x": list(x), "mode": mode, "n_bound": n_bound})
    for v in x:
        w.write({"x": v, "mode": MODES[mode], "count": dio.count_fermat(alpha, v, MODES[mode], n_bound)})


@dio_group.command("fit")
@click.option("--alpha", type=ALPHA, required=True)
@click.option("--x", "x", type=INTS, default=(100, 200, 400, 800), show_default=True)
@click.option("--mode", type=click.Choice(sorted(MODES)), default="largest", show_default=True)
@format_option()
@leaf
def dio_fit(ctx, alpha, x, mode, format):
    """Fit the log-log growth exponent of the counts and compare with the prediction."""
    w = _writer(format, ["x", "count", "slope", "predicted", "max_residual"])
    _echo_config(w, ctx, {"alpha": alpha, "x": list(x), "mode": mode})
    counts = [(v, dio.count_fermat(alpha, v, MODES[mode])) for v in x]
    for v, c in counts:
        w.write({"x": v, "count": c})
    try:
        slope, _, resid = dio.fit_growth_exponent(counts)
    except dio.DegenerateFit as exc:
        raise click.UsageError(str(exc)) from None
    model = dio.GrowthModel.from_alpha(alpha)
    w.write({"slope": slope, "predicted": model.predicted_exponent, "max_residual": resid})


# ---------------------------------------------------------------------------
# env


@cli.group("env")
def env_group():
    """Single envelopes E(u) = sum b_i Q_i**u."""


def _interval_record(ci) -> dict:
    return {"r": ci.r, "q": list(ci.q) if ci.q else None, "case_tag": ci.case_tag, "empty": ci.empty,
            "lo": ci.lo, "hi": ci.hi, "diam": ci.diam, "piece_diams": list(ci.piece_diams),
            "u0": ci.u0, "deficit": ci.deficit, "source": ci.source}


@env_group.command("solve")
@click.option("--b", "b", type=FRACTIONS, required=True)
@click.option("--q", "q", type=INTS, required=True)
@click.option("--r", "r", type=click.IntRange(min=2), required=True)
@click.option("--beta", type=float, required=True)
@click.option("--s", "s", type=float, required=True)
@click.option("--t", "t", type=float, required=True)
@click.option("--gamma", type=float, default=float("inf"), show_default=True)
@click.option("--x-exponent", "x_exponent", type=float, default=None)
@format_option()
@leaf
def env_solve(ctx, b, q, r, beta, s, t, gamma, x_exponent, format):
    """The cover set J(q; r) = {u in [s, t] : |E(u) - 1| <= r**-beta}."""
    if len(b) != len(q):
        raise click.BadParameter(f"--b has {len(b)} entries but --q has {len(q)}", param_hint="--q")
    if any(x == r for x in q) or any(x < 1 for x in q):
        raise click.BadParameter("entries must be positive and differ from r", param_hint="--q")
    env = Envelope.from_indices(b, q, r)
    try:
        ci = cover_interval(env, r, beta, s, t, gamma, x_exponent, q=tuple(q))
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    w = _writer(format)
    _echo_config(w, ctx, {"b": list(b), "q": list(q), "r": r, "beta": beta, "s": s, "t": t, "gamma": gamma,
                          "x_exponent": x_exponent})
    w.write(_interval_record(ci))


@env_group.command("critical")
@click.option("--b", "b", type=FRACTIONS, required=True)
@click.option("--Q", "Q", type=FRACTIONS, required=True, help="Ratios Q_i, e.g. 1/2,3/2.")
@click.option("--tol", type=float, default=1e-14, show_default=True)
@format_option()
@leaf
def env_critical(ctx, b, Q, tol, format):
    """Minimiser u0 and minimum m of E (monotone envelopes have none)."""
    if len(b) != len(Q):
        raise click.BadParameter(f"--b has {len(b)} entries but --Q has {len(Q)}", param_hint="--Q")
    try:
        env = Envelope(b, Q)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    w = _writer(format, ["u0", "m", "interior_minimum"])
    _echo_config(w, ctx, {"b": list(b), "Q": list(Q), "tol": tol})
    crit = critical_point(env, tol=tol)
    if crit is None:
        w.write({"u0": None, "m": None, "interior_minimum": False})
    else:
        w.write({"u0": crit.u0, "m": crit.m, "interior_minimum": True})


# ---------------------------------------------------------------------------
# cover


@cli.group("cover")
def cover_group():
    """Covering families over r in [min-r, max-r]."""


@cover_group.command("build")
@cover_options
@click.option("--include-empty", is_flag=True, default=False)
@jobs_option
@format_option()
@leaf
def cover_build(ctx, include_empty, jobs, format, **kw):
    """One record per J(q; r), in (r, nu, q) order."""
    p = _params(kw)
    w = _writer(format, ["r", "q", "case_tag", "empty", "lo", "hi", "diam", "piece_diams", "u0", "deficit", "source"])
    _echo_config(w, ctx, {**kw, "include_empty": include_empty}, _cover_extra(p))
    for batch in cov.iter_batches(p, include_empty, jobs):
        for ci in batch.intervals():
            rec = _interval_record(ci)
            rec["lo"] = float(ci.lo.lo) if ci.lo is not None else None
            rec["hi"] = float(ci.hi.hi) if ci.hi is not None else None
            w.write(rec)
    w.write_all([])


@cover_group.command("sum")
@cover_options
@click.option("--sigma", type=click.FloatRange(0, 1, min_open=True), required=True)
@jobs_option
@format_option()
@leaf
def cover_sum(ctx, sigma, jobs, format, **kw):
    """Per-r premeasure sums of diam**sigma and the cumulative total."""
    p = _params(kw, sigma)
    w = _writer(format, ["r", "sum", "cumulative", "tail"])
    _echo_config(w, ctx, {**kw, "sigma": sigma}, _cover_extra(p))
    rep = cov.partial_premeasure(cov.iter_batches(p, False, jobs), sigma)
    acc = 0.0
    tails = dict(rep.tail_estimates)
    for r, v in rep.per_r_sums:
        acc += v
        w.write({"r": r, "sum": v, "cumulative": acc, "tail": tails[r]})
    w.write({"r": None, "sum": None, "cumulative": rep.cumulative, "tail": None})


@cover_group.command("dim")
@cover_options
@click.option("--sigma-grid", "sigma_grid", type=FLOATS, default=None,
              help="Comma-separated sigma values (default: 21 points around the reference threshold).")
@click.option("--r-grid", "r_grid", type=INTS, default=None, help="Truncation radii (columns).")
@jobs_option
@format_option("csv")
@leaf
def cover_dim(ctx, sigma_grid, r_grid, jobs, format, **kw):
    """Matrix of partial sums: one row per sigma, one column per truncation R."""
    p = _params(kw)
    try:
        d = cov.dimension_diagnostic(p, sigma_grid, r_grid, jobs=jobs)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    cols = ["sigma"] + [f"R={R}" for R in d.truncation_grid] + ["slope", "slope_log_sigma", "slope_log_sigma_plus_1",
                                                               "convergent_like"]
    w = _writer(format, cols)
    _echo_config(w, ctx, {**kw, "sigma_grid": list(d.sigma_grid), "r_grid": list(d.truncation_grid)}, _cover_extra(p))
    for i, sigma in enumerate(d.sigma_grid):
        rec = {"sigma": sigma, **{f"R={R}": v for R, v in zip(d.truncation_grid, d.sums[i])}}
        rec.update(slope=d.slopes[i], slope_log_sigma=d.slopes_log_sigma[i],
                   slope_log_sigma_plus_1=d.slopes_log_sigma1[i], convergent_like=d.convergent_like[i])
        w.write(rec)


@cover_group.command("verify")
@cover_options
@click.option("--alpha", type=ALPHA, required=True)
@click.option("-N", "N", type=click.IntRange(min=2), required=True)
@jobs_option
@format_option()
@leaf
def cover_verify(ctx, alpha, N, jobs, format, **kw):
    """Search solutions at alpha and check each lies in its cover set."""
    p = _params(kw)
    eq = dio.LinearEquation(p.b)
    w = _writer(format, ["r", "q", "status", "case_tag"])
    _echo_config(w, ctx, {**kw, "alpha": alpha, "N": N}, _cover_extra(p))
    try:
        sols = dio.search_solutions(eq, alpha, N, jobs=jobs)
        for s in sols:
            res = cov.verify_inclusion(s, alpha, p)
            w.write({"r": s.r, "q": list(s.q), "status": res.status, "case_tag": res.case_tag})
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    w.write_all([])


@cover_group.command("bounds")
@cover_options
@click.option("--include-empty", is_flag=True, default=False)
@jobs_option
@format_option()
@leaf
def cover_bounds(ctx, include_empty, jobs, format, **kw):
    """Per case tag: count and the sup of diam / bound with its witness."""
    p = _params(kw)
    w = _writer(format, ["case_tag", "count", "sup_ratio", "witness_q", "witness_r", "max_diam"])
    _echo_config(w, ctx, {**kw, "include_empty": include_empty}, _cover_extra(p))
    rep = cov.diam_bound_report(cov.iter_batches(p, include_empty, jobs), p)
    for tag in cov.ALL_CASES:
        if tag in rep:
            st = rep[tag]
            wq, wr = st.witness if st.witness else (None, None)
            w.write({"case_tag": tag, "count": st.count, "sup_ratio": st.sup_ratio,
                     "witness_q": list(wq) if wq else None, "witness_r": wr, "max_diam": st.max_diam})
    w.write_all([])


@cover_group.command("logsum")
@click.option("--sigma", type=click.FloatRange(0, min_open=True), required=True)
@click.option("--r-max", "r_max", type=click.IntRange(min=2), required=True)
@click.option("--B", "B", type=click.FloatRange(1, min_open=True), default=2.0, show_default=True)
@format_option()
@leaf
def cover_logsum(ctx, sigma, r_max, B, format):
    """Sum of log(r/q)**-sigma over q < r against r + [sigma=1] r log r + r**sigma."""
    w = _writer(format, ["r", "lhs", "rhs", "ratio", "upper_sum"])
    _echo_config(w, ctx, {"sigma": sigma, "r_max": r_max, "B": B})
    for r in range(2, r_max + 1):
        lhs, rhs, upper = cov.log_sum_check(r, sigma, B)
        w.write({"r": r, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs, "upper_sum": upper})


# ---------------------------------------------------------------------------
# presets


@cli.command("preset")
@click.argument("name", type=click.Choice(list(experiments.PRESETS)))
@jobs_option
@leaf
def preset(ctx, name, jobs):
    """Run the experiment behind one acceptance check."""
    fn = experiments.PRESETS[name][1]
    kwargs = {"jobs": jobs}
    if "seed" in inspect.signature(fn).parameters:
        kwargs["seed"] = ctx.obj.get("seed", 0)
    w = _writer("jsonl")
    _echo_config(w, ctx, {"name": name})
    out = fn(**kwargs)
    w.write({"record": "summary", "name": out.name, "criterion": out.criterion, "passed": out.passed,
             **{k: v for k, v in out.summary.items() if k != "over_time_limit"}})
    for rec in out.records:
        w.write({"record": "item", **rec})
    click.echo(f"{out.line}", err=True)
    if not out.passed:
        raise click.exceptions.Exit(1)


# ---------------------------------------------------------------------------
# entry point


_GROUP_NAMES.update(cli.commands)
for _group in cli.commands.values():
    if isinstance(_group, click.Group):
        _GROUP_NAMES.update(_group.commands)


def run(argv=None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        rc = cli.main(args=argv, prog_name="psdio", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except PrecisionExhausted as exc:
        click.echo(f"error: precision ceiling reached: {exc}", err=True)
        return EXIT_PRECISION
    except ValueError as exc:
        # domain checks in the library (bad coefficients, parameter ordering)
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return rc if isinstance(rc, int) else 0


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
