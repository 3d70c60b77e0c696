"""Linear equations over Piatetski-Shapiro sequences floor(n**alpha).

Exact sequence terms, exhaustive solution search, and the covering intervals
and premeasure sums that bound the size of the exceptional exponent sets.
"""

from importlib.metadata import PackageNotFoundError, version

from .rigor import Alpha, BoundedReal, PrecisionExhausted, Undecidable, floor_pow, nth_root_floor
from .ps_seq import is_member, ps_range
from .diophantine import LinearEquation, SolutionTuple, count_fermat, search_solutions
from .envelope import CoverInterval, Envelope, cover_interval, critical_point, invert_on_branch
from .covering import CoveringParams, dimension_diagnostic, enumerate_covering, partial_premeasure, verify_inclusion

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "Alpha",
    "BoundedReal",
    "PrecisionExhausted",
    "Undecidable",
    "floor_pow",
    "nth_root_floor",
    "is_member",
    "ps_range",
    "LinearEquation",
    "SolutionTuple",
    "count_fermat",
    "search_solutions",
    "CoverInterval",
    "Envelope",
    "cover_interval",
    "critical_point",
    "invert_on_branch",
    "CoveringParams",
    "dimension_diagnostic",
    "enumerate_covering",
    "partial_premeasure",
    "verify_inclusion",
]
