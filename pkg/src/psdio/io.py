"""Record serialisation: JSON-Lines with sorted keys, or RFC 4180 CSV."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import fields, is_dataclass
from fractions import Fraction
from typing import IO, Any, Iterable, Sequence

import mpmath

from .rigor import Alpha, BoundedReal

FORMATS = ("jsonl", "csv")


def to_plain(x: Any) -> Any:
    """Convert domain values to JSON-compatible ones without losing precision.

    Rationals become "p/q" strings and enclosures {lo, hi, bits}; the endpoint
    strings parse back to the same dyadic values at ``bits`` precision.
    """
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, Alpha):
        return str(x)
    if isinstance(x, BoundedReal):
        bits = max(x.precision_bits, _mant_bits(x.lo), _mant_bits(x.hi))
        return {"lo": _mpf_text(x.lo), "hi": _mpf_text(x.hi), "bits": bits}
    if isinstance(x, mpmath.mpf):
        return _mpf_text(x)
    if isinstance(x, dict):
        return {str(k): to_plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_plain(v) for v in x]
    if is_dataclass(x):
        return {f.name: to_plain(getattr(x, f.name)) for f in fields(x)}
    if hasattr(x, "item"):  # numpy scalars
        return to_plain(x.item())
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _mant_bits(v: mpmath.mpf) -> int:
    return abs(v.man_exp[0]).bit_length()


def _mpf_text(v: mpmath.mpf) -> str:
    # enough digits that the text rounds back to the same dyadic endpoint
    n = _mant_bits(v)
    if n == 0:
        return "0"
    digits = max(17, int(n * 0.30103) + 3)
    with mpmath.workprec(n + 16):
        return mpmath.nstr(v, digits)


def jsonl_line(record: dict) -> str:
    return json.dumps(to_plain(record), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _cell(v: Any) -> str:
    v = to_plain(v)
    if v is None:
        return ""
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


class RecordWriter:
    """Writes a config header record followed by data records.

    In JSONL the config is the first line.  A CSV stream holds a single table,
    so the config is written as one JSON line to ``meta`` (stderr by default in
    the CLI) and the CSV header comes from the first data record.
    """

    def __init__(self, out: IO[str], fmt: str = "jsonl", meta: IO[str] | None = None, columns: Sequence[str] | None = None):
        if fmt not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
        self.out, self.fmt, self.meta = out, fmt, meta
        self.columns = list(columns) if columns else None
        self._csv = csv.writer(out, lineterminator="\r\n") if fmt == "csv" else None
        self._header_done = False

    def config(self, config: dict) -> None:
        rec = {"record": "config", **config}
        if self.fmt == "jsonl":
            self.out.write(jsonl_line(rec) + "\n")
        elif self.meta is not None:
            self.meta.write(jsonl_line(rec) + "\n")

    def write(self, record: dict) -> None:
        if self.fmt == "jsonl":
            self.out.write(jsonl_line(record) + "\n")
            return
        if self.columns is None:
            self.columns = list(record)
        if not self._header_done:
            self._csv.writerow(self.columns)
            self._header_done = True
        self._csv.writerow([_cell(record.get(c)) for c in self.columns])

    def write_all(self, records: Iterable[dict]) -> int:
        n = 0
        for rec in records:
            self.write(rec)
            n += 1
        if self.fmt == "csv" and not self._header_done and self.columns:
            self._csv.writerow(self.columns)
            self._header_done = True
        return n


def read_jsonl(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def parse_config_file(text: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out
