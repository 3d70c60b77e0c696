import io
import json
from fractions import Fraction

import mpmath
import pytest

from psdio.io import RecordWriter, jsonl_line, parse_config_file, read_csv, read_jsonl, to_plain
from psdio.rigor import Alpha, BoundedReal, log_rational


def test_plain_values():
    assert to_plain(Fraction(3, 2)) == "3/2"
    assert to_plain(Fraction(4, 2)) == "2"
    assert to_plain(Alpha.parse("7/5")) == "7/5"
    assert to_plain(float("inf")) == "inf"
    assert to_plain((1, Fraction(1, 3))) == [1, "1/3"]


def test_unknown_type():
    with pytest.raises(TypeError):
        to_plain(object())


@pytest.mark.parametrize("bits", [64, 113, 300])
def test_enclosure_round_trip(bits):
    x = log_rational(Fraction(3, 2), bits)
    d = to_plain(x)
    assert d["bits"] >= x.precision_bits
    with mpmath.workprec(d["bits"]):
        assert mpmath.mpf(d["lo"]) == x.lo
        assert mpmath.mpf(d["hi"]) == x.hi


def test_jsonl_sorted_and_compact():
    line = jsonl_line({"b": 1, "a": Fraction(1, 2)})
    assert line == '{"a":"1/2","b":1}'


def test_writer_jsonl():
    out = io.StringIO()
    w = RecordWriter(out, "jsonl")
    w.config({"alpha": "3/2"})
    w.write_all([{"n": 1, "value": 1}, {"n": 2, "value": 2}])
    recs = read_jsonl(out.getvalue())
    assert recs[0] == {"record": "config", "alpha": "3/2"}
    assert [r["n"] for r in recs[1:]] == [1, 2]


def test_writer_csv():
    out, meta = io.StringIO(), io.StringIO()
    w = RecordWriter(out, "csv", meta=meta)
    w.config({"alpha": "3/2"})
    w.write({"n": 1, "x": [1, 2], "ok": True})
    w.write({"n": 2, "x": None, "ok": False})
    text = out.getvalue()
    assert text.startswith("n,x,ok\r\n") and text.endswith("\r\n")
    rows = read_csv(text)
    assert rows[0] == {"n": "1", "x": "[1,2]", "ok": "true"}
    assert rows[1]["x"] == ""
    assert json.loads(meta.getvalue())["alpha"] == "3/2"


def test_writer_csv_header_without_rows():
    out = io.StringIO()
    RecordWriter(out, "csv", columns=["r", "q"]).write_all([])
    assert out.getvalue() == "r,q\r\n"


def test_writer_rejects_format():
    with pytest.raises(ValueError):
        RecordWriter(io.StringIO(), "xml")


def test_config_file():
    text = "# header\nalpha = 3/2\n\nmax-r=50  # trailing\n"
    assert parse_config_file(text) == {"alpha": "3/2", "max_r": "50"}
    with pytest.raises(ValueError):
        parse_config_file("alpha\n")
