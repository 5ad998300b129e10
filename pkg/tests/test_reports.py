import csv
import io
import json
import math

import numpy as np
from hypothesis import given, strategies as st

from twisted_riesz import __version__, reports
from twisted_riesz.propagator import NORMALIZATION


@given(st.floats(allow_nan=False, allow_infinity=True))
def test_fmt_real_round_trips(x):
    assert float(reports.fmt_real(x)) == x


def test_fmt_real_nan():
    assert reports.fmt_real(math.nan) == "nan"


def test_envelope_keys():
    doc = reports.envelope("demo", {"lambda": 64.0}, {"v": np.float64(0.1)})
    assert doc["version"] == __version__
    assert doc["normalization"] == NORMALIZATION
    assert doc["config"] == {"lambda": 64.0}


def test_json_deterministic_and_complex():
    doc = reports.envelope("demo", {"b": 1, "a": 2}, {"z": 1 + 2j, "arr": np.arange(3), "inf": math.inf})
    text = reports.to_json(doc)
    assert text == reports.to_json(dict(reversed(list(doc.items()))))
    back = json.loads(text)
    assert back["result"]["z"] == {"re": 1.0, "im": 2.0}
    assert back["result"]["inf"] == "inf"
    assert back["result"]["arr"] == [0, 1, 2]


def test_csv_rows_parse_back():
    x = 0.1 + 0.2
    doc = reports.envelope("demo", {"note": 'has "quotes", commas'}, {})
    text = reports.to_csv(doc, [{"lambda": 64.0, "value": x, "flag": True}])
    assert text.endswith("\r\n")
    assert "\n" not in text.replace("\r\n", "")
    rows = list(csv.reader(io.StringIO(text, newline="")))
    assert rows[0] == ["lambda", "value", "flag"]
    assert float(rows[1][1]) == x
    assert rows[1][2] == "true"
    meta = {r[0]: r[1] for r in rows[2:]}
    assert meta["# config.note"] == 'has "quotes", commas'
    assert meta["# version"] == __version__


def test_csv_flat_document():
    doc = reports.envelope("demo", {"k": 1}, {"nested": {"a": [1.5, 2.5]}})
    rows = list(csv.reader(io.StringIO(reports.to_csv(doc), newline="")))
    flat = dict(rows[1:])
    assert flat["result.nested.a[1]"] == "2.5"
    assert flat["normalization"] == NORMALIZATION
