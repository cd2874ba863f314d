import math

import numpy as np
from hypothesis import given, strategies as st

from realclocks import textio


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_roundtrips(x):
    assert float(textio.fmt(x)) == x


def test_special_values():
    assert textio.fmt(None) == "absent"
    assert textio.fmt(True) == "true"
    assert textio.fmt(math.inf) == "inf"


def test_csv_roundtrip(tmp_path):
    rows = [(0.1, 1 / 3, -2e-300), (1e300, 0.0, 7.0)]
    path = textio.write_csv(tmp_path / "a.csv", ["x", "y", "z"], rows, comments={"seed": 3})
    text = path.read_bytes()
    assert b"\r" not in text and text.startswith(b"# seed = 3\n")
    header, data, meta = textio.read_csv(path)
    assert header == ["x", "y", "z"] and meta == {"seed": "3"}
    assert np.array_equal(data, np.array(rows))


def test_report_is_key_value(tmp_path):
    path = textio.write_report(tmp_path / "s.txt", {"a": 1.5, "b": "ok"})
    assert path.read_text() == "a = 1.5\nb = ok\n"
