from __future__ import annotations

import json
import math

import numpy as np
import pytest

from sturmwave.io import dumps, format_value, to_jsonable, write_csv, write_json


def test_float_format_round_trips():
    for v in (0.1, 1 / 3, math.pi, 1e-300, -2.5e17):
        s = format_value(v)
        assert float(s) == v
        assert len(s.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 17
    assert format_value(np.float64(0.1)) == "0.10000000000000001"
    assert format_value(np.int64(3)) == "3"
    assert format_value(True) == "true"


def test_csv_layout(tmp_path):
    path = write_csv(tmp_path / "a.csv", ("n", "v"), [(1, 0.5), (2, "x")])
    assert path.read_bytes() == b"n,v\n1,0.5\n2,x\n"


def test_json_stable_and_strict(tmp_path):
    obj = {"b": np.array([1.0, np.inf]), "a": (np.int32(2), float("nan")), "c": {"z": 1, "y": True}}
    text = dumps(obj)
    assert text.endswith("\n")
    assert list(json.loads(text)) == ["a", "b", "c"]
    assert json.loads(text)["b"] == [1.0, "inf"]
    assert to_jsonable(obj)["a"] == [2, "nan"]
    p1 = write_json(tmp_path / "1.json", obj)
    p2 = write_json(tmp_path / "2.json", dict(reversed(list(obj.items()))))
    assert p1.read_bytes() == p2.read_bytes()


def test_json_rejects_raw_objects():
    with pytest.raises(TypeError):
        dumps({"a": object()})
