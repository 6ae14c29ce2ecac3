import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nhberry.errors import EvaluationFailure, FormatError, GridMismatch, NonSquare
from nhberry.io import (
    ResultRecord,
    config_hash,
    encode_value,
    format_nhgrid,
    load_external_model,
    parse_nhgrid,
    save_external_model,
    to_csv,
    to_json,
)
from nhberry.models import make_model

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (2, 3, 2, 2, 2), elements=finite))
def test_format_round_trip(parts):
    samples = parts[..., 0] + 1j * parts[..., 1]
    head, back = parse_nhgrid(format_nhgrid(samples, ("a", "b"), (0.0, -1.0), (1.0, 1.0)))
    assert head.axes == ("a", "b") and head.sizes == (2, 3) and head.dim == 2
    np.testing.assert_array_equal(back, samples)


def _text(n_values, dim=2, n1=2, n2=2):
    body = " ".join(["1.0"] * n_values)
    return f"NHGRID v1 {dim} a {n1} 0 1 b {n2} 0 1\n{body}\n"


def test_format_errors():
    full = 2 * 2 * 2 * 4
    parse_nhgrid(_text(full))
    with pytest.raises(FormatError):
        parse_nhgrid(_text(full - 2))
    with pytest.raises(FormatError):
        parse_nhgrid(_text(full - 1))
    with pytest.raises(NonSquare):
        parse_nhgrid(_text(2 * 2 * 2 * 3))
    with pytest.raises(GridMismatch):
        parse_nhgrid(_text(full + 6))
    with pytest.raises(GridMismatch):
        parse_nhgrid("NHGRID v1 2 a 1 0 1 b 2 0 1\n")
    with pytest.raises(GridMismatch):
        parse_nhgrid("NHGRID v1 2 a 2 0 1 a 2 0 1\n" + "0 " * 32)
    with pytest.raises(NonSquare):
        parse_nhgrid("NHGRID v1 0 a 2 0 1 b 2 0 1\n")
    with pytest.raises(FormatError):
        parse_nhgrid("GRID v2\n")
    with pytest.raises(FormatError):
        parse_nhgrid("")
    with pytest.raises(FormatError):
        parse_nhgrid(_text(full).replace("1.0", "x", 1))


def test_constant_external_model(tmp_path):
    M = np.array([[1, 2j], [0.5, -1]])
    samples = np.broadcast_to(M, (3, 4, 2, 2))
    path = tmp_path / "c.nhgrid"
    path.write_text(format_nhgrid(samples, ("u", "v"), (0.0, 0.0), (1.0, 2.0)))
    model = load_external_model(path)
    assert model.param_names == ("u", "v")
    np.testing.assert_allclose(model(np.array([0.37, 1.9])), M)
    assert model.preferred_step == {"u": 0.5, "v": 2 / 3}
    with pytest.raises(EvaluationFailure):
        model(np.array([1.5, 0.0]))


def test_sampled_hyperbolic_model_converges(tmp_path):
    hyper = make_model("pseudo_hermitian_hyperbolic")
    errs = []
    for n in (11, 21):
        path = tmp_path / f"h{n}.nhgrid"
        save_external_model(path, hyper, ("lambda", "xi"), (0.0, 0.1), (2 * np.pi, 2.0), (n, n))
        model = load_external_model(path)
        pts = np.random.default_rng(0).uniform((0.0, 0.1), (2 * np.pi, 2.0), size=(200, 2))
        errs.append(max(np.linalg.norm(model(p) - hyper(p)) for p in pts))
    # bilinear interpolation: halving the spacing cuts the error about fourfold
    assert errs[1] < errs[0] / 3


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 64


def test_encode_value():
    assert encode_value(1 + 2j) == [1.0, 2.0]
    assert encode_value(np.eye(2)) == {"shape": [2, 2], "data": [1.0, 0.0, 0.0, 1.0]}
    enc = encode_value(np.array([[1j]]))
    assert enc == {"shape": [1, 1], "data": [[0.0, 1.0]]}
    assert encode_value({"x": np.int64(3), "y": np.bool_(True)}) == {"x": 3, "y": True}


def _records():
    return [ResultRecord((i,), {"a": 0.1 * i}, {"conn": {"a": np.array([[1 + 1j * i]])}}, {"h": 0.0})
            for i in range(3)]


def test_json_schema():
    doc = json.loads(to_json(_records(), "abc", "0.1.0", timestamp="2026-01-01T00:00:00+00:00"))
    assert doc["config_hash"] == "abc" and doc["version"] == "0.1.0"
    assert doc["timestamp"].startswith("2026")
    rec = doc["records"][2]
    assert rec["index"] == [2] and rec["point"] == {"a": 0.2}
    assert rec["quantities"]["conn"]["a"] == {"shape": [1, 1], "data": [[1.0, 2.0]]}
    assert "timestamp" not in json.loads(to_json(_records(), "abc", "0.1.0"))


def test_csv_schema():
    rows = list(csv.DictReader(io.StringIO(to_csv(_records(), "abc"))))
    assert len(rows) == 3
    assert list(rows[0]) == ["config_hash", "index", "point.a", "conn.a.0.0.re", "conn.a.0.0.im"]
    assert rows[1]["conn.a.0.0.im"] == "1.0"
    assert rows[2]["config_hash"] == "abc"
