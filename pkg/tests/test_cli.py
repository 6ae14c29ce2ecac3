import csv
import io
import json

import numpy as np
import pytest

from nhberry.cli import main, parse_config, run, serialize_config
from nhberry.errors import ParseError, ValidationError
from nhberry.io import config_hash

SCAN = """
command: connection
kind: LR
grid: {axes: [lambda, xi], min: [0, 0.1], max: [6.283185307179586, 2.0], sizes: [N, N], periodic: [true, false]}
format: csv
"""


def _write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_defaults_follow_model():
    cfg = parse_config("command: holonomy")
    assert cfg.model == "pseudo_hermitian_hyperbolic" and cfg.kind == "CBC" and cfg.bands == (0,)
    assert cfg.grid.axes == ("lambda", "xi") and cfg.grid.sizes == (51, 51)
    assert cfg.path.closed and cfg.path.points == 401
    q = parse_config("command: chern\nmodel: qwz\nmodel_params: {m: 1}")
    assert q.grid.periodic == (True, True) and q.grid.sizes == (64, 64)


@pytest.mark.parametrize("text, field", [
    ("command: chern\nbands: [5]", "band"),
    ("command: chern\nbands: [0, 0]", "band"),
    ("command: connection\ngrid: {axes: [a, b], min: [0, 0], max: [1, 1], sizes: [3, 3]}", "grid.axes"),
    ("command: chern\nfrobnicate: 1", "frobnicate"),
    ("command: launch", "command"),
    ("command: chern\nmodel: qwz\nmodel_params: {l: 1}", "model_params"),
    ("command: connection\ntransform: {type: shear}", "transform.type"),
    ("command: verify\nchecks: [14]", "checks"),
    ("command: chern\nmodel: pseudo_hermitian_cartesian", "grid"),
])
def test_validation_errors(text, field):
    with pytest.raises(ValidationError) as err:
        parse_config(text)
    assert err.value.field == field
    assert err.value.exit_code == 2


def test_parse_error_reports_line():
    with pytest.raises(ParseError) as err:
        parse_config("command: chern\nmodel: qwz\ngrid: {axes: [kx\n")
    assert err.value.line is not None and err.value.line >= 3
    with pytest.raises(ParseError):
        parse_config("- just\n- a list\n")


def test_serialize_round_trip():
    cfg = parse_config("command: holonomy\nkind: LR\ntransform: {type: random-gl, seed: 3, log_scale: 0.5}")
    assert parse_config(serialize_config(cfg)) == cfg


def test_run_is_deterministic_without_timestamp():
    cfg = parse_config("command: holonomy\nkind: LR\npath: {start: [0, 1], stop: [6.283185307179586, 1], points: 101}")
    a, b = run(cfg, 1, timestamp=False), run(cfg, 1, timestamp=False)
    assert a == b and a[0] == 0
    doc = json.loads(a[1])
    re, im = doc["records"][0]["quantities"]["holonomy"]["phase"]
    assert re == pytest.approx(-2 * np.pi * np.sinh(0.5) ** 2, abs=1e-3)


def test_output_location_does_not_change_hash():
    a = parse_config("command: chern\nmodel: qwz\noutput: x.json")
    b = parse_config("command: chern\nmodel: qwz\nworkers: 3")
    assert config_hash(a.hashable()) == config_hash(b.hashable())


def test_full_scan_rows_and_parallel_equivalence():
    cfg = parse_config(SCAN.replace("N", "101"))
    code, serial = run(cfg, 1)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(serial)))
    assert len(rows) == 101 * 101
    assert rows[0]["index"] == "0/0" and rows[-1]["index"] == "100/100"
    code, parallel = run(parse_config(SCAN.replace("N", "21")), 2)
    assert parallel == run(parse_config(SCAN.replace("N", "21")), 1)[1]


def test_chern_via_main(tmp_path, capsys):
    cfg = _write(tmp_path, "command: chern\nmodel: qwz\nmodel_params: {m: 1}\nkind: LR\n"
                 "grid: {axes: [kx, ky], min: [0, 0], max: [6.283185307179586, 6.283185307179586], "
                 "sizes: [24, 24], periodic: [true, true]}")
    out = tmp_path / "res.json"
    assert main(["--config", cfg, "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["records"][0]["quantities"]["chern"]["integer"] == -1


def test_exit_code_for_failed_check(tmp_path, capsys):
    assert main(["--config", _write(tmp_path, "command: verify\nchecks: [2]")]) == 1
    assert main(["--config", _write(tmp_path, "command: verify\nchecks: [1]", "ok.yaml")]) == 0


def test_exit_code_for_bad_config(tmp_path, capsys):
    assert main(["--config", _write(tmp_path, "command: chern\nbands: [5]")]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["field"] == "band" and err["exit_code"] == 2
    assert main(["--config", str(tmp_path / "missing.yaml")]) == 2


def test_exit_code_for_numerical_failure(tmp_path, capsys):
    # the straight path crosses the exceptional point at t = x = 1
    cfg = _write(tmp_path, "command: holonomy\nmodel: pseudo_hermitian_cartesian\nkind: LR\n"
                 "path: {start: [1, 0, 0], stop: [1, 2, 0], points: 401, closed: false}")
    assert main(["--config", cfg]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 3


def test_external_model_run(tmp_path):
    from nhberry.io import save_external_model
    from nhberry.models import make_model
    grid_file = tmp_path / "h.nhgrid"
    save_external_model(grid_file, make_model("pseudo_hermitian_hyperbolic"), ("lambda", "xi"),
                        (0.0, 0.5), (2 * np.pi, 1.5), (41, 21))
    cfg = parse_config(f"command: connection\nkind: LR\nmodel_file: {grid_file}\n"
                       "grid: {axes: [lambda, xi], min: [1, 0.8], max: [2, 1.2], sizes: [2, 2]}")
    code, text = run(cfg, 1, timestamp=False)
    assert code == 0
    assert len(json.loads(text)["records"]) == 4
