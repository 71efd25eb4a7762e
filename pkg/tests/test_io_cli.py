import json

import numpy as np
import pytest

from uniconvex import PreconditionError
from uniconvex.cli import run
from uniconvex.fixtures import interval
from uniconvex.io import dumps, jsonable, load_function, write_json


def test_jsonable_handles_numpy_and_nonfinite():
    out = jsonable({"a": np.float64(np.inf), "b": np.arange(2), "c": (np.nan, np.int64(3))})
    assert out == {"a": "inf", "b": [0, 1], "c": ["nan", 3]}
    assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')


def test_function_roundtrip(tmp_path):
    f = interval(step=0.25)
    write_json(tmp_path / "f.json", f)
    g = load_function(tmp_path / "f.json")
    assert np.array_equal(f.values, g.values) and np.allclose(f.coords, g.coords)
    assert np.array_equal(load_function({"fixture": "interval", "params": {"step": 0.25}}).values,
                          f.values)


def test_bad_specs(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ValueError):
        load_function(tmp_path / "bad.json")
    with pytest.raises(PreconditionError):
        load_function({"values": [1]})


@pytest.fixture
def fn_file(tmp_path):
    p = tmp_path / "ex26.json"
    p.write_text(json.dumps({"fixture": "ex26", "params": {"step": 0.0625, "lo": -1, "hi": 1}}))
    return str(p)


def test_cli_modulus_stdout(fn_file, capsys):
    assert run(["modulus", "--fn", fn_file, "--eps", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["delta"] == pytest.approx(1 / 36)


def test_cli_exit_codes(fn_file, tmp_path, capsys):
    assert run(["modulus", "--fn", fn_file, "--eps", "-1"]) == 2
    assert run(["modulus", "--fn", str(tmp_path / "missing.json"), "--eps", "1"]) == 4
    assert run(["modulus", "--bogus"]) == 4
    assert run(["tree", "--eps", "1"]) == 4
    assert run(["dent", "--fn", fn_file, "--eps", "0.01", "--cap", "1"]) == 0
    assert run(["dc-approx", "--fn", fn_file, "--eps", "0.2", "--cap", "1"]) == 3


def test_cli_report_is_deterministic(fn_file, tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        assert run(["envelope", "--fn", fn_file, "--report", str(d)]) == 0
        assert (d / "envelope.svg").exists()
        man = json.loads((d / "manifest.json").read_text())
        assert man["subcommand"] == "envelope" and "fn" in man["inputs"]
        outs.append((d / "envelope.json").read_bytes())
    assert outs[0] == outs[1]


def test_cli_transform_and_tree(tmp_path, capsys):
    p = tmp_path / "interval.json"
    p.write_text(json.dumps({"fixture": "interval"}))
    assert run(["tree", "--fn", str(p), "--eps", "0.5"]) == 0
    assert json.loads(capsys.readouterr().out)["height"] == 2
    assert run(["transform", "--kind", "exp", "--fn", str(p), "--delta", "0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["values"][-1] == pytest.approx(9.0)
    assert run(["transform", "--kind", "nope", "--fn", str(p)]) == 4


def test_cli_report_file_and_extras(tmp_path):
    p = tmp_path / "l1.json"
    p.write_text(json.dumps({"fixture": "l1_ball", "params": {"step": 0.25}}))
    report = tmp_path / "out" / "mu.json"
    assert run(["swc", "--fn", str(p), "--eps-list", "0.5,1,2", "--budget", "200",
                "--report", str(report)]) == 0
    man = json.loads((report.parent / "mu.manifest.json").read_text())
    assert set(man["files"]) == {"mu.json", "mu.brackets_0.svg"}
    assert json.loads(report.read_text())["mu3"] is None

    q = tmp_path / "ex.json"
    q.write_text(json.dumps({"fixture": "ex26", "params": {"step": 0.0625, "lo": -1, "hi": 1}}))
    g, dc = tmp_path / "g.json", tmp_path / "dc.json"
    assert run(["dc-approx", "--fn", str(q), "--eps", "0.2", "--out", str(g),
                "--decomp", str(dc), "--report", str(tmp_path / "dc")]) == 0
    assert "values" in json.loads(g.read_text()) and "u" in json.loads(dc.read_text())
