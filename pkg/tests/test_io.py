import json

import numpy as np
import pytest

from modpulse.io import (ConfigError, OutputDir, RunConfig, config_from_dict, load_config, sha256,
                         write_csv, write_json)


def test_defaults_round_trip():
    cfg = config_from_dict({})
    assert cfg == RunConfig()
    again = config_from_dict(cfg.to_dict())
    assert again == cfg


@pytest.mark.parametrize("doc,field", [
    ({"medium": {"gamma": 2}}, "medium.gamma"),
    ({"medium": {"rho": []}}, "medium.rho"),
    ({"medium": {"rho": [1, "a"]}}, "medium.rho[1]"),
    ({"selection": {"l0": 0.7}}, "selection.l0"),
    ({"selection": {"N": 1.5}}, "selection.N"),
    ({"discretization": {"dt_factor": 1.0}}, "discretization.dt_factor"),
    ({"discretization": {"K": 2}}, "discretization.K"),
    ({"outputs": {"formats": ["xml"]}}, "outputs.formats"),
    ({"outputs": {"colour": 1}}, "outputs"),
    ({"extra": 1}, "config"),
    ({"version": 9}, "version"),
])
def test_invalid_fields_named(doc, field):
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        config_from_dict(doc)


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "none.json")


def test_json_writer_handles_numpy(tmp_path):
    p = write_json(tmp_path / "a.json", {"z": 1 + 2j, "v": np.arange(3), "b": np.bool_(True),
                                         "f": np.float64(0.5)})
    d = json.loads(p.read_text())
    assert d == {"b": True, "f": 0.5, "v": [0, 1, 2], "z": [1.0, 2.0]}


def test_csv_writer_round_trips_floats(tmp_path):
    vals = [0.1, 1 / 3, -2.5e-17]
    p = write_csv(tmp_path / "a.csv", ["x"], [(v,) for v in vals])
    lines = p.read_text().splitlines()
    assert lines[0] == "x"
    assert [float(s) for s in lines[1:]] == vals


def test_output_dir_is_lazy_and_manifest_hashes(tmp_path):
    d = tmp_path / "out"
    out = OutputDir(str(d), ["csv"])
    out.json("skip.json", {})
    assert not d.exists()
    out.csv("a.csv", ["x"], [(1.0,)])
    m = out.manifest({"status": "complete"})
    assert [e["file"] for e in m["files"]] == ["a.csv"]
    assert m["files"][0]["sha256"] == sha256(d / "a.csv")
    assert json.loads((d / "manifest.json").read_text())["status"] == "complete"
