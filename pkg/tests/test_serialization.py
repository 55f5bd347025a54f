import json
import os
import stat

import numpy as np
import pytest

from finsler_torus.errors import InvalidArgument
from finsler_torus.serialization import (
    atomic_write,
    dumps,
    envelope_table,
    field_from_table,
    load_artifact,
    read_json,
    sabotage_artifact,
    save_artifact,
)
from finsler_torus.verify import SabotagedMetric


def test_floats_round_trip_exactly():
    vals = np.random.default_rng(0).normal(size=200) * 10.0 ** np.arange(-100, 100)
    back = json.loads(dumps({"v": vals, "x": 0.1, "n": 3, "b": True, "s": "a\"b", "z": None, "l": [1.5, [2, 3]]}))
    assert np.array_equal(np.array(back["v"]), vals)
    assert back["x"] == 0.1 and back["n"] == 3 and back["b"] is True and back["z"] is None
    assert back["l"] == [1.5, [2, 3]]
    assert dumps(1.0).strip() == "1.0"
    with pytest.raises(InvalidArgument):
        dumps({"bad": float("nan")})
    with pytest.raises(InvalidArgument):
        dumps({"bad": object()})


def test_atomic_write_leaves_no_temporaries(tmp_path):
    p = atomic_write(tmp_path / "sub" / "a.json", "{}\n")
    assert p.read_text() == "{}\n"
    assert stat.S_IMODE(os.stat(p).st_mode) == 0o644
    assert os.listdir(tmp_path / "sub") == ["a.json"]


def test_envelope_table_round_trip(small_conformal):
    F = small_conformal.F_tilde
    table = json.loads(dumps(envelope_table(F)))
    G = field_from_table(table, F.reference)
    assert np.max(np.abs(G.correction - F.correction)) < 1e-15
    x = np.array([[0.1, 0.2], [-0.3, 0.05]])
    assert np.max(np.abs(G.values(x) - F.values(x))) < 1e-14


def test_artifact_round_trip(tmp_path, small_conformal):
    spec = {"norm": {"kind": "euclidean"}, "lambda": "0.1*x"}
    path = save_artifact(small_conformal, spec, tmp_path, stem="t")
    data = read_json(path)
    assert data["format"] == "finsler-torus/1" and data["envelope_table_ref"] == "t_envelope.json"
    assert data["l"] == small_conformal.cfg.l and data["enveloping"]["passed"] is True
    art = load_artifact(path)
    x = np.array([[0.1, -0.1], [2.0, 3.0]])
    v = np.array([[1.0, 0.0], [0.3, 0.4]])
    assert np.max(np.abs(art.metric.norm(x, v) - small_conformal.metric.norm(x, v))) < 1e-14
    assert art.chart.norm(x[0], v[0]) == pytest.approx(float(small_conformal.chart.norm(x[0], v[0])), abs=1e-15)


def test_sabotaged_artifact(tmp_path, small_flat):
    path = save_artifact(small_flat, {"norm": {"kind": "euclidean"}}, tmp_path / "a")
    bad = sabotage_artifact(path, tmp_path / "b" / "bad.json")
    art = load_artifact(bad)
    assert isinstance(art.metric, SabotagedMetric)
    assert art.metric.norm(np.zeros(2), np.array([1.0, 0.0])) == pytest.approx(np.exp(0.8), abs=1e-12)


def test_load_rejects_foreign_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(InvalidArgument):
        load_artifact(p)
