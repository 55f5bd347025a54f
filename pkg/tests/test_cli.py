import csv
import json

import pytest

from finsler_torus.cli import main

SMALL_FLAGS = ["--n-theta", "64", "--n-x", "49"]


def _spec(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def flat_build(tmp_path_factory):
    d = tmp_path_factory.mktemp("flat")
    spec = _spec(d, "flat.json", {"norm": {"kind": "euclidean"}})
    assert main(["--quiet", "--out-dir", str(d), "build", spec, *SMALL_FLAGS]) == 0
    return d


def test_check_norm_exit_codes(tmp_path):
    assert main(["--quiet", "check-norm", _spec(tmp_path, "e.json", {"kind": "euclidean"})]) == 0
    quartic = {"kind": "tabulated", "support": [(c**4 + s**4) ** 0.25 for c, s in _circle(256)]}
    assert main(["--quiet", "check-norm", _spec(tmp_path, "q.json", quartic)]) == 1
    assert main(["--quiet", "check-norm", _spec(tmp_path, "bad.json", "{not json")]) == 2


def _circle(n):
    import numpy as np

    t = np.arange(n) * 2 * np.pi / n
    return zip(np.cos(t), np.sin(t))


def test_build_writes_artifact_and_manifest(flat_build):
    manifest = json.loads((flat_build / "torus_manifest.json").read_text())
    assert manifest["config"]["r"] == 8.0 and manifest["config"]["l"] == 9
    for name in manifest["artifacts"]:
        json.loads((flat_build / name).read_text())


def test_build_rejects_small_r(tmp_path):
    spec = _spec(tmp_path, "f.json", {"norm": {"kind": "euclidean"}})
    assert main(["--quiet", "--out-dir", str(tmp_path), "build", spec, "--r", "0.1"]) == 2


def test_flags_override_spec_config(tmp_path):
    spec = _spec(tmp_path, "f.json", {"norm": {"kind": "euclidean"}, "config": {"r": 4.0, "n_theta": 32, "n_x": 17}})
    assert main(["--quiet", "--out-dir", str(tmp_path), "build", spec, "--r", "6"]) == 0
    cfg = json.loads((tmp_path / "torus_manifest.json").read_text())["config"]
    assert cfg["r"] == 6.0 and cfg["l"] == 7 and cfg["n_theta"] == 32


def test_verify_flat_and_sabotaged(flat_build, tmp_path):
    from finsler_torus.serialization import sabotage_artifact

    art = str(flat_build / "torus.json")
    assert main(["--quiet", "--out-dir", str(flat_build), "verify", art, "--geodesics", "10", "--curves", "5", "--dt", "0.05"]) == 0
    report = json.loads((flat_build / "torus_report.json").read_text())
    assert report["passed"] is True
    bad = sabotage_artifact(art, tmp_path / "bad.json")
    code = main(["--quiet", "--out-dir", str(tmp_path), "verify", str(bad), "--geodesics", "8", "--curves", "5", "--dt", "0.02"])
    assert code == 1
    witnesses = json.loads((tmp_path / "bad_report.json").read_text())["entries"][0]["witnesses"]
    assert witnesses and witnesses[0]["conjugate_time"] > 0


def test_plot_data_counts(flat_build):
    art = str(flat_build / "torus.json")
    out = str(flat_build)
    assert main(["--quiet", "--out-dir", out, "plot-data", art, "indicatrices"]) == 0
    assert len(_rows(flat_build / "torus_indicatrices.csv")) == 1 + 81 * 64
    assert main(["--quiet", "--out-dir", out, "plot-data", art, "envelope"]) == 0
    assert len(_rows(flat_build / "torus_envelope.csv")) == 1 + 49 * 49
    assert main(["--quiet", "--out-dir", out, "plot-data", art, "cosphere"]) == 0
    assert len(_rows(flat_build / "torus_cosphere.csv")) == 1 + 81 * 64
    assert main(["--quiet", "--out-dir", out, "plot-data", art, "geodesics", "--length", "1", "--dt", "0.1"]) == 0
    assert len(_rows(flat_build / "torus_geodesics.csv")) == 1 + 16 * 11
    with pytest.raises(SystemExit) as exc:
        main(["plot-data", art, "spectrum"])
    assert exc.value.code == 2


def test_missing_artifact_is_usage_error(tmp_path):
    assert main(["--quiet", "verify", str(tmp_path / "nope.json")]) == 2


def test_seed_from_environment(monkeypatch, flat_build):
    monkeypatch.setenv("FINSLER_SEED", "x")
    assert main(["--quiet", "--out-dir", str(flat_build), "verify", str(flat_build / "torus.json"), "--geodesics", "2"]) == 2
