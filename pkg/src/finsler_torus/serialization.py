"""Portable JSON artifacts.

Floats are written with 17 significant digits so that every value round-trips
exactly, and files are written atomically (temporary file, then rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .envelope import EnvelopeField
from .errors import InvalidArgument
from .geodesics import FinslerChart, chart_from_spec, normalize
from .glue import PipelineResult, TorusMetric
from .norms import norm_from_spec
from .verify import SabotagedMetric

FORMAT = "finsler-torus/1"


def _float(x: float) -> str:
    if not np.isfinite(x):
        raise InvalidArgument(f"cannot serialise non-finite value {x}")
    text = format(float(x), ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


def _emit(obj, out: list, indent: int, level: int):
    pad = "\n" + " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + (pad if indent else "") + json.dumps(str(k)) + ": ")
            _emit(v, out, indent, level + 1)
        out.append(("\n" + " " * (indent * level) if indent else "") + "}")
    elif isinstance(obj, np.ndarray):
        _emit_array(obj, out)
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _emit(v, out, 0, level + 1)
        out.append("]")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(obj))
    elif obj is None:
        out.append("null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise InvalidArgument(f"cannot serialise {type(obj).__name__}")


def _emit_array(arr: np.ndarray, out: list):
    if arr.ndim == 1:
        out.append("[" + ", ".join(_float(v) for v in arr.tolist()) + "]")
        return
    out.append("[")
    for i, sub in enumerate(arr):
        if i:
            out.append(",\n")
        _emit_array(sub, out)
    out.append("]")


def dumps(obj, indent: int = 1) -> str:
    """JSON text with 17-significant-digit floats; arrays are emitted compactly."""
    out: list = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ----------------------------------------------------------------------------
# envelope tables


def envelope_table(F: EnvelopeField) -> dict:
    """``{theta_grid, x_grid, values[theta][x][y]}`` of the full field on its grid."""
    if F.axis is None:
        raise InvalidArgument("field has no tabulation grid")
    return {"theta_grid": F.theta, "x_grid": F.axis, "values": F.grid_values()}


def field_from_table(table: dict, reference) -> EnvelopeField:
    theta = np.asarray(table["theta_grid"], dtype=float)
    axis = np.asarray(table["x_grid"], dtype=float)
    values = np.asarray(table["values"], dtype=float)
    flat = EnvelopeField(reference, theta.size)
    if not np.allclose(theta, flat.theta, rtol=0, atol=1e-15):
        raise InvalidArgument("theta grid is not uniform from 0")
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    base = np.einsum("kc,ijc->kij", flat.ref_covectors, np.stack([X, Y], axis=-1))
    return EnvelopeField(reference, theta.size, axis, values - base, label="F_tilde")


# ----------------------------------------------------------------------------
# torus artifacts


@dataclass
class Artifact:
    path: Path
    data: dict
    metric: TorusMetric
    chart: FinslerChart
    cfg: PipelineConfig


def artifact_dict(result: PipelineResult, spec: dict, table_ref: str) -> dict:
    m = result.metric
    rep = result.report
    return {
        "format": FORMAT,
        "l": m.l,
        "r": m.r,
        "eps": m.eps,
        "symmetric": m.symmetric,
        "base_norm_spec": m.reference.spec(),
        "input_spec": spec,
        "config": result.cfg.to_dict(),
        "escalations": result.escalations,
        "extension_gap": result.gap,
        "enveloping": {
            "distance_like_violation": rep.distance_like_violation,
            "winding_violation": rep.winding_violation,
            "min_turning": rep.min_turning,
            "passed": rep.passed,
        },
        "envelope_table_ref": table_ref,
    }


def save_artifact(result: PipelineResult, spec: dict, out_dir, stem: str = "torus") -> Path:
    """Write ``<stem>.json`` and its envelope table ``<stem>_envelope.json``."""
    out_dir = Path(out_dir)
    table_name = f"{stem}_envelope.json"
    write_json(out_dir / table_name, envelope_table(result.F_tilde))
    return write_json(out_dir / f"{stem}.json", artifact_dict(result, spec, table_name))


def sabotage_artifact(path, out_path, amplitude=0.8, radius=None) -> Path:
    """Copy of an artifact whose norm is multiplied by ``exp(amplitude * bump)`` when loaded."""
    data = read_json(path)
    data["sabotage"] = {"amplitude": amplitude, "radius": radius}
    out_path = Path(out_path)
    table = Path(path).parent / data["envelope_table_ref"]
    if out_path.parent.resolve() != table.parent.resolve():
        data["envelope_table_ref"] = os.path.relpath(table.resolve(), out_path.parent.resolve())
    return write_json(out_path, data)


def load_artifact(path) -> Artifact:
    path = Path(path)
    data = read_json(path)
    if data.get("format") != FORMAT:
        raise InvalidArgument(f"{path} is not a torus artifact")
    reference = norm_from_spec(data["base_norm_spec"])
    table = read_json(path.parent / data["envelope_table_ref"])
    field = field_from_table(table, reference)
    cfg = PipelineConfig.from_dict(data["config"])
    metric = TorusMetric(field, data["eps"], data["r"], data["l"], symmetric=bool(data["symmetric"]))
    if "sabotage" in data:
        # positive control: conformal bump injected into the recovered norm
        metric = SabotagedMetric(metric, **data["sabotage"])
    chart = normalize(chart_from_spec(data["input_spec"]), cfg.p0)
    return Artifact(path, data, metric, chart, cfg)
