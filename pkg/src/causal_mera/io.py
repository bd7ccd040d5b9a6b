"""JSON and CSV formats shared by the command line tools.

Tensors are ``{"shape", "labels", "re", "im"}`` with row-major flattened parts.
Every reader names the offending field when a document is malformed.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .channel import CausalRelation, QuantumChannel
from .mera import MeraNetwork, MeraSpec
from .tensor_core import DenseTensor, IsometryMap


class FormatError(ValueError):
    pass


def _field(data: dict, name: str, where: str):
    if not isinstance(data, dict) or name not in data:
        raise FormatError(f"{where}: missing field {name!r}")
    return data[name]


def tensor_to_json(t: DenseTensor) -> dict:
    flat = np.asarray(t.data, dtype=complex).reshape(-1)
    return {
        "shape": list(t.shape),
        "labels": [str(l) for l in t.labels],
        "re": flat.real.tolist(),
        "im": flat.imag.tolist(),
    }


def tensor_from_json(data: dict, where: str = "tensor") -> DenseTensor:
    shape = _field(data, "shape", where)
    labels = _field(data, "labels", where)
    re = np.asarray(_field(data, "re", where), dtype=float)
    im = np.asarray(data.get("im", [0.0] * re.size), dtype=float)
    size = int(np.prod(shape)) if shape else 1
    if re.size != size or im.size != size:
        raise FormatError(f"{where}: field 're'/'im' has {re.size} entries, shape needs {size}")
    if len(labels) != len(shape):
        raise FormatError(f"{where}: field 'labels' does not match 'shape'")
    return DenseTensor((re + 1j * im).reshape(shape), labels)


def matrix_to_json(m) -> dict:
    return tensor_to_json(DenseTensor(np.asarray(m, dtype=complex), ["out", "in"]))


def matrix_from_json(data: dict, where: str = "matrix") -> np.ndarray:
    t = tensor_from_json(data, where)
    if len(t.shape) != 2:
        raise FormatError(f"{where}: field 'shape' must be two-dimensional")
    return t.data


def _layout_to_json(layout) -> list:
    return [[str(v), int(d)] for v, d in layout]


def _layout_from_json(data, where: str) -> tuple:
    try:
        return tuple((str(v), int(d)) for v, d in data)
    except (TypeError, ValueError) as err:
        raise FormatError(f"{where}: malformed layout ({err})") from None


def isometry_to_json(w: IsometryMap) -> dict:
    return {
        "in_layout": _layout_to_json(w.in_layout),
        "out_layout": _layout_to_json(w.out_layout),
        "matrix": matrix_to_json(w.matrix),
    }


def isometry_from_json(data: dict) -> IsometryMap:
    return IsometryMap(
        matrix_from_json(_field(data, "matrix", "isometry"), "isometry.matrix"),
        _layout_from_json(_field(data, "in_layout", "isometry"), "isometry.in_layout"),
        _layout_from_json(_field(data, "out_layout", "isometry"), "isometry.out_layout"),
    )


def channel_to_json(c: QuantumChannel) -> dict:
    return {
        "in_layout": _layout_to_json(c.in_layout),
        "out_layout": _layout_to_json(c.out_layout),
        "kraus": [matrix_to_json(k) for k in c.kraus],
    }


def channel_from_json(data: dict) -> QuantumChannel:
    ks = [matrix_from_json(k, f"channel.kraus[{i}]") for i, k in enumerate(_field(data, "kraus", "channel"))]
    return QuantumChannel(
        ks,
        _layout_from_json(_field(data, "in_layout", "channel"), "channel.in_layout"),
        _layout_from_json(_field(data, "out_layout", "channel"), "channel.out_layout"),
    )


def relation_to_json(r: CausalRelation) -> dict:
    return {
        "inputs": _layout_to_json(r.inputs),
        "outputs": _layout_to_json(r.outputs),
        "allowed": [[str(i), str(o)] for i, o in r.sorted_pairs()],
    }


def relation_from_json(data: dict) -> CausalRelation:
    allowed = _field(data, "allowed", "relation")
    return CausalRelation(
        _layout_from_json(_field(data, "inputs", "relation"), "relation.inputs"),
        _layout_from_json(_field(data, "outputs", "relation"), "relation.outputs"),
        frozenset((str(i), str(o)) for i, o in allowed),
    )


def spec_to_json(spec: MeraSpec) -> dict:
    return {"kind": spec.kind, "n_coarse": spec.n_coarse, "chi": spec.chi, "layers": spec.layers}


def spec_from_json(data: dict) -> MeraSpec:
    return MeraSpec(
        str(_field(data, "kind", "spec")),
        int(_field(data, "n_coarse", "spec")),
        int(data.get("chi", 2)),
        int(data.get("layers", 1)),
    )


def network_to_json(net: MeraNetwork) -> dict:
    return {
        "spec": spec_to_json(net.spec),
        "steps": [
            {"isometries": [matrix_to_json(w) for w in ws], "disentanglers": [matrix_to_json(u) for u in us]}
            for ws, us in net.steps
        ],
        "top": tensor_to_json(DenseTensor(net.top, ["top"])),
    }


def network_from_json(data: dict) -> MeraNetwork:
    spec = spec_from_json(_field(data, "spec", "network"))
    steps = []
    for level, step in enumerate(_field(data, "steps", "network")):
        ws = [matrix_from_json(w, f"steps[{level}].isometries") for w in _field(step, "isometries", f"steps[{level}]")]
        us = [
            matrix_from_json(u, f"steps[{level}].disentanglers")
            for u in _field(step, "disentanglers", f"steps[{level}]")
        ]
        steps.append((ws, us))
    top = tensor_from_json(_field(data, "top", "network"), "network.top").data
    return MeraNetwork(spec, steps, top)


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: invalid JSON ({err})") from None


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
