"""Versioned JSON checkpoints with base64-encoded little-endian arrays."""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .network import ScIpnn
from .report import atomic_write_text

SCHEMA_VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_array(arr, dtype: str = "<f8") -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype=dtype).tobytes()).decode("ascii")


def decode_array(text: str, dtype: str = "<f8", count: int | None = None) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(text.encode("ascii"), validate=True), dtype=dtype)
    if count is not None and arr.size != count:
        raise CheckpointError(f"array holds {arr.size} values, expected {count}")
    return arr.astype(dtype[1:] if dtype[0] in "<>|" else dtype).copy()


@dataclass(eq=False)
class Checkpoint:
    net: ScIpnn
    mask: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


def to_document(ckpt: Checkpoint) -> dict:
    net = ckpt.net
    layout = net.layout
    layers = []
    for i, (sv, su) in enumerate(layout.mesh_slices):
        entry = {
            "in_dim": net.dims[i],
            "out_dim": net.dims[i + 1],
            "mesh_v_phases": encode_array(net.params[sv]),
            "mesh_u_phases": encode_array(net.params[su]),
            "sigma_params": encode_array(net.params[layout.sigma_slices[i]]),
        }
        if ckpt.mask is not None:
            entry["mesh_v_mask"] = encode_array(ckpt.mask[sv], "|u1")
            entry["mesh_u_mask"] = encode_array(ckpt.mask[su], "|u1")
        layers.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "array_encoding": "base64 little-endian float64; masks base64 uint8",
        "architecture": list(net.dims),
        "class_count": net.class_count,
        "activation": {"kind": net.activation, "bias": encode_array(net.biases)},
        "has_mask": ckpt.mask is not None,
        "layers": layers,
        "metadata": ckpt.metadata,
    }


def from_document(doc: dict) -> Checkpoint:
    try:
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise CheckpointError(f"unsupported schema_version {doc.get('schema_version')!r}")
        dims = tuple(int(d) for d in doc["architecture"])
        shell = ScIpnn(dims, int(doc["class_count"]), np.zeros(_param_count(dims)), doc["activation"]["kind"])
        layout = shell.layout
        params = shell.params
        has_mask = bool(doc["has_mask"])
        mask = np.zeros(layout.n_phases, dtype=bool) if has_mask else None
        if len(doc["layers"]) != layout.n_layers:
            raise CheckpointError("layer count does not match architecture")
        for i, entry in enumerate(doc["layers"]):
            if (entry["in_dim"], entry["out_dim"]) != (dims[i], dims[i + 1]):
                raise CheckpointError(f"layer {i} dims disagree with architecture")
            sv, su = layout.mesh_slices[i]
            params[sv] = decode_array(entry["mesh_v_phases"], count=sv.stop - sv.start)
            params[su] = decode_array(entry["mesh_u_phases"], count=su.stop - su.start)
            ss = layout.sigma_slices[i]
            params[ss] = decode_array(entry["sigma_params"], count=ss.stop - ss.start)
            if has_mask:
                mask[sv] = decode_array(entry["mesh_v_mask"], "|u1", sv.stop - sv.start).astype(bool)
                mask[su] = decode_array(entry["mesh_u_mask"], "|u1", su.stop - su.start).astype(bool)
        bs = layout.bias_section
        params[bs] = decode_array(doc["activation"]["bias"], count=bs.stop - bs.start)
        net = ScIpnn(dims, shell.class_count, params, shell.activation)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    return Checkpoint(net, mask, dict(doc.get("metadata", {})))


def _param_count(dims) -> int:
    from .network import ParamLayout

    return ParamLayout(tuple(dims)).size


def dumps(ckpt: Checkpoint) -> str:
    return json.dumps(to_document(ckpt), indent=2, sort_keys=True) + "\n"


def save(path, ckpt: Checkpoint) -> None:
    atomic_write_text(path, dumps(ckpt))


def load(path) -> Checkpoint:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: not valid JSON: {exc}") from exc
    return from_document(doc)
