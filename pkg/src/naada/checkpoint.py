"""Versioned binary parameter container.

Layout (all integers little-endian):

    bytes 0..7    magic b"NAADACKP"
    bytes 8..11   format version (u32)
    bytes 12..19  header length in bytes (u64)
    header        UTF-8 JSON: {"spec": {...}, "tensors": [...]}
    payload       concatenated raw little-endian arrays

Each tensor entry records name, dtype ("<f4"/"<f8"), shape, offset into
the payload and byte count. Parameters and batchnorm running buffers
are stored together; shapes are re-validated on load against a network
freshly built from the recorded spec.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from naada.network import NetworkSpec, NetworkState, init_network

MAGIC = b"NAADACKP"
VERSION = 1

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


class CheckpointError(ValueError):
    pass


def _entries(state: NetworkState):
    for name, t in state.named_parameters().items():
        yield name, t.data
    for name, buf in state.named_buffers().items():
        yield name, buf


def save_checkpoint(state: NetworkState, path):
    tensors = []
    payload = bytearray()
    for name, arr in _entries(state):
        arr = np.asarray(arr)
        tag = "<f8" if arr.dtype == np.float64 else "<f4"
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes()
        tensors.append(
            {
                "name": name,
                "dtype": tag,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(raw),
            }
        )
        payload.extend(raw)
    header = json.dumps({"spec": state.spec.to_dict(), "tensors": tensors}).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload)


def load_checkpoint(path, dtype=np.float32) -> NetworkState:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode())
        payload = fh.read()

    state = init_network(NetworkSpec.from_dict(header["spec"]), seed=0, dtype=dtype)
    params = state.named_parameters()
    buffers = state.named_buffers()
    seen = set()
    for entry in header["tensors"]:
        name = entry["name"]
        raw = payload[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"])
        if name in params:
            target = params[name].data
        elif name in buffers:
            target = buffers[name]
        else:
            raise CheckpointError(f"{path}: unknown tensor {name!r}")
        if tuple(target.shape) != tuple(entry["shape"]):
            raise CheckpointError(
                f"{path}: {name} shape {entry['shape']} != expected {list(target.shape)}"
            )
        target[...] = arr.astype(target.dtype)
        seen.add(name)
    missing = (set(params) | set(buffers)) - seen
    if missing:
        raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")
    return state
