"""Checkpoints for MPS and MPO tensors.

A checkpoint is an ``.npz`` archive holding one array per site plus a JSON
header with the format version, object kind and every tensor shape. Loading
checks the header against the stored arrays.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .mpo import MatrixProductOperator
from .mps import MatrixProductState

FORMAT = "hyperising-tn"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(obj, path, metadata: dict | None = None) -> None:
    """Write an MPS or MPO atomically to ``path`` (``.npz``)."""
    if isinstance(obj, MatrixProductOperator):
        kind, tensors, center = "mpo", obj.tensors, obj.vec.center
    elif isinstance(obj, MatrixProductState):
        kind, tensors, center = "mps", obj.tensors, obj.center
    else:
        raise TypeError(f"cannot checkpoint {type(obj).__name__}")
    header = {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "N": len(tensors),
        "center": center,
        "shapes": [list(t.shape) for t in tensors],
        "metadata": metadata or {},
    }
    arrays = {f"t{i:04d}": np.asarray(t) for i, t in enumerate(tensors)}
    arrays["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".npz")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_header(path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        return _header(data)


def _header(data) -> dict:
    if "header" not in data:
        raise CheckpointError("missing header")
    header = json.loads(bytes(data["header"]).decode())
    if header.get("format") != FORMAT:
        raise CheckpointError(f"not a {FORMAT} checkpoint")
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    return header


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns an MPS or MPO."""
    with np.load(path, allow_pickle=False) as data:
        header = _header(data)
        tensors = []
        for i, shape in enumerate(header["shapes"]):
            t = data[f"t{i:04d}"]
            if list(t.shape) != shape:
                raise CheckpointError(f"tensor {i} has shape {t.shape}, header says {shape}")
            tensors.append(t)
    if header["kind"] == "mpo":
        out = MatrixProductOperator(tensors, center=header["center"])
    elif header["kind"] == "mps":
        out = MatrixProductState(tensors, center=header["center"])
    else:
        raise CheckpointError(f"unknown kind {header['kind']!r}")
    out.metadata = header["metadata"]
    return out
