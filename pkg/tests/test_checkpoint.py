import json

import numpy as np
import pytest

from hyperising.mps.io import FORMAT, CheckpointError, load_checkpoint, read_header, save_checkpoint
from hyperising.mps.mpo import MatrixProductOperator
from hyperising.mps.mps import MatrixProductState


def test_mps_roundtrip(tmp_path, rng):
    v = rng.normal(size=32) + 1j * rng.normal(size=32)
    psi = MatrixProductState.from_dense(v / np.linalg.norm(v), 5)
    path = tmp_path / "state.npz"
    save_checkpoint(psi, path, {"t": 1.5})
    back = load_checkpoint(path)
    assert isinstance(back, MatrixProductState)
    np.testing.assert_array_equal(back.to_dense(), psi.to_dense())
    assert back.center == psi.center
    assert back.metadata == {"t": 1.5}
    hdr = read_header(path)
    assert hdr["format"] == FORMAT and hdr["kind"] == "mps" and hdr["N"] == 5


def test_mpo_roundtrip(tmp_path):
    W = MatrixProductOperator.local("x", 1, 4)
    path = tmp_path / "op.npz"
    save_checkpoint(W, path)
    back = load_checkpoint(path)
    assert isinstance(back, MatrixProductOperator)
    np.testing.assert_array_equal(back.to_dense(), W.to_dense())


def _rewrite(path, header=None, arrays=None):
    with np.load(path) as data:
        content = {k: data[k] for k in data.files}
    if header is not None:
        content["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    content.update(arrays or {})
    np.savez(path, **content)


def test_corrupted_checkpoints_rejected(tmp_path):
    psi = MatrixProductState.all_up(3)
    path = tmp_path / "s.npz"
    save_checkpoint(psi, path)
    hdr = read_header(path)
    _rewrite(path, header=dict(hdr, version=99))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    save_checkpoint(psi, path)
    _rewrite(path, arrays={"t0001": np.zeros((1, 2, 2))})
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    save_checkpoint(psi, path)
    _rewrite(path, header=dict(hdr, format="other"))
    with pytest.raises(CheckpointError):
        read_header(path)


def test_unsupported_object(tmp_path):
    with pytest.raises(TypeError):
        save_checkpoint(np.zeros(3), tmp_path / "x.npz")
