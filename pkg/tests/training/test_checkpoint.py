import json
import struct

import numpy as np
import pytest

from src.model import init
from src.training import Checkpoint, TrainConfig, dumps, load, loads, save
from src.training.checkpoint import MAGIC
from src.utils.errors import CheckpointCorruptError, CheckpointVersionError


def _checkpoint(latent_dim=2, dtype=np.float32):
    config = TrainConfig(latent_dim=latent_dim, mode="targeted", beta=0.1, epochs=1)
    state = init(latent_dim, "targeted", beta=0.1, seed=3, dtype=dtype)
    history = [{"epoch": 1, "total": 210.5, "recon": 200.25, "kl": 10.25}]
    return Checkpoint(state=state, config=config, history=history)


def _manifest(data):
    length, = struct.unpack("<Q", data[len(MAGIC):len(MAGIC) + 8])
    return json.loads(data[len(MAGIC) + 8:len(MAGIC) + 8 + length]), len(MAGIC) + 8 + length


def test_save_load_round_trip_is_bit_exact(tmp_path):
    original = _checkpoint()
    path = str(tmp_path / "model.ckpt")
    save(original, path)
    restored = load(path)
    for name, value in original.state.params.items():
        np.testing.assert_array_equal(restored.state.params[name], value)
    assert restored.config == original.config
    assert restored.history == original.history
    assert restored.state.beta == 0.1 and restored.state.mode == "targeted"


def test_save_load_save_is_byte_identical():
    data = dumps(_checkpoint())
    assert dumps(loads(data)) == data


def test_float64_models_are_stored_as_float32():
    restored = loads(dumps(_checkpoint(dtype=np.float64)))
    assert restored.state.dtype == np.float32


def test_manifest_layout():
    data = dumps(_checkpoint(latent_dim=3))
    assert data.startswith(MAGIC)
    manifest, start = _manifest(data)
    assert manifest["latent_dim"] == 3
    assert manifest["format_version"] == 1
    assert manifest["blob_dtype"] == "<f4"
    total = sum(entry["count"] for entry in manifest["tensors"])
    assert len(data) - start == 4 * total


def test_latent_dim_is_reported():
    assert loads(dumps(_checkpoint(latent_dim=3))).state.latent_dim == 3


def test_truncated_file_is_corrupt():
    data = dumps(_checkpoint())
    for cut in (4, len(MAGIC) + 20, len(data) - 3):
        with pytest.raises(CheckpointCorruptError):
            loads(data[:cut])


def test_bad_magic_is_corrupt():
    data = dumps(_checkpoint())
    with pytest.raises(CheckpointCorruptError):
        loads(b"NOTACKPT" + data[len(MAGIC):])


def _rewrite(data, change):
    manifest, start = _manifest(data)
    change(manifest)
    header = json.dumps(manifest, sort_keys=True, indent=2).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header)) + header + data[start:]


def test_version_mismatch():
    data = _rewrite(dumps(_checkpoint()), lambda m: m.update(format_version=2))
    with pytest.raises(CheckpointVersionError):
        loads(data)


def test_shape_mismatch_against_manifest():
    def shrink(manifest):
        manifest["latent_dim"] = 3
    with pytest.raises(CheckpointCorruptError):
        loads(_rewrite(dumps(_checkpoint()), shrink))


def _drop_count(manifest):
    del manifest["tensors"][0]["count"]


def _offset_past_blob(manifest):
    manifest["tensors"][-1]["offset"] += 10 ** 6


def _negative_offset(manifest):
    manifest["tensors"][0]["offset"] = -5


@pytest.mark.parametrize("change", [
    lambda m: m.pop("mode"),
    lambda m: m.pop("config"),
    lambda m: m.pop("history"),
    lambda m: m.update(tensors=None),
    lambda m: m.update(latent_dim="two"),
    _drop_count,
    _offset_past_blob,
    _negative_offset,
])
def test_malformed_manifest_is_corrupt(change):
    with pytest.raises(CheckpointCorruptError):
        loads(_rewrite(dumps(_checkpoint()), change))


def test_manifest_must_be_an_object():
    header = json.dumps([1, 2, 3]).encode("utf-8")
    with pytest.raises(CheckpointCorruptError):
        loads(MAGIC + struct.pack("<Q", len(header)) + header)
