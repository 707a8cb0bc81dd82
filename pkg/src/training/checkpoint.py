# src/training/checkpoint.py
"""Checkpoint file: magic, little-endian u64 manifest length, JSON manifest, float32 blob.

The blob holds every parameter tensor back to back, little-endian float32, in manifest
order.
"""
import json
import struct
from collections import OrderedDict

import numpy as np

from ..model import ModelState, parameter_shapes
from ..utils.errors import CheckpointCorruptError, CheckpointVersionError, TargetedVAEError
from .trainer import Checkpoint, TrainConfig

MAGIC = b"TVAECKPT"
FORMAT_VERSION = 1
BLOB_DTYPE = np.dtype("<f4")


def dumps(checkpoint: Checkpoint) -> bytes:
    state = checkpoint.state
    entries, chunks, offset = [], [], 0
    for name, value in state.params.items():
        entries.append({"name": name, "shape": list(value.shape), "offset": offset,
                        "count": int(value.size)})
        chunks.append(np.ascontiguousarray(value, dtype=BLOB_DTYPE).tobytes())
        offset += int(value.size)
    manifest = {
        "format_version": FORMAT_VERSION,
        "latent_dim": state.latent_dim,
        "mode": state.mode,
        "beta": float(state.beta),
        "reparameterization": state.reparameterization,
        "blob_dtype": BLOB_DTYPE.str,
        "tensors": entries,
        "config": checkpoint.config.to_dict(),
        "history": checkpoint.history,
    }
    header = json.dumps(manifest, sort_keys=True, indent=2).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks)


def loads(data: bytes) -> Checkpoint:
    prefix = len(MAGIC) + 8
    if len(data) < prefix:
        raise CheckpointCorruptError(f"checkpoint is {len(data)} bytes, too short for a header")
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointCorruptError("not a checkpoint file (bad magic)")
    header_len, = struct.unpack("<Q", data[len(MAGIC):prefix])
    if len(data) < prefix + header_len:
        raise CheckpointCorruptError("checkpoint truncated inside the manifest")
    try:
        manifest = json.loads(data[prefix:prefix + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise CheckpointCorruptError("manifest is not a JSON object")

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {version}, this build reads {FORMAT_VERSION}")

    try:
        return _from_manifest(manifest, data[prefix + header_len:])
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise CheckpointCorruptError(f"manifest is malformed: {exc!r}") from exc


def _from_manifest(manifest: dict, blob: bytes) -> Checkpoint:
    latent_dim = int(manifest["latent_dim"])
    entries = manifest["tensors"]
    expected = parameter_shapes(latent_dim)

    total = sum(int(e["count"]) for e in entries)
    if len(blob) != total * BLOB_DTYPE.itemsize:
        raise CheckpointCorruptError(
            f"parameter blob is {len(blob)} bytes, manifest describes "
            f"{total * BLOB_DTYPE.itemsize}")

    values = np.frombuffer(blob, dtype=BLOB_DTYPE)
    params = OrderedDict()
    for entry in entries:
        shape = tuple(entry["shape"])
        name = entry["name"]
        start, count = int(entry["offset"]), int(entry["count"])
        if expected.get(name) != shape or int(np.prod(shape)) != count:
            raise CheckpointCorruptError(
                f"tensor {name} has shape {shape}, latent_dim {latent_dim} needs "
                f"{expected.get(name)}")
        if start < 0 or start + count > len(values):
            raise CheckpointCorruptError(
                f"tensor {name} spans [{start}, {start + count}), blob holds {len(values)}")
        params[name] = values[start:start + count].astype(np.float32).reshape(shape)

    try:
        state = ModelState(latent_dim=latent_dim, mode=manifest["mode"],
                           beta=float(manifest["beta"]), params=params,
                           reparameterization=manifest.get("reparameterization", "sigma"))
    except TargetedVAEError as exc:
        raise CheckpointCorruptError(f"checkpoint does not describe a valid model: {exc}") from exc
    return Checkpoint(state=state, config=TrainConfig.from_dict(manifest["config"]),
                      history=list(manifest["history"]),
                      format_version=manifest["format_version"])


def save(checkpoint: Checkpoint, path: str):
    with open(path, "wb") as f:
        f.write(dumps(checkpoint))


def load(path: str) -> Checkpoint:
    with open(path, "rb") as f:
        return loads(f.read())
