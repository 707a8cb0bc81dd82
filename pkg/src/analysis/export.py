# src/analysis/export.py
from typing import Tuple

import numpy as np
import pandas as pd

from ..utils.errors import DataError
from .latent import CensusResult, LatentPointSet, NUM_CLASSES


def write_latents_csv(latents: LatentPointSet, path: str):
    """Columns label, angle, z1..zk; angle is empty for unrotated sets"""
    frame = pd.DataFrame({"label": latents.labels.astype(np.int64)})
    frame["angle"] = latents.angles if latents.angles is not None else np.nan
    for axis in range(latents.dim):
        frame[f"z{axis + 1}"] = latents.points[:, axis]
    frame.to_csv(path, index=False)


def read_latents_csv(path: str) -> LatentPointSet:
    frame = pd.read_csv(path, float_precision="round_trip")
    z_columns = [c for c in frame.columns if c.startswith("z") and c[1:].isdigit()]
    if "label" not in frame.columns or not z_columns:
        raise DataError(f"{path} is not a latent CSV (needs label and z1..zk columns)")
    z_columns.sort(key=lambda c: int(c[1:]))
    angles = None
    if "angle" in frame.columns and frame["angle"].notna().all():
        angles = frame["angle"].to_numpy(dtype=np.float64)
    return LatentPointSet(points=frame[z_columns].to_numpy(dtype=np.float64),
                          labels=frame["label"].to_numpy(dtype=np.int64), angles=angles)


def write_tsne_csv(labels: np.ndarray, embedding: np.ndarray, path: str):
    pd.DataFrame({"label": np.asarray(labels, dtype=np.int64), "t1": embedding[:, 0],
                  "t2": embedding[:, 1]}).to_csv(path, index=False)


def write_census_csv(result: CensusResult, path: str):
    pd.DataFrame({"digit": np.arange(NUM_CLASSES),
                  "count": result.counts.astype(np.int64)}).to_csv(path, index=False)


def to_gray_bytes(image: np.ndarray) -> np.ndarray:
    """round(255 * value) with halves rounded up"""
    return np.floor(np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_pgm(image: np.ndarray, path: str):
    """Binary P5 graymap, maxval 255"""
    if image.ndim != 2:
        raise DataError(f"PGM images are 2-d, got shape {image.shape}")
    height, width = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(to_gray_bytes(image).tobytes())


def read_pgm(path: str) -> Tuple[int, int, np.ndarray]:
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise DataError(f"{path} is not a binary PGM with maxval 255")
    width, height = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != width * height:
        raise DataError(f"{path} holds {pixels.size} pixels, header says {width * height}")
    return width, height, pixels.reshape(height, width)


def image_strip(images: np.ndarray, columns: int = 10) -> np.ndarray:
    """Lay N x 28 x 28 images out in rows of `columns`, padding the last row with black"""
    count = len(images)
    rows = max(1, -(-count // columns))
    cells = np.zeros((rows * columns,) + images.shape[1:])
    cells[:count] = images
    cells = cells.reshape(rows, columns, *images.shape[1:])
    return cells.transpose(0, 2, 1, 3).reshape(rows * images.shape[1], columns * images.shape[2])
