# src/utils/rotation.py
import math
from typing import Optional

import numpy as np
from scipy.ndimage import affine_transform

from .data_loader import ImageSet
from .random_streams import stream

_SNAP = 1e-12


def _snap(value: float) -> float:
    # cos/sin of quarter turns are off by ~1e-16; snapping makes those rotations exact.
    for exact in (0.0, 1.0, -1.0):
        if abs(value - exact) < _SNAP:
            return exact
    return value


def rotate_image(image: np.ndarray, angle: float) -> np.ndarray:
    """Rotate one H x W image counterclockwise about its geometric centre.

    Bilinear sampling of the inverse map; samples falling outside the source are black.
    """
    image = np.asarray(image, dtype=np.float64)
    cos, sin = _snap(math.cos(angle)), _snap(math.sin(angle))
    # Maps an output (row, col) to the input coordinate it samples.
    matrix = np.array([[cos, sin], [-sin, cos]])
    center = (np.array(image.shape, dtype=np.float64) - 1) / 2
    rotated = affine_transform(image, matrix, offset=center - matrix @ center, order=1,
                               mode="grid-constant", cval=0.0)
    return np.clip(rotated, 0.0, 1.0)


def rotate_batch(images: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """`rotate_image` over an N x H x W stack, one angle per image"""
    images = np.asarray(images)
    out = np.empty_like(images)
    for i, angle in enumerate(np.asarray(angles, dtype=np.float64)):
        out[i] = rotate_image(images[i], float(angle))
    return out


def rotation_angles(seed: int, count: int, draw: Optional[int] = None) -> np.ndarray:
    """Uniform [0, 2*pi) angles indexed by source record; `draw` picks an independent redraw"""
    extra = () if draw is None else (draw,)
    return stream(seed, "rotation", *extra).random(count) * (2 * math.pi)


def build_rotated(image_set: ImageSet, seed: int, draw: Optional[int] = None) -> ImageSet:
    """Every record rotated by an angle fixed by (seed, draw, source index)"""
    count = int(image_set.source_index.max()) + 1 if len(image_set) else 0
    angles = rotation_angles(seed, count, draw)[image_set.source_index]
    return ImageSet(images=rotate_batch(image_set.images, angles), labels=image_set.labels,
                    angles=angles, source_index=image_set.source_index)
