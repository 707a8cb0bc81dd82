# src/utils/data_loader.py
import gzip
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import (BadMagic, DataError, DimensionMismatch, LabelMismatch,
                     TruncatedFile)
from .random_streams import stream

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
IMAGE_SIZE = 28

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

# Well-formed, unrotated representatives of digits 0..9 in the combined train+test array.
REFERENCE_INDICES = (56, 102, 25, 50, 26, 175, 62, 15, 46, 45)


@dataclass
class ImageSet:
    images: np.ndarray
    labels: np.ndarray
    angles: Optional[np.ndarray] = None
    source_index: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.images.ndim != 3 or self.images.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE):
            raise DataError(f"images must be N x 28 x 28, got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise DataError(
                f"{len(self.images)} images but {len(self.labels)} labels")
        if self.angles is not None and len(self.angles) != len(self.images):
            raise DataError(
                f"{len(self.images)} images but {len(self.angles)} angles")
        if self.source_index is None:
            self.source_index = np.arange(len(self.images), dtype=np.int64)
        if len(self.images) and (self.images.min() < 0 or self.images.max() > 1):
            raise DataError("pixel values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.images)

    def subset(self, positions: Sequence[int]) -> "ImageSet":
        positions = np.asarray(positions, dtype=np.int64)
        return ImageSet(
            images=self.images[positions],
            labels=self.labels[positions],
            angles=None if self.angles is None else self.angles[positions],
            source_index=self.source_index[positions],
        )

    def batch(self, positions: Sequence[int]) -> np.ndarray:
        """Images at `positions` shaped N x 28 x 28 x 1"""
        return self.images[np.asarray(positions, dtype=np.int64)][..., None]


@dataclass
class TargetTable:
    targets: np.ndarray
    source_indices: Tuple[int, ...] = field(default=REFERENCE_INDICES)

    def for_labels(self, labels: np.ndarray) -> np.ndarray:
        """Reference image per record, shaped N x 28 x 28 x 1"""
        return self.targets[np.asarray(labels, dtype=np.int64)][..., None]


def _read_header(data: bytes, magic_expected: int, ndim: int, kind: str) -> Tuple[int, ...]:
    header_len = 4 + 4 * ndim
    if len(data) < 4:
        raise TruncatedFile(f"{kind} file ends inside the magic number", len(data))
    magic, = struct.unpack(">I", data[:4])
    if magic != magic_expected:
        raise BadMagic(
            f"{kind} file has magic 0x{magic:08x}, expected 0x{magic_expected:08x}", 0)
    if len(data) < header_len:
        raise TruncatedFile(f"{kind} file ends inside the dimension header", len(data))
    return struct.unpack(">" + "I" * ndim, data[4:header_len])


def _read_payload(data: bytes, offset: int, expected: int, kind: str) -> np.ndarray:
    available = len(data) - offset
    if available < expected:
        raise TruncatedFile(
            f"{kind} payload holds {available} bytes, header promises {expected}", len(data))
    if available > expected:
        raise DimensionMismatch(
            f"{kind} payload has {available - expected} trailing bytes", offset + expected)
    return np.frombuffer(data, dtype=np.uint8, count=expected, offset=offset).copy()


def parse_idx_images(data: bytes) -> np.ndarray:
    """Decode an IDX3 image container into a count x 28 x 28 uint8 array"""
    count, rows, cols = _read_header(data, IMAGE_MAGIC, 3, "image")
    if rows != IMAGE_SIZE:
        raise DimensionMismatch(f"image rows are {rows}, expected {IMAGE_SIZE}", 8)
    if cols != IMAGE_SIZE:
        raise DimensionMismatch(f"image columns are {cols}, expected {IMAGE_SIZE}", 12)
    pixels = _read_payload(data, 16, count * rows * cols, "image")
    return pixels.reshape(count, rows, cols)


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Decode an IDX1 label container"""
    count, = _read_header(data, LABEL_MAGIC, 1, "label")
    labels = _read_payload(data, 8, count, "label")
    if labels.size and labels.max() > 9:
        raise DimensionMismatch(f"label value {labels.max()} is outside 0..9", 8)
    return labels


def serialize_idx_images(images: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    header = struct.pack(">IIII", IMAGE_MAGIC, *images.shape)
    return header + images.tobytes()


def serialize_idx_labels(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABEL_MAGIC, len(labels)) + labels.tobytes()


def read_idx_file(path: str) -> bytes:
    """Raw bytes of an IDX file; a `.gz` sibling is used when the plain file is absent"""
    if os.path.exists(path):
        with open(path, "rb") as f:
            return f.read()
    if os.path.exists(path + ".gz"):
        with gzip.open(path + ".gz", "rb") as f:
            return f.read()
    raise DataError(f"dataset file not found: {path}")


def _load_pair(images_path: str, labels_path: str) -> Tuple[np.ndarray, np.ndarray]:
    images = parse_idx_images(read_idx_file(images_path))
    labels = parse_idx_labels(read_idx_file(labels_path))
    if len(images) != len(labels):
        raise DataError(
            f"{images_path} holds {len(images)} images but {labels_path} "
            f"holds {len(labels)} labels")
    return images, labels


def load_combined(train_images: str, train_labels: str, test_images: str,
                  test_labels: str, dtype=np.float32) -> ImageSet:
    """Train records followed by test records, pixels scaled by 1/255"""
    train_x, train_y = _load_pair(train_images, train_labels)
    test_x, test_y = _load_pair(test_images, test_labels)
    pixels = np.concatenate([train_x, test_x]).astype(dtype) / dtype(255.0)
    labels = np.concatenate([train_y, test_y]).astype(np.int64)
    return ImageSet(images=pixels, labels=labels)


def mnist_paths(data_dir: str) -> Dict[str, str]:
    return {key: os.path.join(data_dir, name) for key, name in MNIST_FILES.items()}


def load_mnist(data_dir: str, split: str = "combined", dtype=np.float32) -> ImageSet:
    """MNIST from `data_dir`; `split` is 'combined' (70000 records) or 'train' (60000)"""
    if not os.path.isdir(data_dir):
        raise DataError(f"data directory not found: {data_dir}")
    paths = mnist_paths(data_dir)
    if split == "combined":
        return load_combined(paths["train_images"], paths["train_labels"],
                             paths["test_images"], paths["test_labels"], dtype=dtype)
    if split == "train":
        images, labels = _load_pair(paths["train_images"], paths["train_labels"])
        return ImageSet(images=images.astype(dtype) / dtype(255.0),
                        labels=labels.astype(np.int64))
    raise DataError(f"unknown split '{split}' (expected combined or train)")


def reference_targets(image_set: ImageSet,
                      indices: Sequence[int] = REFERENCE_INDICES) -> TargetTable:
    """Fixed per-class reference images, checked against the loaded labels"""
    if image_set.angles is not None:
        raise DataError("reference targets must come from the unrotated set")
    position = {int(src): pos for pos, src in enumerate(image_set.source_index)}
    targets = []
    for digit, idx in enumerate(indices):
        if idx not in position:
            raise DataError(f"reference index {idx} is not present in the image set")
        found = int(image_set.labels[position[idx]])
        if found != digit:
            raise LabelMismatch(idx, digit, found)
        targets.append(image_set.images[position[idx]])
    return TargetTable(targets=np.stack(targets), source_indices=tuple(indices))


def select_subset(image_set: ImageSet, size: Optional[int], seed: int) -> ImageSet:
    """Seeded sample of `size` records kept in source order; None keeps everything"""
    if size is None or size >= len(image_set):
        return image_set
    if size < 1:
        raise DataError(f"subset size must be positive, got {size}")
    chosen = stream(seed, "subset").choice(len(image_set), size=size, replace=False)
    return image_set.subset(np.sort(chosen))
