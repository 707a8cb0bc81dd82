import gzip
import os
import struct

import numpy as np
import pytest

from src.utils.data_loader import (IMAGE_MAGIC, MNIST_FILES, REFERENCE_INDICES, ImageSet,
                                   load_combined, load_mnist, mnist_paths, parse_idx_images,
                                   parse_idx_labels, reference_targets, select_subset,
                                   serialize_idx_images, serialize_idx_labels)
from src.utils.errors import (BadMagic, DataError, DimensionMismatch, LabelMismatch,
                              TruncatedFile)
from src.utils.rotation import build_rotated
from conftest import SYNTHETIC_TEST, SYNTHETIC_TRAIN, write_mnist


def _images(count=3):
    return np.arange(count * 28 * 28, dtype=np.uint32).reshape(count, 28, 28) % 256


def test_parse_images_reads_header_and_pixels():
    images = _images()
    parsed = parse_idx_images(serialize_idx_images(images))
    assert parsed.shape == (3, 28, 28)
    np.testing.assert_array_equal(parsed, images)


def test_bad_magic_is_reported_at_offset_zero():
    data = bytearray(serialize_idx_images(_images()))
    data[3] = 0x01
    with pytest.raises(BadMagic) as info:
        parse_idx_images(bytes(data))
    assert info.value.offset == 0


def test_truncated_payload():
    data = serialize_idx_images(_images())
    with pytest.raises(TruncatedFile) as info:
        parse_idx_images(data[:-10])
    assert info.value.offset == len(data) - 10


def test_truncated_header():
    with pytest.raises(TruncatedFile):
        parse_idx_images(struct.pack(">II", IMAGE_MAGIC, 3))


def test_trailing_bytes_are_a_dimension_mismatch():
    data = serialize_idx_images(_images()) + b"\x00\x00"
    with pytest.raises(DimensionMismatch) as info:
        parse_idx_images(data)
    assert info.value.offset == 16 + 3 * 784


def test_wrong_image_size_is_a_dimension_mismatch():
    data = struct.pack(">IIII", IMAGE_MAGIC, 1, 27, 28) + bytes(27 * 28)
    with pytest.raises(DimensionMismatch) as info:
        parse_idx_images(data)
    assert info.value.offset == 8


def test_labels_round_trip_and_range_check():
    labels = np.array([0, 9, 4, 4], dtype=np.uint8)
    np.testing.assert_array_equal(parse_idx_labels(serialize_idx_labels(labels)), labels)
    with pytest.raises(DimensionMismatch):
        parse_idx_labels(serialize_idx_labels(np.array([3, 12], dtype=np.uint8)))


def test_combined_set_is_train_then_test(mnist_dir):
    data = load_mnist(mnist_dir)
    assert len(data) == SYNTHETIC_TRAIN + SYNTHETIC_TEST
    assert data.images.dtype == np.float32
    assert data.images.min() >= 0 and data.images.max() <= 1
    np.testing.assert_array_equal(data.source_index, np.arange(len(data)))
    assert len(load_mnist(mnist_dir, split="train")) == SYNTHETIC_TRAIN


def test_pixels_are_scaled_by_255(tmp_path):
    images = np.zeros((2, 28, 28), dtype=np.uint8)
    images[0, 0, 0] = 255
    images[1, 5, 5] = 51
    paths = {}
    for key, payload in (("ti", serialize_idx_images(images)),
                         ("tl", serialize_idx_labels(np.array([1, 2]))),
                         ("si", serialize_idx_images(images[:1])),
                         ("sl", serialize_idx_labels(np.array([3])))):
        paths[key] = str(tmp_path / key)
        with open(paths[key], "wb") as f:
            f.write(payload)
    data = load_combined(paths["ti"], paths["tl"], paths["si"], paths["sl"])
    assert data.images[0, 0, 0] == 1.0
    assert data.images[1, 5, 5] == np.float32(0.2)
    np.testing.assert_array_equal(data.labels, [1, 2, 3])


def test_count_mismatch_between_images_and_labels(tmp_path):
    directory = write_mnist(str(tmp_path))
    with open(os.path.join(directory, MNIST_FILES["test_labels"]), "wb") as f:
        f.write(serialize_idx_labels(np.zeros(SYNTHETIC_TEST - 1, dtype=np.uint8)))
    with pytest.raises(DataError):
        load_mnist(directory)


def test_gzipped_files_are_read(tmp_path):
    directory = write_mnist(str(tmp_path))
    for path in mnist_paths(directory).values():
        with open(path, "rb") as src, gzip.open(path + ".gz", "wb") as dst:
            dst.write(src.read())
        os.remove(path)
    assert len(load_mnist(directory)) == SYNTHETIC_TRAIN + SYNTHETIC_TEST


def test_missing_directory_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        load_mnist(str(tmp_path / "absent"))


def test_reference_targets_follow_the_index_table(mnist_dir):
    data = load_mnist(mnist_dir)
    table = reference_targets(data)
    assert table.targets.shape == (10, 28, 28)
    for digit, idx in enumerate(REFERENCE_INDICES):
        assert data.labels[idx] == digit
        np.testing.assert_array_equal(table.targets[digit], data.images[idx])
    batch = table.for_labels(np.array([8, 0]))
    assert batch.shape == (2, 28, 28, 1)
    np.testing.assert_array_equal(batch[0, ..., 0], data.images[REFERENCE_INDICES[8]])


def test_reference_label_mismatch_is_fatal(mnist_dir):
    data = load_mnist(mnist_dir)
    labels = data.labels.copy()
    labels[REFERENCE_INDICES[3]] = 5
    broken = ImageSet(images=data.images, labels=labels)
    with pytest.raises(LabelMismatch) as info:
        reference_targets(broken)
    assert (info.value.idx, info.value.expected, info.value.found) == (REFERENCE_INDICES[3], 3, 5)


def test_reference_targets_refuse_rotated_sets(mnist_dir):
    with pytest.raises(DataError):
        reference_targets(build_rotated(load_mnist(mnist_dir), seed=1))


def test_subset_is_seeded_and_sorted(mnist_dir):
    data = load_mnist(mnist_dir)
    a = select_subset(data, 50, seed=3)
    b = select_subset(data, 50, seed=3)
    c = select_subset(data, 50, seed=4)
    np.testing.assert_array_equal(a.source_index, b.source_index)
    assert not np.array_equal(a.source_index, c.source_index)
    assert np.all(np.diff(a.source_index) > 0)
    assert select_subset(data, None, seed=3) is data


def test_image_set_validates_shapes():
    with pytest.raises(DataError):
        ImageSet(images=np.zeros((2, 28, 27)), labels=np.zeros(2))
    with pytest.raises(DataError):
        ImageSet(images=np.zeros((2, 28, 28)), labels=np.zeros(3))
    with pytest.raises(DataError):
        ImageSet(images=np.full((1, 28, 28), 1.5), labels=np.zeros(1))
