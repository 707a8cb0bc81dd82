# conftest.py
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.utils.data_loader import (MNIST_FILES, REFERENCE_INDICES,  # noqa: E402
                                   serialize_idx_images, serialize_idx_labels)

SYNTHETIC_TRAIN = 200
SYNTHETIC_TEST = 40


def synthetic_digits(count: int, seed: int, fixed=None):
    """Class-dependent blocky 28x28 uint8 images; `fixed` maps index -> forced label"""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=count).astype(np.uint8)
    for idx, label in (fixed or {}).items():
        labels[idx] = label
    images = np.zeros((count, 28, 28), dtype=np.uint8)
    for i, label in enumerate(labels):
        row, col = 4 + 2 * (label // 5) * 5, 4 + 4 * (label % 5)
        images[i, row:row + 10, col:col + 6] = 200
        images[i] = np.clip(images[i] + rng.integers(0, 40, size=(28, 28)), 0, 255)
    return images, labels


def write_mnist(directory: str, train_count: int = SYNTHETIC_TRAIN,
                test_count: int = SYNTHETIC_TEST, seed: int = 0):
    fixed = {idx: digit for digit, idx in enumerate(REFERENCE_INDICES)}
    train_x, train_y = synthetic_digits(train_count, seed, fixed)
    test_x, test_y = synthetic_digits(test_count, seed + 1)
    payloads = {
        "train_images": serialize_idx_images(train_x),
        "train_labels": serialize_idx_labels(train_y),
        "test_images": serialize_idx_images(test_x),
        "test_labels": serialize_idx_labels(test_y),
    }
    os.makedirs(directory, exist_ok=True)
    for key, data in payloads.items():
        with open(os.path.join(directory, MNIST_FILES[key]), "wb") as f:
            f.write(data)
    return directory


@pytest.fixture(scope="session")
def mnist_dir(tmp_path_factory):
    return write_mnist(str(tmp_path_factory.mktemp("mnist")))


@pytest.fixture(scope="session")
def real_mnist_dir():
    data_dir = os.getenv("TARGETED_VAE_DATA_DIR", "./data/mnist")
    names = [os.path.join(data_dir, name) for name in MNIST_FILES.values()]
    if not all(os.path.exists(n) or os.path.exists(n + ".gz") for n in names):
        pytest.skip(f"real MNIST not found in {data_dir}")
    return data_dir
