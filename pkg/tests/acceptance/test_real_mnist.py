"""Checks against the real MNIST files; skipped when they are not downloaded."""
import os

import numpy as np
import pytest

from config import RunConfig
from src import pipeline
from src.analysis import embed, knn_purity
from src.utils.data_loader import REFERENCE_INDICES, load_mnist, reference_targets
from src.utils.rotation import rotate_batch

pytestmark = pytest.mark.slow


def test_reference_indices_hold_digits_zero_to_nine(real_mnist_dir):
    full = load_mnist(real_mnist_dir, "combined")
    assert full.labels[list(REFERENCE_INDICES)].tolist() == list(range(10))
    table = reference_targets(full)
    np.testing.assert_array_equal(table.targets[8], full.images[REFERENCE_INDICES[8]])


def test_rotation_round_trip_error_is_small(real_mnist_dir):
    images = load_mnist(real_mnist_dir, "combined", dtype=np.float64).images[:100]
    forward = rotate_batch(images, np.full(100, 1.0))
    back = rotate_batch(forward, np.full(100, -1.0))
    assert np.abs(back - images).mean() < 0.05


@pytest.fixture(scope="module")
def desk(real_mnist_dir, tmp_path_factory):
    config = RunConfig(data_dir=real_mnist_dir, seed=42,
                       out_dir=str(tmp_path_factory.mktemp("desk")))
    return pipeline.desk_preset(config)


def _purity(config, variant):
    checkpoint, variant_config, _ = pipeline.trained_variant(config, variant, verbose=False,
                                                             progress=False)
    records, _ = pipeline.analysis_data(variant_config)
    return knn_purity(embed(checkpoint.state, records), k_neighbors=15, holdout_fraction=0.2,
                      seed=config.seed)


def test_targeted_training_separates_rotated_digits(desk):
    standard, targeted = pipeline.FIGURES[4].variants
    standard_purity = _purity(desk, standard)
    targeted_purity = _purity(desk, targeted)
    assert targeted_purity >= 0.60
    assert targeted_purity >= standard_purity + 0.15


def test_census_around_the_reference_eight(desk):
    variant, = pipeline.FIGURES[11].variants
    checkpoint, variant_config, run_dir = pipeline.trained_variant(desk, variant, verbose=False,
                                                                   progress=False)
    result = pipeline.run_census(variant_config, checkpoint, os.path.join(run_dir, "census.csv"))
    assert result.total > 0
    assert result.majority == 8
    assert result.purity >= 0.8
