import json

import jsonlines
import numpy as np
import pytest

from src.training import TrainConfig, dumps, prepare_data, train
from src.model import init
from src.utils.errors import ConfigError, DataError, NumericalAbort
from src.utils.logger import RunLogger


def _config(mnist_dir, **overrides):
    values = dict(data_dir=mnist_dir, epochs=2, batch_size=32, subset_size=96, seed=5,
                  latent_dim=2)
    values.update(overrides)
    return TrainConfig(**values)


@pytest.mark.parametrize("kwargs", [
    {"epochs": 0}, {"batch_size": 0}, {"learning_rate": 0.0}, {"latent_dim": 0},
    {"mode": "both"}, {"split": "test"}, {"dtype": "float16"}, {"beta": -0.5},
])
def test_invalid_training_config(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs).validate()


def test_config_round_trips_through_dict():
    config = TrainConfig(mode="targeted", subset_size=10, rotate=True)
    assert TrainConfig.from_dict({**config.to_dict(), "unrelated": 1}) == config


def test_prepare_data_returns_subset_and_targets(mnist_dir):
    data, targets = prepare_data(_config(mnist_dir))
    assert len(data) == 96
    assert targets.targets.shape == (10, 28, 28)


def test_training_is_deterministic(mnist_dir):
    config = _config(mnist_dir, mode="targeted", rotate=True)
    a = train(config, progress=False)
    b = train(config, progress=False)
    assert dumps(a) == dumps(b)
    assert len(a.history) == 2


def test_seed_changes_the_result(mnist_dir):
    a = train(_config(mnist_dir, epochs=1), progress=False)
    b = train(_config(mnist_dir, epochs=1, seed=6), progress=False)
    assert dumps(a) != dumps(b)


def test_every_parameter_moves_in_one_epoch(mnist_dir):
    config = _config(mnist_dir, epochs=1, mode="targeted")
    result = train(config, progress=False)
    start = init(2, "targeted", seed=config.seed, dtype=np.float32)
    for name in start.params:
        assert not np.array_equal(result.state.params[name], start.params[name]), name


def test_final_partial_batch_is_included(mnist_dir, tmp_path):
    logger = RunLogger(str(tmp_path), verbose=False)
    train(_config(mnist_dir, epochs=1, batch_size=40), logger=logger, progress=False)
    with open(tmp_path / "loss_tracking.json") as f:
        session = json.load(f)
    assert session["epochs"][0]["batches"] == 3
    assert session["total_records"] == 96
    with jsonlines.open(str(tmp_path / "events.jsonl")) as reader:
        done, = [e for e in reader if e["event"] == "training_done"]
    assert done["epochs"] == 1 and done["batches"] == 3


def test_loss_decreases_on_the_training_subset(mnist_dir):
    for mode in ("standard", "targeted"):
        result = train(_config(mnist_dir, epochs=3, subset_size=None, mode=mode,
                               learning_rate=3e-3), progress=False)
        assert result.history[2]["total"] < result.history[0]["total"], mode


def test_resampled_rotations_change_each_epoch(mnist_dir):
    fixed = train(_config(mnist_dir, rotate=True), progress=False)
    resampled = train(_config(mnist_dir, rotate=True, resample_rotations=True), progress=False)
    assert dumps(fixed) != dumps(resampled)


def test_missing_data_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        train(TrainConfig(data_dir=str(tmp_path / "none"), epochs=1), progress=False)


def test_non_finite_step_becomes_numerical_abort(mnist_dir):
    # A huge learning rate drives the weights to overflow within a few steps.
    config = _config(mnist_dir, learning_rate=1e30, epochs=3, dtype="float32")
    with pytest.raises(NumericalAbort) as info:
        train(config, progress=False)
    assert info.value.epoch >= 1
