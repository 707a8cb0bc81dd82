import os
from dataclasses import replace

import jsonlines
import numpy as np
import pandas as pd
import pytest

from config import RunConfig
from src import pipeline
from src.analysis import LatentPointSet
from src.training import load
from src.utils.errors import ConfigError
from src.utils.logger import RunLogger


@pytest.fixture
def tiny(mnist_dir, tmp_path):
    return RunConfig(data_dir=mnist_dir, subset_size=64, epochs=1, batch_size=32, seed=2,
                     out_dir=str(tmp_path), tsne_points=40, perplexity=5.0, tsne_iters=100)


def test_every_figure_has_a_recipe():
    assert sorted(pipeline.FIGURES) == [1, 2, 4, 5, 6, 7, 8, 9, 10, 11]
    assert [v.beta for v in pipeline.FIGURES[10].variants] == [0.0, 0.1, 10.0]
    assert [v.latent_dim for v in pipeline.FIGURES[9].variants] == [10, 10, 10]
    assert [v.rotate for v in pipeline.FIGURES[9].variants] == [True, True, False]


def test_figure_three_and_unknown_ids_are_config_errors(tiny):
    with pytest.raises(ConfigError):
        pipeline.reproduce(3, tiny, verbose=False, progress=False)
    with pytest.raises(ConfigError):
        pipeline.reproduce(12, tiny, verbose=False, progress=False)


def test_desk_preset():
    desk = pipeline.desk_preset(RunConfig())
    assert (desk.subset_size, desk.epochs) == (10000, 10)


def test_figure_one_writes_two_scatter_csvs(tiny):
    results = pipeline.reproduce(1, tiny, verbose=False, progress=False)
    assert set(results) == {"standard_k2_plain", "targeted_k2_plain"}
    for out in results.values():
        frame = pd.read_csv(out["latents"])
        assert list(frame.columns) == ["label", "angle", "z1", "z2"]
        assert len(frame) == 64
        assert 0.0 <= out["purity"] <= 1.0
    assert os.path.exists(os.path.join(tiny.out_dir, "fig1", "resolved_config.txt"))


def test_trained_variants_are_reused_across_figures(tiny):
    pipeline.reproduce(1, tiny, verbose=False, progress=False)
    path = os.path.join(tiny.out_dir, "standard_k2_plain", pipeline.CHECKPOINT_NAME)
    stamp = os.path.getmtime(path)
    results = pipeline.reproduce(2, tiny, verbose=False, progress=False)
    assert os.path.getmtime(path) == stamp
    with open(results["standard_k2_plain"]["grid"], "rb") as f:
        assert f.read().startswith(b"P5\n840 840\n255\n")


def test_figure_eleven_runs_the_census(tiny):
    results = pipeline.reproduce(11, tiny, verbose=False, progress=False)
    out = results["targeted_k3_rotated"]
    frame = pd.read_csv(out["census"])
    assert frame["digit"].tolist() == list(range(10))
    assert frame["count"].sum() == sum(out["census_counts"])
    assert load(os.path.join(out["run_dir"], pipeline.CHECKPOINT_NAME)).state.latent_dim == 3


def test_sweep_trains_one_model_per_beta(tiny):
    results = pipeline.sweep(tiny, [0.0, 10.0], verbose=False, progress=False)
    assert set(results) == {"standard_k2_plain_beta0", "standard_k2_plain_beta10"}
    for out in results.values():
        assert len(pd.read_csv(out["tsne"])) == 40
    with pytest.raises(ConfigError):
        pipeline.sweep(tiny, [], verbose=False, progress=False)


def test_tsne_sample_is_seeded_and_ordered():
    latents = LatentPointSet(points=np.arange(200.0).reshape(100, 2), labels=np.arange(100) % 10)
    a = pipeline.tsne_sample(latents, 30, seed=1)
    b = pipeline.tsne_sample(latents, 30, seed=1)
    np.testing.assert_array_equal(a.points, b.points)
    assert np.all(np.diff(a.points[:, 0]) > 0)
    assert pipeline.tsne_sample(latents, None, seed=1) is latents


def _events(directory):
    with jsonlines.open(os.path.join(directory, "events.jsonl")) as reader:
        return list(reader)


def test_changed_config_retrains_with_a_warning(tiny):
    pipeline.reproduce(1, tiny, verbose=False, progress=False)
    pipeline.reproduce(1, replace(tiny, learning_rate=2e-3), verbose=False, progress=False)
    run_dir = os.path.join(tiny.out_dir, "standard_k2_plain")
    warnings = [e for e in _events(run_dir) if e["event"] == "warning"]
    assert len(warnings) == 1 and "retraining" in warnings[0]["message"]
    assert load(os.path.join(run_dir, pipeline.CHECKPOINT_NAME)).config.learning_rate == 2e-3


def test_empty_census_is_warned_about(tiny, tmp_path):
    variant, = pipeline.FIGURES[11].variants
    checkpoint, variant_config, _ = pipeline.trained_variant(tiny, variant, verbose=False,
                                                             progress=False)
    logger = RunLogger(str(tmp_path / "census"), verbose=False)
    result = pipeline.run_census(replace(variant_config, census_side=1e-12), checkpoint,
                                 str(tmp_path / "census.csv"), logger=logger)
    assert result.total == 0
    assert [e["event"] for e in _events(logger.log_dir)] == ["warning"]
