import pytest

from config import (RunConfig, format_config, load_config_file, parse_config_text, resolve,
                    write_resolved_config)
from src.utils.errors import ConfigError


def test_config_text_is_parsed_to_field_types():
    values = parse_config_text("""
        # desk run
        latent_dim = 3
        beta = 0.1          # weak KL
        rotate = true
        subset_size = none
        mode = targeted
    """)
    assert values == {"latent_dim": 3, "beta": 0.1, "rotate": True, "subset_size": None,
                      "mode": "targeted"}


def test_quoted_values_are_unquoted():
    values = parse_config_text("data_dir = './my data'  # spaces need quotes\nsplit=\"train\"\n")
    assert values == {"data_dir": "./my data", "split": "train"}


@pytest.mark.parametrize("text", [
    "latent_dim 3", "latent_dim", "unknown_key = 1", "epochs = many", "rotate = maybe",
])
def test_bad_config_lines(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_precedence_defaults_inherited_file_flags(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("epochs = 4\nseed = 9\nsubset_size = 500\n")
    config = resolve(str(path), overrides={"seed": 11},
                     inherited={"seed": 3, "split": "train", "epochs": 2})
    assert config.epochs == 4
    assert config.seed == 11
    assert config.split == "train"
    assert config.subset_size == 500
    assert config.batch_size == RunConfig().batch_size


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(str(tmp_path / "absent.cfg"))


def test_resolved_config_can_be_read_back(tmp_path):
    config = RunConfig(mode="targeted", beta=0.1, subset_size=None, rotate=True)
    path = str(tmp_path / "out" / "resolved_config.txt")
    write_resolved_config(config, path, ckpt="model.ckpt")
    restored = resolve(path)
    assert restored == config
    text = open(path).read()
    assert "# ckpt = model.ckpt" in text
    keys = [line.split(" = ")[0] for line in text.splitlines() if not line.startswith("#")]
    assert keys == sorted(keys)


def test_format_config_values():
    assert format_config({"b": True, "a": None, "c": 1e-3}) == "a = none\nb = true\nc = 0.001\n"


def test_train_config_is_validated():
    with pytest.raises(ConfigError):
        RunConfig(latent_dim=0).train_config()
    assert RunConfig(latent_dim=3).train_config().latent_dim == 3
