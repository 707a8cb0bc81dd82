# config.py
import io
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Iterable, Optional

from dotenv import load_dotenv
from dotenv.parser import parse_stream

from src.training.trainer import TrainConfig
from src.utils.errors import ConfigError

load_dotenv()

# Dataset Configuration
DATA_DIR = os.getenv("TARGETED_VAE_DATA_DIR", "./data/mnist")
SPLIT = "combined"
RANDOM_SEED = 42

# Model / Training Configuration
LATENT_DIM = 2
MODE = "standard"
BETA = 1.0
EPOCHS = 30
BATCH_SIZE = 128
LEARNING_RATE = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-7

# Analysis Configuration
GRID_LO, GRID_HI, GRID_STEPS = -3.0, 3.0, 30
PERPLEXITY = 30.0
TSNE_ITERS = 1000
TSNE_POINTS = 2500
CENSUS_DIGIT = 8
CENSUS_SIDE = 0.2
CENSUS_SAMPLES = 100
KNN_NEIGHBORS = 15
HOLDOUT_FRACTION = 0.2

# Desk-scale preset for `repro --desk`
DESK_SUBSET = 10000
DESK_EPOCHS = 10

# Output / Logging Configuration
OUTPUT_DIR = "./runs"
USE_WANDB = os.getenv("TARGETED_VAE_USE_WANDB", "0").lower() in ("1", "true", "yes")
WANDB_PROJECT = os.getenv("WANDB_PROJECT", "targeted-vae")
RESOLVED_CONFIG_NAME = "resolved_config.txt"


@dataclass
class RunConfig:
    """Everything a command needs: the training fields plus analysis parameters"""
    latent_dim: int = LATENT_DIM
    mode: str = MODE
    beta: float = BETA
    epochs: int = EPOCHS
    batch_size: int = BATCH_SIZE
    learning_rate: float = LEARNING_RATE
    adam_beta1: float = ADAM_BETA1
    adam_beta2: float = ADAM_BETA2
    adam_epsilon: float = ADAM_EPSILON
    seed: int = RANDOM_SEED
    rotate: bool = False
    resample_rotations: bool = False
    data_dir: str = DATA_DIR
    split: str = SPLIT
    subset_size: Optional[int] = None
    dtype: str = "float32"
    reparameterization: str = "sigma"
    grid_lo: float = GRID_LO
    grid_hi: float = GRID_HI
    grid_steps: int = GRID_STEPS
    perplexity: float = PERPLEXITY
    tsne_iters: int = TSNE_ITERS
    tsne_points: Optional[int] = TSNE_POINTS
    census_digit: int = CENSUS_DIGIT
    census_side: float = CENSUS_SIDE
    census_samples: int = CENSUS_SAMPLES
    knn_neighbors: int = KNN_NEIGHBORS
    holdout_fraction: float = HOLDOUT_FRACTION
    out_dir: str = OUTPUT_DIR
    use_wandb: bool = USE_WANDB

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict(asdict(self)).validate()

    def update(self, values: Dict[str, Any]) -> "RunConfig":
        """Override fields in place; `None` values leave the current setting"""
        known = {f.name for f in fields(self)}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'")
            if value is not None:
                setattr(self, key, value)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: '{text}' is not a boolean")


def parse_value(key: str, text: str) -> Any:
    """Convert the text of one `key = value` line to the field's type"""
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key '{key}'")
    kind = _FIELD_TYPES[key]
    optional = kind in (Optional[int], "Optional[int]")
    if optional and text.lower() in ("", "none"):
        return None
    try:
        if kind in (bool, "bool"):
            return _parse_bool(key, text)
        if kind in (int, "int") or optional:
            return int(text)
        if kind in (float, "float"):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse '{text}' ({exc})") from exc
    return text


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """Typed values from dotenv-style `key = value` text; `#` starts a comment"""
    values = {}
    for binding in parse_stream(io.StringIO(text)):
        if binding.error:
            raise ConfigError(f"{source}:{binding.original.line}: cannot parse "
                              f"'{binding.original.string.strip()}'")
        if binding.key is None:
            continue
        if binding.value is None:
            raise ConfigError(f"{source}:{binding.original.line}: expected 'key = value', "
                              f"got '{binding.original.string.strip()}'")
        values[binding.key] = parse_value(binding.key, binding.value)
    return values


def load_config_file(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), source=path)


def resolve(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
            inherited: Optional[Dict[str, Any]] = None) -> RunConfig:
    """defaults < inherited (e.g. a checkpoint's training config) < config file < overrides"""
    config = RunConfig()
    if inherited:
        config.update(inherited)
    if config_path:
        config.update(load_config_file(config_path))
    if overrides:
        config.update(overrides)
    return config


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def format_config(values: Dict[str, Any], keys: Optional[Iterable[str]] = None) -> str:
    keys = sorted(keys if keys is not None else values)
    return "".join(f"{key} = {_format_value(values[key])}\n" for key in keys)


def write_resolved_config(config: RunConfig, path: str, **extra: Any):
    """Sorted `key = value` provenance sidecar; `extra` records command-specific inputs"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    values = config.to_dict()
    body = format_config(values)
    if extra:
        body += "".join(f"# {key} = {_format_value(value)}\n" for key, value in sorted(extra.items()))
    with open(path, "w", encoding="utf-8") as f:
        f.write(body)
