# src/training/trainer.py
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from ..engine import Graph, backward
from ..model import MODES, ModelState, init, total_loss
from ..model.vae import REPARAMETERIZATIONS
from ..utils.data_loader import (ImageSet, TargetTable, load_mnist, reference_targets,
                                 select_subset)
from ..utils.errors import ConfigError, NonFiniteError, NumericalAbort
from ..utils.logger import RunLogger
from ..utils.loss_tracker import LossTracker
from ..utils.random_streams import stream
from ..utils.rotation import build_rotated
from .optimizer import adam_step, zero_moments

SPLITS = ("combined", "train")
DTYPES = ("float32", "float64")


@dataclass
class TrainConfig:
    latent_dim: int = 2
    mode: str = "standard"
    beta: float = 1.0
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-7
    seed: int = 42
    rotate: bool = False
    resample_rotations: bool = False
    data_dir: str = "./data/mnist"
    split: str = "combined"
    subset_size: Optional[int] = None
    dtype: str = "float32"
    reparameterization: str = "sigma"

    def validate(self) -> "TrainConfig":
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{self.mode}'")
        if not self.beta >= 0:
            raise ConfigError(f"beta must be non-negative, got {self.beta}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.split not in SPLITS:
            raise ConfigError(f"split must be one of {SPLITS}, got '{self.split}'")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {DTYPES}, got '{self.dtype}'")
        if self.reparameterization not in REPARAMETERIZATIONS:
            raise ConfigError(f"unknown reparameterization '{self.reparameterization}'")
        if self.subset_size is not None and self.subset_size < 1:
            raise ConfigError(f"subset_size must be positive, got {self.subset_size}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in values.items() if key in known})


@dataclass
class Checkpoint:
    state: ModelState
    config: TrainConfig
    history: List[Dict[str, float]] = field(default_factory=list)
    format_version: int = 1


def prepare_data(config: TrainConfig):
    """(training records, reference targets) as selected by `config`"""
    dtype = np.dtype(config.dtype).type
    full = load_mnist(config.data_dir, config.split, dtype=dtype)
    targets = reference_targets(full)
    return select_subset(full, config.subset_size, config.seed), targets


def _step(state: ModelState, batch: ImageSet, targets: Optional[TargetTable],
          noise: np.random.Generator):
    with Graph() as graph:
        params = state.tensors(requires_grad=True)
        losses, _, _ = total_loss(state, batch, targets, rng=noise, params=params)
    grads = backward(losses.total, graph)
    named = {name: grads.get(tensor, np.zeros_like(tensor.data))
             for name, tensor in params.items()}
    return losses, named


def train(config: TrainConfig, dataset: Optional[ImageSet] = None,
          targets: Optional[TargetTable] = None, logger: Optional[RunLogger] = None,
          progress: bool = True) -> Checkpoint:
    """Mini-batch Adam over `config.epochs`; fully determined by (config, seed)"""
    config.validate()
    if dataset is None:
        dataset, targets = prepare_data(config)
    if config.mode == "targeted" and targets is None:
        raise ConfigError("targeted mode needs a reference target table")

    dtype = np.dtype(config.dtype).type
    base = ImageSet(images=dataset.images.astype(dtype), labels=dataset.labels,
                    angles=dataset.angles, source_index=dataset.source_index)
    data = build_rotated(base, config.seed) if config.rotate else base

    state = init(config.latent_dim, config.mode, config.beta, config.seed, dtype=dtype,
                 reparameterization=config.reparameterization)
    m, v = zero_moments(state.params)
    tracker = LossTracker(logger.log_dir if logger else None)
    if logger:
        logger.info(f"training {config.mode} VAE, k={config.latent_dim}, "
                    f"{len(data)} records, {config.epochs} epochs")

    t = 0
    for epoch in range(1, config.epochs + 1):
        if config.rotate and config.resample_rotations:
            data = build_rotated(base, config.seed, draw=epoch)
        order = stream(config.seed, "shuffle", epoch).permutation(len(data))
        noise = stream(config.seed, "noise", epoch)
        starts = range(0, len(data), config.batch_size)
        for b, start in enumerate(tqdm(starts, desc=f"epoch {epoch}/{config.epochs}",
                                       disable=not progress, leave=False)):
            batch = data.subset(order[start:start + config.batch_size])
            try:
                losses, grads = _step(state, batch, targets, noise)
                t += 1
                params, m, v = adam_step(state.params, grads, m, v, t, config)
                state = state.with_params(params)
            except NonFiniteError as exc:
                raise NumericalAbort(epoch, b, exc) from exc
            tracker.add_batch(len(batch), losses.values())
        record = tracker.end_epoch(epoch)
        if logger:
            logger.log_epoch(record)

    if logger:
        logger.log_event("training_done", **tracker.get_summary())
    return Checkpoint(state=state, config=config, history=tracker.history)
