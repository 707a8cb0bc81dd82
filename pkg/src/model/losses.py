# src/model/losses.py
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..engine import (Tensor, add, clip, exp, log, mul, reduce_mean, reduce_sum, scale,
                      square, sub)
from ..utils.data_loader import ImageSet, TargetTable
from ..utils.errors import DataError, ShapeError
from .vae import LatentSample, ModelState, decode, encode, sample

BCE_EPSILON = 1e-7


@dataclass
class LossBreakdown:
    total: Tensor
    reconstruction: Tensor
    kl: Tensor

    def values(self) -> Dict[str, float]:
        return {"total": self.total.item(), "recon": self.reconstruction.item(),
                "kl": self.kl.item()}


def kl_loss(mu: Tensor, log_var: Tensor) -> Tensor:
    """Batch mean of -1/2 * sum_k (1 + log_var - exp(log_var) - mu^2)"""
    if mu.shape != log_var.shape:
        raise ShapeError("kl_loss", "latent", mu.shape, log_var.shape)
    inner = sub(sub(add(log_var, 1.0), exp(log_var)), square(mu))
    return scale(reduce_mean(reduce_sum(inner, axes=1)), -0.5)


def reconstruction_loss(target, output: Tensor) -> Tensor:
    """Per-pixel binary cross-entropy summed over 28x28, meaned over the batch"""
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=output.dtype)
    if t.shape != output.shape:
        raise ShapeError("reconstruction_loss", "image", t.shape, output.shape)
    y = clip(output, BCE_EPSILON, 1 - BCE_EPSILON)
    hit = mul(log(y), Tensor(t, dtype=output.dtype))
    miss = mul(log(add(scale(y, -1.0), 1.0)), Tensor(1 - t, dtype=output.dtype))
    per_pixel = reduce_mean(scale(add(hit, miss), -1.0), axes=3)
    return reduce_mean(reduce_sum(per_pixel, axes=(1, 2)))


def reconstruction_target(state: ModelState, batch: ImageSet,
                          targets: Optional[TargetTable]) -> np.ndarray:
    if state.mode == "standard":
        return batch.images[..., None]
    if targets is None:
        raise DataError("targeted mode needs a reference target table")
    if batch.labels is None or len(batch.labels) != len(batch):
        raise DataError("targeted mode needs a label for every record")
    if len(batch) and (batch.labels.min() < 0 or batch.labels.max() >= len(targets.targets)):
        raise DataError("batch labels fall outside the target table")
    return targets.for_labels(batch.labels)


def total_loss(state: ModelState, batch: ImageSet, targets: Optional[TargetTable],
               rng: Optional[np.random.Generator] = None,
               params: Optional[Mapping[str, Tensor]] = None,
               eps: Optional[np.ndarray] = None) -> Tuple[LossBreakdown, LatentSample, Tensor]:
    """reconstruction + beta * KL for one batch; the reconstruction target follows `state.mode`"""
    p = params if params is not None else state.tensors()
    x = Tensor(batch.images[..., None].astype(state.dtype))
    target = reconstruction_target(state, batch, targets).astype(state.dtype)

    mu, log_var = encode(state, x, p)
    latent = sample(mu, log_var, rng=rng, eps=eps, reparameterization=state.reparameterization)
    output = decode(state, latent.z, p)

    recon = reconstruction_loss(target, output)
    kl = kl_loss(mu, log_var)
    total = add(recon, scale(kl, state.beta))
    return LossBreakdown(total=total, reconstruction=recon, kl=kl), latent, output
