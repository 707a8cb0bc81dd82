# src/model/vae.py
"""Convolutional VAE: 28x28 -> 14 -> 7 -> 3136 -> 16 -> (mu, log_var) and the mirror decoder."""
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..engine import (Tensor, conv2d, conv2d_transpose, dense, flatten, relu, reshape,
                      sigma_eps, sigmoid, sqrt_sigma_eps)
from ..utils.errors import ConfigError, NonFiniteError, ShapeError
from ..utils.random_streams import stream

MODES = ("standard", "targeted")
REPARAMETERIZATIONS = ("sigma", "sqrt_sigma")
HIDDEN_UNITS = 16
FEATURE_SHAPE = (7, 7, 64)
FEATURE_SIZE = 7 * 7 * 64


def parameter_shapes(latent_dim: int) -> "OrderedDict[str, Tuple[int, ...]]":
    """Every parameter in checkpoint order"""
    k = latent_dim
    return OrderedDict([
        ("enc_conv1_kernel", (3, 3, 1, 32)),
        ("enc_conv1_bias", (32,)),
        ("enc_conv2_kernel", (3, 3, 32, 64)),
        ("enc_conv2_bias", (64,)),
        ("enc_dense_kernel", (FEATURE_SIZE, HIDDEN_UNITS)),
        ("enc_dense_bias", (HIDDEN_UNITS,)),
        ("enc_mu_kernel", (HIDDEN_UNITS, k)),
        ("enc_mu_bias", (k,)),
        ("enc_log_var_kernel", (HIDDEN_UNITS, k)),
        ("enc_log_var_bias", (k,)),
        ("dec_dense_kernel", (k, FEATURE_SIZE)),
        ("dec_dense_bias", (FEATURE_SIZE,)),
        ("dec_deconv1_kernel", (3, 3, 64, 64)),
        ("dec_deconv1_bias", (64,)),
        ("dec_deconv2_kernel", (3, 3, 32, 64)),
        ("dec_deconv2_bias", (32,)),
        ("dec_out_kernel", (3, 3, 32, 1)),
        ("dec_out_bias", (1,)),
    ])


@dataclass(frozen=True)
class ModelState:
    latent_dim: int
    mode: str
    beta: float
    params: Mapping[str, np.ndarray] = field(repr=False)
    reparameterization: str = "sigma"

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{self.mode}'")
        if not self.beta >= 0:
            raise ConfigError(f"beta must be non-negative, got {self.beta}")
        if self.reparameterization not in REPARAMETERIZATIONS:
            raise ConfigError(f"unknown reparameterization '{self.reparameterization}'")
        expected = parameter_shapes(self.latent_dim)
        if list(self.params) != list(expected):
            raise ShapeError("model_state", "parameter_names", list(expected), list(self.params))
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ShapeError("model_state", name, shape, self.params[name].shape)
            if not np.isfinite(self.params[name]).all():
                raise NonFiniteError("model_state", name)

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def tensors(self, requires_grad: bool = False) -> Dict[str, Tensor]:
        return {name: Tensor(value, requires_grad=requires_grad, name=name, dtype=value.dtype)
                for name, value in self.params.items()}

    def with_params(self, params: Mapping[str, np.ndarray]) -> "ModelState":
        ordered = OrderedDict((name, params[name]) for name in self.params)
        return replace(self, params=ordered)


@dataclass
class LatentSample:
    mu: Tensor
    log_var: Tensor
    eps: Tensor
    z: Tensor


def _glorot_limit(shape: Tuple[int, ...]) -> float:
    if len(shape) == 2:
        fan_in, fan_out = shape
    else:
        receptive = int(np.prod(shape[:-2]))
        fan_in, fan_out = receptive * shape[-2], receptive * shape[-1]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init(latent_dim: int, mode: str = "standard", beta: float = 1.0, seed: int = 0,
         dtype=np.float64, reparameterization: str = "sigma") -> ModelState:
    """Glorot-uniform kernels, zero biases, drawn in checkpoint order from the init stream"""
    if latent_dim < 1:
        raise ConfigError(f"latent_dim must be >= 1, got {latent_dim}")
    rng = stream(seed, "init")
    params = OrderedDict()
    for name, shape in parameter_shapes(latent_dim).items():
        if name.endswith("_bias"):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            limit = _glorot_limit(shape)
            params[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return ModelState(latent_dim=latent_dim, mode=mode, beta=beta, params=params,
                      reparameterization=reparameterization)


def _as_input(state: ModelState, batch) -> Tensor:
    if not isinstance(batch, Tensor):
        batch = Tensor(np.asarray(batch, dtype=state.dtype))
    if batch.ndim != 4 or batch.shape[1:] != (28, 28, 1):
        raise ShapeError("encode", "input", "(N, 28, 28, 1)", batch.shape)
    return batch


def encode(state: ModelState, batch, params: Optional[Mapping[str, Tensor]] = None
           ) -> Tuple[Tensor, Tensor]:
    """(mu, log_var) for an N x 28 x 28 x 1 batch"""
    p = params if params is not None else state.tensors()
    x = _as_input(state, batch)
    h = relu(conv2d(x, p["enc_conv1_kernel"], p["enc_conv1_bias"], stride=2))
    h = relu(conv2d(h, p["enc_conv2_kernel"], p["enc_conv2_bias"], stride=2))
    h = relu(dense(flatten(h), p["enc_dense_kernel"], p["enc_dense_bias"]))
    mu = dense(h, p["enc_mu_kernel"], p["enc_mu_bias"])
    log_var = dense(h, p["enc_log_var_kernel"], p["enc_log_var_bias"])
    return mu, log_var


def sample(mu: Tensor, log_var: Tensor, rng: Optional[np.random.Generator] = None,
           eps: Optional[np.ndarray] = None, reparameterization: str = "sigma") -> LatentSample:
    """Reparameterized draw; gradients reach mu and log_var, never eps"""
    if mu.shape != log_var.shape:
        raise ShapeError("sample", "latent", mu.shape, log_var.shape)
    if eps is None:
        eps = rng.standard_normal(mu.shape)
    noise = Tensor(np.asarray(eps, dtype=mu.dtype))
    if noise.shape != mu.shape:
        raise ShapeError("sample", "eps", mu.shape, noise.shape)
    compose = sigma_eps if reparameterization == "sigma" else sqrt_sigma_eps
    return LatentSample(mu=mu, log_var=log_var, eps=noise, z=compose(mu, log_var, noise))


def decode(state: ModelState, z, params: Optional[Mapping[str, Tensor]] = None) -> Tensor:
    """N x k latent codes to N x 28 x 28 x 1 pixel probabilities"""
    p = params if params is not None else state.tensors()
    if not isinstance(z, Tensor):
        z = Tensor(np.asarray(z, dtype=state.dtype))
    if z.ndim != 2 or z.shape[1] != state.latent_dim:
        raise ShapeError("decode", "latent", state.latent_dim, z.shape)
    h = relu(dense(z, p["dec_dense_kernel"], p["dec_dense_bias"]))
    h = reshape(h, (z.shape[0],) + FEATURE_SHAPE)
    h = relu(conv2d_transpose(h, p["dec_deconv1_kernel"], p["dec_deconv1_bias"], stride=2))
    h = relu(conv2d_transpose(h, p["dec_deconv2_kernel"], p["dec_deconv2_bias"], stride=2))
    return sigmoid(conv2d(h, p["dec_out_kernel"], p["dec_out_bias"], stride=1))
