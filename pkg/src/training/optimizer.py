# src/training/optimizer.py
from typing import Dict, Mapping, Tuple

import numpy as np

from ..utils.errors import ConfigError, NonFiniteError

Arrays = Dict[str, np.ndarray]


def zero_moments(params: Mapping[str, np.ndarray]) -> Tuple[Arrays, Arrays]:
    m = {name: np.zeros_like(value) for name, value in params.items()}
    v = {name: np.zeros_like(value) for name, value in params.items()}
    return m, v


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              m: Mapping[str, np.ndarray], v: Mapping[str, np.ndarray], t: int,
              config) -> Tuple[Arrays, Arrays, Arrays]:
    """One bias-corrected Adam update; returns new (params, m, v) and leaves inputs untouched.

    `config` supplies learning_rate, adam_beta1, adam_beta2 and adam_epsilon.
    """
    if t < 1:
        raise ConfigError(f"Adam step index starts at 1, got {t}")
    for name, grad in grads.items():
        if grad.shape != params[name].shape:
            raise ConfigError(f"gradient for {name} has shape {grad.shape}, "
                              f"parameter has {params[name].shape}")
        if not np.isfinite(grad).all():
            raise NonFiniteError("adam_step", f"gradient of {name}")

    b1, b2 = config.adam_beta1, config.adam_beta2
    lr, eps = config.learning_rate, config.adam_epsilon
    correction1 = 1 - b1 ** t
    correction2 = 1 - b2 ** t

    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        grad = grads[name]
        dtype = value.dtype
        m_t = (b1 * m[name] + (1 - b1) * grad).astype(dtype)
        v_t = (b2 * v[name] + (1 - b2) * grad * grad).astype(dtype)
        step = lr * (m_t / correction1) / (np.sqrt(v_t / correction2) + eps)
        new_params[name] = (value - step).astype(dtype)
        new_m[name] = m_t
        new_v[name] = v_t
    return new_params, new_m, new_v
