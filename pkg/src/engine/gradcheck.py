# src/engine/gradcheck.py
from typing import Callable, Sequence

import numpy as np


def central_difference(fn: Callable[[np.ndarray], float], point: np.ndarray,
                       index: tuple, step: float = 1e-5) -> float:
    """d fn / d point[index] by central differences; `point` is left unchanged"""
    shifted = np.array(point, dtype=np.float64)
    shifted[index] = point[index] + step
    upper = fn(shifted)
    shifted[index] = point[index] - step
    lower = fn(shifted)
    return (upper - lower) / (2 * step)


def relative_error(analytic: float, numeric: float, floor: float = 1e-12) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def largest_entries(grad: np.ndarray, count: int) -> Sequence[tuple]:
    """Indices of the `count` largest-magnitude gradient entries"""
    flat = np.argsort(-np.abs(grad), axis=None, kind="stable")[:count]
    return [np.unravel_index(i, grad.shape) for i in flat]
