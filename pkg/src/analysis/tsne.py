# src/analysis/tsne.py
"""Exact t-SNE.

Gaussian input affinities with per-point precisions found by bisection on the Shannon
entropy (nats), Student-t output kernel, gradient descent with momentum and per-coordinate
gains, early exaggeration during the first phase.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..utils.errors import ConfigError, DataError
from ..utils.random_streams import stream

MAX_POINTS = 10000
ENTROPY_TOLERANCE = 1e-5
MIN_PROBABILITY = 1e-12
MIN_GAIN = 0.01


@dataclass
class TsneResult:
    embedding: np.ndarray
    kl_history: np.ndarray
    betas: np.ndarray
    entropies: np.ndarray


def conditional_affinities(sq_dist: np.ndarray, perplexity: float,
                           tol: float = ENTROPY_TOLERANCE, max_steps: int = 200
                           ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-normalised p(j|i), the precisions found, and the entropies they achieve"""
    n = sq_dist.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    betas = np.ones(n)
    entropies = np.zeros(n)

    for i in range(n):
        d = np.delete(sq_dist[i], i)
        d = d - d.min()
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(max_steps):
            p = np.exp(-d * beta)
            total = p.sum()
            entropy = np.log(total) + beta * np.dot(d, p) / total
            gap = entropy - target
            if abs(gap) <= tol:
                break
            if gap > 0:
                lo = beta
                beta = beta * 2 if hi == np.inf else (beta + hi) / 2
            else:
                hi = beta
                beta = (beta + lo) / 2
        P[i, np.arange(n) != i] = p / total
        betas[i] = beta
        entropies[i] = entropy
    return P, betas, entropies


def joint_affinities(points: np.ndarray, perplexity: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    sq_dist = cdist(points, points, "sqeuclidean")
    conditional, betas, entropies = conditional_affinities(sq_dist, perplexity)
    P = (conditional + conditional.T) / (2 * len(points))
    return np.maximum(P, MIN_PROBABILITY), betas, entropies


def tsne(points: np.ndarray, perplexity: float = 30.0, iters: int = 1000, seed: int = 0,
         learning_rate: float = 200.0, exaggeration: float = 12.0,
         exaggeration_iters: int = 250, momentum_switch: int = 250) -> TsneResult:
    """Embed N x k points in two dimensions; deterministic per seed"""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n > MAX_POINTS:
        raise ConfigError(f"exact t-SNE is limited to {MAX_POINTS} points, got {n}")
    if not 0 < perplexity < n / 3:
        raise ConfigError(f"perplexity must lie in (0, N/3) = (0, {n / 3:.1f}), got {perplexity}")
    if iters < 1:
        raise ConfigError(f"iters must be >= 1, got {iters}")
    if np.ptp(points, axis=0).max() == 0:
        raise DataError("t-SNE affinities are undefined when all points coincide")

    P, betas, entropies = joint_affinities(points, perplexity)
    log_P = np.log(P)
    off_diagonal = ~np.eye(n, dtype=bool)

    Y = stream(seed, "tsne").standard_normal((n, 2)) * 1e-4
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl_history = np.zeros(iters)

    for it in range(iters):
        num = 1.0 / (1.0 + cdist(Y, Y, "sqeuclidean"))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), MIN_PROBABILITY)
        kl_history[it] = np.sum(P[off_diagonal] * (log_P[off_diagonal] - np.log(Q[off_diagonal])))

        weight = (P * exaggeration if it < exaggeration_iters else P) - Q
        weight *= num
        grad = 4.0 * (weight.sum(axis=1)[:, None] * Y - weight @ Y)

        momentum = 0.5 if it < momentum_switch else 0.8
        same_sign = (grad > 0) == (update > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, MIN_GAIN)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)

    return TsneResult(embedding=Y, kl_history=kl_history, betas=betas, entropies=entropies)
