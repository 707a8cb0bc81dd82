# src/analysis/latent.py
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from ..model import ModelState, decode, encode
from ..utils.data_loader import IMAGE_SIZE, ImageSet, TargetTable
from ..utils.errors import ConfigError, DataError, UnsupportedLatentDim
from ..utils.random_streams import stream

EMBED_BATCH = 500
NUM_CLASSES = 10


@dataclass
class LatentPointSet:
    points: np.ndarray
    labels: np.ndarray
    angles: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.points.ndim != 2:
            raise DataError(f"latent points must be N x k, got {self.points.shape}")
        if len(self.points) != len(self.labels):
            raise DataError(f"{len(self.points)} points but {len(self.labels)} labels")
        if self.angles is not None and len(self.angles) != len(self.points):
            raise DataError(f"{len(self.points)} points but {len(self.angles)} angles")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class Mosaic:
    cells: np.ndarray
    coords: np.ndarray

    @property
    def steps(self) -> int:
        return self.cells.shape[0]

    def image(self) -> np.ndarray:
        """Cells tiled row-major into one (steps*28) x (steps*28) image"""
        return tile(self.cells)


@dataclass
class CensusResult:
    digit: int
    side: float
    center: np.ndarray
    counts: np.ndarray
    indices: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def majority(self) -> Optional[int]:
        return int(np.argmax(self.counts)) if self.total else None

    @property
    def purity(self) -> float:
        return float(self.counts[self.digit] / self.total) if self.total else 0.0


def tile(cells: np.ndarray) -> np.ndarray:
    rows, cols, height, width = cells.shape
    return cells.transpose(0, 2, 1, 3).reshape(rows * height, cols * width)


def embed(model: ModelState, image_set: ImageSet, batch_size: int = EMBED_BATCH) -> LatentPointSet:
    """Encoder means for every record; no sampling noise"""
    chunks = []
    for start in range(0, len(image_set), batch_size):
        positions = np.arange(start, min(start + batch_size, len(image_set)))
        mu, _ = encode(model, image_set.batch(positions).astype(model.dtype))
        chunks.append(mu.data.astype(np.float64))
    points = np.concatenate(chunks) if chunks else np.zeros((0, model.latent_dim))
    angles = None if image_set.angles is None else image_set.angles.copy()
    return LatentPointSet(points=points, labels=image_set.labels.copy(), angles=angles)


def decode_grid(model: ModelState, lo: float = -3.0, hi: float = 3.0, steps: int = 30) -> Mosaic:
    """Decoder outputs on a steps x steps lattice; rows follow z1, columns follow z2"""
    if model.latent_dim != 2:
        raise UnsupportedLatentDim(
            f"decode grids are defined for 2-d latent spaces, this model has k={model.latent_dim}")
    if steps < 2:
        raise ConfigError(f"steps must be >= 2, got {steps}")
    axis = np.linspace(lo, hi, steps)
    coords = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1)
    cells = np.empty((steps, steps, IMAGE_SIZE, IMAGE_SIZE))
    # One decode per cell so every cell matches a direct decode of its coordinate bit-for-bit.
    for i in range(steps):
        for j in range(steps):
            cells[i, j] = decode(model, coords[i, j][None, :]).data[0, :, :, 0]
    return Mosaic(cells=cells, coords=coords)


def reference_center(model: ModelState, targets: TargetTable, digit: int) -> np.ndarray:
    mu, _ = encode(model, targets.targets[digit][None, :, :, None].astype(model.dtype))
    return mu.data[0].astype(np.float64)


def neighborhood_census(model: ModelState, image_set: ImageSet, targets: TargetTable,
                        digit: int = 8, side: float = 0.2,
                        latents: Optional[LatentPointSet] = None) -> CensusResult:
    """Count records whose encoder mean lies in the cube of edge `side` around a reference"""
    if not 0 <= digit < NUM_CLASSES:
        raise ConfigError(f"digit must be in 0..9, got {digit}")
    if not side > 0:
        raise ConfigError(f"side must be positive, got {side}")
    center = reference_center(model, targets, digit)
    points = latents if latents is not None else embed(model, image_set)
    inside = np.all(np.abs(points.points - center) <= side / 2, axis=1)
    indices = np.flatnonzero(inside)
    counts = np.bincount(points.labels[indices], minlength=NUM_CLASSES)[:NUM_CLASSES]
    return CensusResult(digit=digit, side=side, center=center, counts=counts, indices=indices)


def census_sample(image_set: ImageSet, result: CensusResult, count: int, seed: int) -> np.ndarray:
    """Seeded sample (without replacement) of cube members' images"""
    take = min(count, len(result.indices))
    chosen = stream(seed, "census_sample").choice(result.indices, size=take, replace=False)
    return image_set.images[np.sort(chosen)]


def _vote(labels: np.ndarray, distances: np.ndarray) -> int:
    classes = np.unique(labels)
    votes = np.array([np.sum(labels == c) for c in classes])
    spread = np.array([distances[labels == c].sum() for c in classes])
    # Most votes, then smallest summed distance, then lowest label.
    best = np.lexsort((classes, spread, -votes))[0]
    return int(classes[best])


def knn_purity(latents: LatentPointSet, k_neighbors: int = 15, holdout_fraction: float = 0.2,
               seed: int = 0, chunk: int = 512) -> float:
    """Held-out k-nearest-neighbour accuracy of the labels in latent space"""
    n = len(latents)
    if len(np.unique(latents.labels)) < 2:
        raise DataError("knn_purity needs at least two classes")
    n_hold = int(round(holdout_fraction * n))
    if n_hold < 1:
        raise DataError("holdout is empty")
    if n_hold >= n:
        raise DataError("holdout leaves no reference points")
    if k_neighbors < 1:
        raise ConfigError(f"k_neighbors must be >= 1, got {k_neighbors}")

    order = stream(seed, "split").permutation(n)
    held, ref = order[:n_hold], order[n_hold:]
    k = min(k_neighbors, len(ref))
    ref_points, ref_labels = latents.points[ref], latents.labels[ref]

    correct = 0
    for start in range(0, n_hold, chunk):
        rows = held[start:start + chunk]
        dist = cdist(latents.points[rows], ref_points)
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
        for r, row in enumerate(rows):
            picked = nearest[r]
            if _vote(ref_labels[picked], dist[r, picked]) == latents.labels[row]:
                correct += 1
    return correct / n_hold
