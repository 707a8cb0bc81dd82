# src/utils/random_streams.py
import numpy as np

# Stream ids are part of the reproducibility contract: never renumber.
STREAMS = {
    "init": 1,
    "rotation": 2,
    "subset": 3,
    "shuffle": 4,
    "noise": 5,
    "split": 6,
    "tsne": 7,
    "census_sample": 8,
}


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Philox generator keyed by (seed, stream id, *extra)"""
    entropy = [int(seed), STREAMS[name], *(int(e) for e in extra)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
