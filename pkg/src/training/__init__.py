# src/training/__init__.py
from .optimizer import adam_step, zero_moments
from .trainer import Checkpoint, TrainConfig, prepare_data, train
from .checkpoint import dumps, load, loads, save
